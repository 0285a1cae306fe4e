"""Simulation configuration and its ``key = value`` text document.

Document grammar: one dotted key per line, ``key = value``, ``#`` starts a
comment. Values are Python-style literals (numbers, tuples, lists) plus
``inf``, ``true`` and ``false``.
"""
from __future__ import annotations

import ast
import hashlib
import math
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration document or invariant violation."""


class ConfigDefaultsWarning(UserWarning):
    pass


STANDARD_HIGH_POSITIONS = ((4, 4), (4, 16), (16, 4), (16, 16))


@dataclass(frozen=True)
class SimulationConfig:
    rows: int = 20
    cols: int = 20
    dim: int = 2
    state_init_range: tuple = (0.0, 2.0)
    offset_range: tuple = (-0.02, 0.08)
    offset_scale: float = 1.0
    edge_weight_range: tuple = (0.0, 0.33)
    high_positions: tuple = STANDARD_HIGH_POSITIONS
    high_weight: float = 3.0
    low_weight: float = 1.0
    coupling: tuple | None = None  # None means identity of size dim
    threshold: float = 4.0
    steps: int = 10000
    snapshot_every: int = 100
    seed: int = 0
    strict_stability: bool = False

    def __post_init__(self):
        # normalise containers so equality and hashing are structural
        def tup(v):
            return tuple(float(x) for x in v)

        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("state_init_range", tup(self.state_init_range))
        set_("offset_range", tup(self.offset_range))
        set_("edge_weight_range", tup(self.edge_weight_range))
        set_("high_positions", tuple(sorted({(int(i), int(j)) for i, j in self.high_positions})))
        if self.coupling is None:
            set_("coupling", tuple(tuple(float(i == j) for j in range(self.dim)) for i in range(self.dim)))
        else:
            set_("coupling", tuple(tuple(float(x) for x in row) for row in self.coupling))
        for k in ("offset_scale", "high_weight", "low_weight", "threshold"):
            set_(k, float(getattr(self, k)))

    @property
    def coupling_matrix(self) -> np.ndarray:
        return np.array(self.coupling, dtype=float).reshape(len(self.coupling), -1)

    @property
    def coupling_is_identity(self) -> bool:
        A = self.coupling_matrix
        return A.shape == (self.dim, self.dim) and np.array_equal(A, np.eye(self.dim))

    def with_(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)

    def digest(self) -> str:
        """Short content hash used as run provenance."""
        return hashlib.sha256(serialize_config(self).encode()).hexdigest()[:16]


# document key -> dataclass field
KEYS = {
    "grid.rows": "rows",
    "grid.cols": "cols",
    "state.dim": "dim",
    "state.init_range": "state_init_range",
    "offset.range": "offset_range",
    "offset.scale": "offset_scale",
    "edges.weight_range": "edge_weight_range",
    "nodes.high_positions": "high_positions",
    "nodes.high_weight": "high_weight",
    "nodes.low_weight": "low_weight",
    "coupling.matrix": "coupling",
    "psi": "threshold",
    "steps": "steps",
    "snapshot_every": "snapshot_every",
    "seed": "seed",
    "strict_stability": "strict_stability",
}
FIELD_TO_KEY = {v: k for k, v in KEYS.items()}


def validation_errors(cfg: SimulationConfig) -> list[str]:
    """All invariant violations, each prefixed by its document key."""
    errs = []

    def bad(field_name, msg):
        errs.append(f"{FIELD_TO_KEY[field_name]}: {msg}")

    for f in ("rows", "cols", "dim"):
        v = getattr(cfg, f)
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
            bad(f, f"must be a positive integer, got {v!r}")
    for f in ("state_init_range", "offset_range", "edge_weight_range"):
        v = getattr(cfg, f)
        if len(v) != 2 or not all(math.isfinite(x) for x in v) or not v[0] < v[1]:
            bad(f, f"must be an interval (lower, upper) with lower < upper, got {v!r}")
    if len(cfg.edge_weight_range) == 2 and cfg.edge_weight_range[0] < 0:
        bad("edge_weight_range", "lower bound must be >= 0")
    if not (cfg.offset_scale > 0 and math.isfinite(cfg.offset_scale)):
        bad("offset_scale", f"must be a positive real, got {cfg.offset_scale}")
    for f in ("high_weight", "low_weight"):
        v = getattr(cfg, f)
        if not (v > 0 and math.isfinite(v)):
            bad(f, f"must be a positive real, got {v}")
    if not cfg.threshold > 0:
        bad("threshold", f"must be > 0, got {cfg.threshold}")
    if not isinstance(cfg.steps, (int, np.integer)) or isinstance(cfg.steps, bool) or cfg.steps < 0:
        bad("steps", f"must be an integer >= 0, got {cfg.steps!r}")
    if not isinstance(cfg.snapshot_every, (int, np.integer)) or cfg.snapshot_every < 1:
        bad("snapshot_every", f"must be an integer >= 1, got {cfg.snapshot_every!r}")
    if not isinstance(cfg.seed, (int, np.integer)) or cfg.seed < 0:
        bad("seed", f"must be an unsigned integer, got {cfg.seed!r}")
    if not isinstance(cfg.strict_stability, bool):
        bad("strict_stability", f"must be true or false, got {cfg.strict_stability!r}")
    rows = [len(r) for r in cfg.coupling]
    if len(rows) != cfg.dim or any(n != cfg.dim for n in rows):
        bad("coupling", f"must be {cfg.dim}x{cfg.dim}")
    elif not all(math.isfinite(x) for r in cfg.coupling for x in r):
        bad("coupling", "entries must be finite")
    for i, j in cfg.high_positions:
        if not (1 <= i <= cfg.rows and 1 <= j <= cfg.cols):
            bad("high_positions", f"({i}, {j}) lies outside the {cfg.rows}x{cfg.cols} grid")
    return errs


def validate(cfg: SimulationConfig) -> SimulationConfig:
    errs = validation_errors(cfg)
    if errs:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))
    return cfg


def _parse_value(raw: str):
    env = {"inf": math.inf, "true": True, "false": False}
    if raw in env:
        return env[raw]
    tree = ast.parse(raw, mode="eval")
    # allow bare inf / true / false nested inside containers
    tree = ast.fix_missing_locations(_NameSubst(env).visit(tree))
    return ast.literal_eval(tree)


class _NameSubst(ast.NodeTransformer):
    def __init__(self, env):
        self.env = env

    def visit_Name(self, node):
        if node.id in self.env:
            return ast.copy_location(ast.Constant(self.env[node.id]), node)
        raise ValueError(f"unknown name {node.id!r}")


def _coerce(field_name, value):
    ints = {"rows", "cols", "dim", "steps", "snapshot_every", "seed"}
    if field_name in ints:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise TypeError("expected an integer")
        return value
    if field_name == "strict_stability":
        if not isinstance(value, bool):
            raise TypeError("expected true or false")
        return value
    if field_name in ("state_init_range", "offset_range", "edge_weight_range"):
        if not isinstance(value, (tuple, list)) or len(value) != 2:
            raise TypeError("expected an interval (lower, upper)")
        return tuple(float(v) for v in value)
    if field_name == "high_positions":
        if not isinstance(value, (tuple, list)):
            raise TypeError("expected a list of (i, j) pairs")
        out = []
        for p in value:
            if not isinstance(p, (tuple, list)) or len(p) != 2 or not all(isinstance(v, int) for v in p):
                raise TypeError(f"bad position {p!r}")
            out.append(tuple(p))
        return tuple(out)
    if field_name == "coupling":
        if not isinstance(value, (tuple, list)) or not all(isinstance(r, (tuple, list)) for r in value):
            raise TypeError("expected a matrix [[...], ...]")
        return tuple(tuple(float(x) for x in r) for r in value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError("expected a number")
    return float(value)


def parse_config(text: str, *, warn: bool = True) -> SimulationConfig:
    """Parse and validate a config document; missing keys take standard values."""
    found: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            col = len(body) - len(body.lstrip()) + 1
            raise ConfigError(f"syntax error at line {lineno}, column {col}: expected 'key = value'")
        key_part, raw = body.split("=", 1)
        key = key_part.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r} at line {lineno}")
        if KEYS[key] in found:
            raise ConfigError(f"duplicate key {key!r} at line {lineno}")
        value_col = len(key_part) + 2 + (len(raw) - len(raw.lstrip()))
        try:
            value = _parse_value(raw.strip())
        except SyntaxError as exc:
            col = value_col + max((exc.offset or 1) - 1, 0)
            raise ConfigError(f"syntax error at line {lineno}, column {col}: {exc.msg}") from None
        except ValueError as exc:
            raise ConfigError(f"syntax error at line {lineno}, column {value_col}: {exc}") from None
        try:
            found[KEYS[key]] = _coerce(KEYS[key], value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc} (line {lineno})") from None
    missing = [FIELD_TO_KEY[f.name] for f in fields(SimulationConfig) if f.name not in found]
    if "coupling" not in found and "dim" in found:
        found["coupling"] = None  # identity sized to the requested dim
    if missing and warn:
        warnings.warn("defaults applied for: " + ", ".join(missing), ConfigDefaultsWarning, stacklevel=2)
    try:
        cfg = SimulationConfig(**found)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return validate(cfg)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, tuple):
        if v and all(isinstance(x, tuple) for x in v):
            return "[" + ", ".join(_fmt(x) for x in v) + "]"
        return "(" + ", ".join(_fmt(x) for x in v) + ")"
    return str(v)


def serialize_config(cfg: SimulationConfig) -> str:
    lines = [f"{key} = {_fmt(getattr(cfg, name))}" for key, name in KEYS.items()]
    return "\n".join(lines) + "\n"
