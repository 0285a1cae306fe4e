"""Snapshot CSV files, JSON reports and SVG scatter plots."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import node_colors
from .dynamics import LatticeState
from .lattice import GridTopology


def fmt_float(v: float) -> str:
    """Up to 9 significant digits, trailing zeros trimmed."""
    v = float(v)
    if v == 0:
        return "0"
    if not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return f"{v:.9g}"


def _round9(obj):
    if isinstance(obj, float):
        return float(fmt_float(obj)) if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _round9(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round9(obj.tolist())
    return obj


def dumps_report(obj) -> str:
    """Deterministic JSON with floats rounded to 9 significant digits."""
    return json.dumps(_round9(obj), indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def snapshot_csv(snapshot: LatticeState, topology: GridTopology) -> str:
    x = snapshot.x
    if x.shape[0] != topology.n_nodes:
        raise ValueError(f"snapshot has {x.shape[0]} nodes, grid has {topology.n_nodes}")
    p = x.shape[1]
    header = ["step", "i", "j"] + [f"x{c + 1}" for c in range(p)] + ["R", "G", "B"]
    lines = [",".join(header)]
    colors = node_colors(topology)
    for k, (i, j) in enumerate(topology.nodes()):
        vals = [fmt_float(v) for v in x[k]] + [fmt_float(v) for v in colors[k]]
        lines.append(",".join([str(snapshot.step), str(i), str(j)] + vals))
    return "\n".join(lines) + "\n"


def write_snapshot(snapshot: LatticeState, topology: GridTopology, path) -> Path:
    return write_text(path, snapshot_csv(snapshot, topology))


def read_snapshot(path) -> tuple[LatticeState, GridTopology]:
    """Inverse of :func:`write_snapshot`; grid size is inferred from the labels."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows or rows[0][:3] != ["step", "i", "j"]:
        raise ValueError(f"{path}: not a snapshot file")
    header = rows[0]
    p = sum(1 for h in header if h.startswith("x"))
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: no data rows")
    ij = np.array([(int(r[1]), int(r[2])) for r in body])
    topo = GridTopology(int(ij[:, 0].max()), int(ij[:, 1].max()))
    if len(body) != topo.n_nodes:
        raise ValueError(f"{path}: expected {topo.n_nodes} rows, found {len(body)}")
    x = np.empty((topo.n_nodes, p))
    for r, (i, j) in zip(body, ij):
        x[topo.index(int(i), int(j))] = [float(v) for v in r[3:3 + p]]
    steps = {int(r[0]) for r in body}
    if len(steps) != 1:
        raise ValueError(f"{path}: mixed step values {sorted(steps)}")
    return LatticeState(steps.pop(), x), topo


SVG_SIZE = 600
SVG_RADIUS = 4


def svg_scatter(snapshot: LatticeState, topology: GridTopology, axes=(0, 1)) -> str:
    """Standalone SVG with one colored circle per node."""
    x = snapshot.x
    p = x.shape[1]
    ax = [int(a) for a in axes]
    if len(ax) != 2 or any(not 0 <= a < p for a in ax):
        raise ValueError(f"axes {tuple(axes)} out of range for {p}-dimensional states")
    pts = x[:, ax]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.maximum(hi - lo, 0.0)
    # square viewport so distances are not distorted
    side = float(span.max()) or 1.0
    mid = (hi + lo) / 2
    side *= 1.1  # 5% margin on each side
    x0, y0 = mid[0] - side / 2, mid[1] - side / 2
    scale = SVG_SIZE / side
    colors = node_colors(topology)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<rect width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>',
        f"<!-- step {snapshot.step}; axes {ax[0]},{ax[1]}; "
        f"x in [{fmt_float(x0)}, {fmt_float(x0 + side)}], y in [{fmt_float(y0)}, {fmt_float(y0 + side)}] -->",
    ]
    for k, (i, j) in enumerate(topology.nodes()):
        cx = (pts[k, 0] - x0) * scale
        cy = SVG_SIZE - (pts[k, 1] - y0) * scale  # state y grows upward
        r, g, b = (int(round(255 * c)) for c in colors[k])
        out.append(
            f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{SVG_RADIUS}" fill="rgb({r},{g},{b})">'
            f"<title>({i},{j})</title></circle>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_scatter(snapshot: LatticeState, topology: GridTopology, path, axes=(0, 1)) -> Path:
    return write_text(path, svg_scatter(snapshot, topology, axes))
