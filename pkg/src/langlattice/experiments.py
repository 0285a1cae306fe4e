"""Seeded presets for the standard, offset-scaling, O/X-layout and 3-D runs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .config import SimulationConfig, validate
from .dynamics import Trajectory, build_system, run
from .stability import stability_report

O_TYPE_POSITIONS = ((4, 4), (4, 10), (4, 16), (10, 4), (10, 16), (16, 4), (16, 10), (16, 16))
X_TYPE_POSITIONS = ((4, 4), (8, 8), (10, 10), (12, 12), (16, 16), (4, 16), (8, 12), (12, 8), (16, 4))
DEFAULT_KS = (1.0, 2.0, 4.0)


def standard_config(seed: int = 0) -> SimulationConfig:
    """20x20 grid, 2-D states, four high-weight nodes, 10000 steps."""
    return validate(SimulationConfig(seed=int(seed)))


def offset_scaled_config(base: SimulationConfig, k: float) -> SimulationConfig:
    """Same draws as ``base`` with every offset divided by ``k``."""
    if not k > 0:
        raise ValueError("k must be positive")
    return base.with_(offset_scale=base.offset_scale / k)


def otype_config(seed: int = 0) -> SimulationConfig:
    return standard_config(seed).with_(high_positions=O_TYPE_POSITIONS)


def xtype_config(seed: int = 0) -> SimulationConfig:
    return standard_config(seed).with_(high_positions=X_TYPE_POSITIONS)


def dim3_config(seed: int = 0) -> SimulationConfig:
    return standard_config(seed).with_(dim=3, coupling=None)


@dataclass(eq=False)
class RunResult:
    label: str
    config: SimulationConfig
    trajectory: Trajectory
    topology: object
    stability: object
    clusters: analysis.ClusterReport | None
    cluster_error: str | None = None

    def to_dict(self) -> dict:
        extent, center = analysis.bounding_box(self.trajectory.final)
        return {
            "label": self.label,
            "config_hash": self.config.digest(),
            "seed": self.config.seed,
            "offset_scale": self.config.offset_scale,
            "final_step": self.trajectory.final.step,
            "extent": extent.tolist(),
            "center": center.tolist(),
            "stability": self.stability.summary(),
            "clusters": None if self.clusters is None else _cluster_summary(self.clusters),
            "cluster_error": self.cluster_error,
        }


def _cluster_summary(rep: analysis.ClusterReport) -> dict:
    d = rep.to_dict()
    d.pop("labels")
    return d


@dataclass(eq=False)
class ExperimentReport:
    name: str
    seed: int
    runs: list[RunResult]
    ratios: list[dict] | None = None  # one entry per k, base included
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "seed": self.seed,
            "runs": [r.to_dict() for r in self.runs],
        }
        if self.ratios is not None:
            out["ratios"] = self.ratios
        out.update(self.extra)
        return out


def execute(config: SimulationConfig, label: str = "run", eps=analysis.DEFAULT_EPS,
            min_pts=analysis.DEFAULT_MIN_PTS) -> RunResult:
    """Build, check, simulate and analyse one config."""
    system = build_system(config)
    stab = stability_report(config, system=system)
    traj = run(config, system=system)
    try:
        clusters = analysis.analyze(traj, system.topology, eps, min_pts)
        err = None
    except analysis.DegenerateLabelingError as exc:
        clusters, err = None, str(exc)
    return RunResult(label, config, traj, system.topology, stab, clusters, err)


def scaling_ratios(base: RunResult, other: RunResult, k: float) -> dict:
    e0, c0 = analysis.bounding_box(base.trajectory.final)
    e1, c1 = analysis.bounding_box(other.trajectory.final)
    return {
        "k": k,
        "extent_ratio": (e1 / e0).tolist(),
        "center_ratio": (c1 / c0).tolist(),
        "area_ratio": float(np.prod(e1) / np.prod(e0)),
        "expected_linear": 1.0 / k,
        "expected_area": 1.0 / k**2,
    }


def run_offset_scaling_experiment(seed: int = 0, ks=DEFAULT_KS,
                                  base: SimulationConfig | None = None) -> ExperimentReport:
    """Base run plus one run per ``k`` with offsets shrunk by ``1/k``."""
    ks = [float(k) for k in ks]
    if not ks or 1.0 not in ks:
        raise ValueError("ks must be nonempty and include 1")
    base_cfg = base if base is not None else standard_config(seed)
    results = {}
    for k in ks:
        results[k] = execute(offset_scaled_config(base_cfg, k), label=f"k={k:g}")
    ordered = [results[k] for k in ks]
    ratios = [scaling_ratios(results[1.0], results[k], k) for k in ks]
    return ExperimentReport("offset-scaling", int(base_cfg.seed), ordered, ratios)


PRESETS = {
    "standard": standard_config,
    "o-type": otype_config,
    "x-type": xtype_config,
    "dim3": dim3_config,
}
EXPERIMENT_NAMES = ("standard", "offset-scaling", "o-type", "x-type", "dim3")


def run_named(name: str, seed: int = 0) -> ExperimentReport:
    if name == "offset-scaling":
        return run_offset_scaling_experiment(seed, DEFAULT_KS)
    if name not in PRESETS:
        raise ValueError(f"unknown experiment {name!r}; valid presets: {', '.join(EXPERIMENT_NAMES)}")
    result = execute(PRESETS[name](seed), label=name)
    return ExperimentReport(name, int(seed), [result])
