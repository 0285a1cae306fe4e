"""Lattice multi-agent language-evolution simulator and analysis tools."""
from .analysis import ClusterReport, analyze, analyze_snapshot, bounding_box, cluster, coherence, color_of
from .config import ConfigError, SimulationConfig, parse_config, serialize_config
from .dynamics import DivergenceError, LatticeState, Trajectory, delta, gate, run, step
from .experiments import run_named, standard_config
from .lattice import GridTopology, build_topology
from .stability import spectral_radius, stability_report

__version__ = "0.1.0"
