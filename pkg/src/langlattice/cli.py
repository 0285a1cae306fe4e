"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 divergence abort.
"""
from __future__ import annotations

import argparse
import contextlib
import sys
import warnings
from pathlib import Path

from . import analysis, experiments
from .config import ConfigError, parse_config, serialize_config
from .dynamics import DivergenceError, UnstableConfigError
from .io import dumps_report, read_snapshot, write_snapshot, write_svg_scatter, write_text
from .stability import stability_report

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="langlattice", description="Lattice language-evolution simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate a config and write snapshots and reports")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("stability", help="print the stability report of a config")
    p.add_argument("--config", required=True, type=Path)

    p = sub.add_parser("analyze", help="cluster a snapshot file")
    p.add_argument("--snapshot", required=True, type=Path)
    p.add_argument("--eps", type=float, default=analysis.DEFAULT_EPS)
    p.add_argument("--min-pts", type=int, default=analysis.DEFAULT_MIN_PTS)

    p = sub.add_parser("experiment", help="run a named preset")
    p.add_argument("--name", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("render", help="render a snapshot file as an SVG scatter plot")
    p.add_argument("--snapshot", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--axes", default="0,1", help="two state indices, e.g. 0,1")
    return parser


def _load_config(path: Path, seed=None):
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    with _relayed_warnings():
        cfg = parse_config(text)
    if seed is not None:
        cfg = cfg.with_(seed=seed)
    return cfg


def write_run(result: experiments.RunResult, out: Path) -> None:
    """Snapshots, config, stability and cluster reports, final scatter plot."""
    topo = result.topology
    write_text(out / "config.txt", serialize_config(result.config))
    write_text(out / "stability.json", dumps_report(result.stability.to_dict()))
    clusters = (result.clusters.to_dict() if result.clusters is not None
                else {"error": result.cluster_error})
    write_text(out / "clusters.json", dumps_report(clusters))
    for snap in result.trajectory.snapshots:
        write_snapshot(snap, topo, out / "snapshots" / f"step_{snap.step:06d}.csv")
    write_svg_scatter(result.trajectory.final, topo, out / "final.svg")


@contextlib.contextmanager
def _relayed_warnings():
    """Print captured warnings to stderr, also when the body raises."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            yield
        finally:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)


def cmd_run(args) -> int:
    cfg = _load_config(args.config, args.seed)
    with _relayed_warnings():
        result = experiments.execute(cfg, label="run")
    write_run(result, args.out)
    print(dumps_report(result.to_dict()), end="")
    return EXIT_OK


def cmd_stability(args) -> int:
    cfg = _load_config(args.config)
    print(dumps_report(stability_report(cfg).to_dict()), end="")
    return EXIT_OK


def cmd_analyze(args) -> int:
    snap, topo = read_snapshot(args.snapshot)
    rep = analysis.analyze_snapshot(snap, topo, args.eps, args.min_pts)
    print(dumps_report(rep.to_dict()), end="")
    return EXIT_OK


def cmd_experiment(args) -> int:
    with _relayed_warnings():
        report = experiments.run_named(args.name, args.seed)
    if len(report.runs) == 1:
        write_run(report.runs[0], args.out)
    else:
        for r in report.runs:
            write_run(r, args.out / r.label.replace("=", ""))
    text = dumps_report(report.to_dict())
    write_text(args.out / "experiment.json", text)
    print(text, end="")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        axes = tuple(int(v) for v in args.axes.split(","))
    except ValueError:
        raise UsageError(f"--axes expects two integers, got {args.axes!r}") from None
    snap, topo = read_snapshot(args.snapshot)
    write_svg_scatter(snap, topo, args.out, axes)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "stability": cmd_stability,
    "analyze": cmd_analyze,
    "experiment": cmd_experiment,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, UnstableConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
