"""Entry point of the ``bvlab`` command.

Exit status: 0 when every asserted check passes, 1 when a check fails,
2 on usage errors and 3 when the grid is too coarse for a requested scale.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from ..errors import BVLabError, InvalidArgument, ResolutionInsufficient
from ..flow import CutProblem, enumerate_oracle, min_cut
from ..grid import CellSet, build_grid
from .config import DEFAULTS, DESCRIPTIONS, load_config
from .experiments import RunReport, run_experiment
from .svg import emit_svg

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOLUTION = 0, 1, 2, 3

REPORT_COLUMNS = ("check_name", "scale", "lhs", "rhs", "tolerance", "status")


def _num(v: float) -> str:
    return repr(float(v))


def write_report(report: RunReport, out: Path) -> list[Path]:
    """Write report.csv, profile CSVs, SVGs and the resolved config to ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "report.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([r.check_name, _num(r.scale), _num(r.lhs), _num(r.rhs),
                        _num(r.tolerance), r.status])
    written.append(path)
    for name, rows in sorted(report.profiles.items()):
        path = out / f"profile_{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("index", "radius", "value"))
            for i, r, v in rows:
                w.writerow([i, _num(r), _num(v)])
        written.append(path)
    for name, (space, layers, bbox) in sorted(report.pictures.items()):
        written.append(emit_svg(space, layers, out / f"{name}.svg", bbox))
    path = out / "config_used.ini"
    path.write_text(report.config.to_ini(), encoding="utf-8")
    written.append(path)
    report.artifacts = [str(p) for p in written]
    return written


def _help_epilog() -> str:
    lines = ["config keys per experiment (section.key = default):"]
    for name in sorted(DEFAULTS):
        lines.append(f"  {name}:")
        for section in ("space", "params"):
            for key, val in DEFAULTS[name][section].items():
                lines.append(f"    {section}.{key} = {val}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvlab",
        description="Discrete 1-potential theory experiments on weighted grids.",
        epilog=_help_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from an INI config",
                         epilog=_help_epilog(),
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("--config", help="INI file with [experiment], [space], [params]")
    run.add_argument("--out", default="bvlab_out", help="output directory")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override section.key (params by default)")
    sub.add_parser("list", help="list the available experiments")
    oracle = sub.add_parser("oracle", help="cross-check min-cut against brute force")
    oracle.add_argument("--grid", default="3x3", help="grid size NxN (N >= 3)")
    oracle.add_argument("--cases", type=int, default=200)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--max-free", type=int, default=16)
    return parser


def cmd_list() -> int:
    for name in sorted(DESCRIPTIONS):
        print(f"{name:16s} {DESCRIPTIONS[name]}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        parts = args.grid.lower().split("x")
        if len(parts) != 2 or parts[0] != parts[1]:
            raise ValueError
        n = int(parts[0])
    except ValueError:
        print(f"bvlab: --grid must look like 3x3, got {args.grid!r}", file=sys.stderr)
        return EXIT_USAGE
    space = build_grid(2, 1.0, n)
    rng = np.random.default_rng(args.seed)
    mismatches = 0
    done = 0
    while done < args.cases:
        labels = rng.integers(0, 3, size=space.n_cells)
        if (labels == 2).sum() > args.max_free:
            continue
        prob = CutProblem(CellSet(space, labels == 0), CellSet(space, labels == 1),
                          CellSet(space, labels == 2))
        a, b = min_cut(prob), enumerate_oracle(prob)
        if abs(a.value - b.value) > 1e-12 * max(1.0, b.value) or a.set != b.set:
            mismatches += 1
        done += 1
    print(f"grid {n}x{n}: {done} cases, {mismatches} mismatches")
    return EXIT_OK if mismatches == 0 else EXIT_FAIL


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.overrides)
    except InvalidArgument as exc:
        print(f"bvlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        report = run_experiment(cfg)
    except ResolutionInsufficient as exc:
        print(f"bvlab: resolution insufficient: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except InvalidArgument as exc:
        print(f"bvlab: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BVLabError as exc:
        print(f"bvlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    files = write_report(report, Path(args.out))
    failed = report.failed
    for r in report.rows:
        print(f"{r.status:9s} {r.check_name:32s} scale={r.scale:<10.6g} "
              f"lhs={r.lhs:<14.8g} rhs={r.rhs:<14.8g}")
    print(f"{cfg.experiment}: {len(report.rows)} rows, {len(failed)} failed, "
          f"{time.perf_counter() - t0:.1f}s; wrote {len(files)} files to {args.out}")
    return EXIT_OK if not failed else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.command == "list":
        return cmd_list()
    if args.command == "oracle":
        return cmd_oracle(args)
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
