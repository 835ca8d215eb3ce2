"""Command-line driver.

Examples::

    unfitted-oseen --k 3 --nc 16 --out runs/k3
    unfitted-oseen --k 3 --nc 16 32 --out runs/eoc      # convergence study
    unfitted-oseen --case tracking-only --k 3 --nc 32 --T 1.5 --snapshots 0 0.5 1 1.5

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .cases import CASES
from .harness import convergence_study, write_artifacts
from .solver import RunConfig, run

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unfitted-oseen", description="High-order unfitted FEM for moving-interface Oseen flow.")
    p.add_argument("--k", type=int, required=True, choices=(2, 3, 4), help="velocity degree / time order")
    p.add_argument("--nc", type=int, nargs="+", default=[16],
                   help="cells per side; several values (a halving sequence) run a convergence study")
    p.add_argument("--T", type=float, default=1.5, help="final time")
    p.add_argument("--gamma0", type=float, default=1.0e3)
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--case", default="manufactured", choices=sorted(CASES))
    p.add_argument("--out", default=None, help="output directory for artefacts")
    p.add_argument("--snapshots", type=float, nargs="*", default=None, help="times of interface snapshots")
    p.add_argument("--quad-order", type=int, default=None, help="Gauss points per direction on cut-cell pieces")
    p.add_argument("--seed", type=int, default=0, help="recorded for provenance (the method is deterministic)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    snaps = args.snapshots
    if snaps is None:
        snaps = [t for t in (0.0, 0.5, 1.0, 1.5) if t <= args.T] if args.case == "tracking-only" else []
    if any(s < 0 or s > args.T + 1e-12 for s in snaps):
        parser.print_usage(sys.stderr)
        print("error: snapshot times must lie in [0, T]", file=sys.stderr)
        return EXIT_USAGE
    if args.quad_order is not None and args.quad_order < 1:
        parser.print_usage(sys.stderr)
        print("error: --quad-order must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        base = RunConfig(k=args.k, nc=args.nc[0], T=args.T, gamma0=args.gamma0, gamma1=args.gamma1, case=args.case,
                         quad_order=args.quad_order, seed=args.seed, snapshot_times=tuple(snaps))
        base.params  # validates the penalties
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if len(args.nc) > 1:
        if args.case == "tracking-only":
            parser.print_usage(sys.stderr)
            print("error: convergence studies need a flow case", file=sys.stderr)
            return EXIT_USAGE
        try:
            table, results = convergence_study(base, args.nc)
        except ValueError as exc:
            parser.print_usage(sys.stderr)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(table.format())
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            table.to_csv(os.path.join(args.out, "eoc.csv"))
            with open(os.path.join(args.out, "eoc.txt"), "w") as fh:
                fh.write(table.format() + "\n")
            for nc, res in zip(args.nc, results):
                write_artifacts(res, os.path.join(args.out, f"nc{nc}"))
        return EXIT_OK if all(r.errors is not None for r in table.rows) else EXIT_FAILURE

    result = run(base)
    if args.out:
        for path in write_artifacts(result, args.out):
            print(f"wrote {path}")
    if result.status != "ok":
        print(f"run failed: {result.failure}", file=sys.stderr)
        return EXIT_FAILURE
    if result.errors:
        print(f"config {result.config_hash}  k={args.k} nc={base.nc} T={base.T}")
        for key, val in result.errors.items():
            print(f"  {key} = {val:.4e}")
    else:
        print(f"config {result.config_hash}  tracked {len(result.diagnostics) - 1} steps")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
