"""``isac-run`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import InvalidArgument
from .harness import SCHEMES, SWEEPS, ExperimentSpec, run_experiment
from .plots import plot_results

PLOT_FOR_SWEEP = {"R_info": "power_vs_rate", "P_max": "power_vs_pmax", "mse_target": "power_vs_mse",
                  "N": "convergence"}


def build_parser():
    p = argparse.ArgumentParser(prog="isac-run", description="Run secure ISAC beamforming experiments.")
    p.add_argument("--config", help="scenario config (JSON); defaults to the desk-scale setup")
    p.add_argument("--scheme", required=True,
                   help=f"comma-separated subset of {','.join(SCHEMES)}")
    p.add_argument("--sweep", required=True, choices=SWEEPS)
    p.add_argument("--grid", required=True, help="comma-separated, strictly increasing values")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", default="results")
    p.add_argument("--full", action="store_true", help="full-scale defaults (M=3, N=4, L=1024)")
    p.add_argument("--mse-target", type=float, default=None, help="baseline-2 MSE target (m^2)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--audit-samples", type=int, default=10_000)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--no-plot", action="store_true")
    return p


def spec_from_args(args):
    grid = [float(x) for x in args.grid.split(",") if x.strip()]
    kw = {}
    if args.mse_target is not None:
        kw["mse_target"] = args.mse_target
    spec = ExperimentSpec(
        schemes=tuple(s.strip() for s in args.scheme.split(",") if s.strip()), sweep=args.sweep,
        grid=tuple(grid), seeds=args.seeds, out_dir=args.out, config_path=args.config, full=args.full,
        workers=args.workers, audit_samples=args.audit_samples, max_iter=args.max_iter, **kw)
    spec.base_config()  # surface config errors before any solve
    return spec


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
    except (InvalidArgument, KeyError, ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"isac-run: configuration error: {exc}", file=sys.stderr)
        return 2
    table = run_experiment(spec)
    ok = sum(r["status"] == "ok" for r in table.rows)
    print(f"{ok}/{len(table)} runs succeeded; results in {spec.out_dir}/results.csv")
    if not args.no_plot and ok:
        kinds = [PLOT_FOR_SWEEP[spec.sweep]]
        if spec.sweep == "R_info":
            kinds.append("mse_vs_rate")
        for kind in kinds:
            png, _ = plot_results(table, kind, spec.out_dir)
            print(f"wrote {png}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
