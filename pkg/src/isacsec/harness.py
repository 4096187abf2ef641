"""Experiment runner: sweeps schemes over a grid and seeds, writes CSV and traces."""

from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .audit import audit_solution
from .baselines import run_baseline1, run_baseline2
from .central import BcdOptions, run_algorithm1
from .decentral import AdmmOptions, run_algorithm2
from .errors import InvalidArgument, IsacError
from .metrics import BeamformingSolution, total_power
from .scenario import GeometrySpec, SystemConfig, build_scenario, load_config, watts_to_dbm

log = logging.getLogger(__name__)

SCHEMES = ("central", "decentral", "baseline1", "baseline2")
SWEEPS = ("R_info", "P_max", "mse_target", "N")
DEFAULT_MSE_TARGET = 0.1  # m^2, fixed sensing requirement of baseline 2

COLUMNS = (
    "scheme", "sweep", "point", "seed", "status", "total_power_W", "total_power_dBm",
    "per_bs_power_W", "trace_Q2", "iterations", "converged", "power_ok", "rate_ok", "leak_ok",
    "min_rate_margin", "max_leak_excess", "eigen_ratio_min", "recovery", "history_W",
    "solution_file", "error", "wall_time",
)


@dataclass(frozen=True)
class ExperimentSpec:
    schemes: tuple
    sweep: str
    grid: tuple
    seeds: int = 1
    out_dir: str = "results"
    config_path: str | None = None
    full: bool = False
    mse_target: float = DEFAULT_MSE_TARGET
    workers: int = 1
    audit_samples: int = 10_000
    max_iter: int = 50
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "grid", tuple(float(x) for x in self.grid))
        self.validate()

    def validate(self):
        if not self.schemes:
            raise InvalidArgument("at least one scheme is required")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise InvalidArgument(f"unknown schemes {bad}; choose from {SCHEMES}")
        if self.sweep not in SWEEPS:
            raise InvalidArgument(f"sweep must be one of {SWEEPS}")
        if not self.grid:
            raise InvalidArgument("grid must not be empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise InvalidArgument("grid must be strictly increasing")
        if self.seeds < 1:
            raise InvalidArgument("seeds must be >= 1")
        if self.sweep == "N" and any(x != int(x) or x < 1 for x in self.grid):
            raise InvalidArgument("N grid must hold positive integers")

    def base_config(self):
        if self.config_path is not None:
            config, geometry = load_config(self.config_path)
        else:
            config = SystemConfig.paper() if self.full else SystemConfig.desk()
            geometry = GeometrySpec.paper(config.M)
        if self.overrides:
            config = replace(config, **self.overrides)
        return config, geometry


@dataclass
class ResultTable:
    rows: list

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return [r[name] for r in self.rows]

    def select(self, **match):
        return ResultTable([r for r in self.rows if all(r[k] == v for k, v in match.items())])

    def write_csv(self, path, include_wall_time=True):
        cols = [c for c in COLUMNS if include_wall_time or c != "wall_time"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({c: _fmt(row.get(c)) for c in cols})

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = [dict(r) for r in csv.DictReader(fh)]
        for r in rows:
            for k in ("point", "total_power_W", "total_power_dBm", "trace_Q2", "min_rate_margin",
                      "max_leak_excess", "eigen_ratio_min", "wall_time"):
                if k in r:
                    r[k] = float(r[k]) if r[k] not in ("", "None") else np.nan
            for k in ("seed", "iterations"):
                if k in r and r[k] not in ("", "None"):
                    r[k] = int(r[k])
            for k in ("converged", "power_ok", "rate_ok", "leak_ok"):
                if k in r:
                    r[k] = r[k] == "True"
        return cls(rows)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return "" if v is None else str(v)


def point_config(base: SystemConfig, sweep, point, seed):
    kw = {"rng_seed": int(seed)}
    if sweep == "R_info":
        kw["R_info"] = float(point)
    elif sweep == "P_max":
        kw["P_max"] = float(point)
    elif sweep == "N":
        kw["N"] = int(point)
    return replace(base, **kw)


def _tag(scheme, point, seed):
    return f"{scheme}_{point:g}_{seed}"


def run_one(task):
    """Run one (scheme, point, seed) cell; never raises for scheme failures."""
    spec, scheme, point, seed = task
    base, geometry = spec.base_config()
    config = point_config(base, spec.sweep, point, seed)
    out = Path(spec.out_dir)
    tag = _tag(scheme, point, seed)
    row = {"scheme": scheme, "sweep": spec.sweep, "point": float(point), "seed": int(seed)}
    t0 = time.perf_counter()
    try:
        scn = build_scenario(config, geometry)
        trace = str(out / f"trace_{tag}.jsonl")
        mse = point if spec.sweep == "mse_target" else spec.mse_target
        if scheme == "central":
            _, sol = run_algorithm1(scn, max_iter=spec.max_iter, options=BcdOptions(trace_path=trace))
        elif scheme == "decentral":
            opts = AdmmOptions(trace_path=trace, message_path=str(out / f"messages_{tag}.jsonl"))
            _, sol = run_algorithm2(scn, max_iter=spec.max_iter, options=opts)
        elif scheme == "baseline1":
            opts = BcdOptions(trace_path=trace)
            opts.max_iter = spec.max_iter
            _, sol = run_baseline1(scn, options=opts)
        else:
            opts = AdmmOptions(trace_path=trace, message_path=str(out / f"messages_{tag}.jsonl"))
            opts.max_iter = spec.max_iter
            _, sol = run_baseline2(scn, mse, options=opts)
        report = audit_solution(sol, scn, n_samples=spec.audit_samples)
        sol_file = f"solution_{tag}.npz"
        save_solution(out / sol_file, sol)
        total, per_bs = total_power(sol, scn)
        row.update(
            status="ok", total_power_W=total, total_power_dBm=float(watts_to_dbm(total)),
            per_bs_power_W=[float(p) for p in per_bs], trace_Q2=float(sol.extras["trace_Q2"]),
            iterations=int(sol.extras["iterations"]), converged=bool(sol.extras["converged"]),
            power_ok=report["power_ok"], rate_ok=report["rate_ok"], leak_ok=report["leak_ok"],
            min_rate_margin=report["min_rate_margin"], max_leak_excess=report["max_leak_excess"],
            eigen_ratio_min=float(sol.extras.get("eigen_ratio_min", np.nan)),
            recovery=sol.extras.get("recovery", sol.extras.get("recovery_error", "")),
            history_W=[float(x) for x in sol.extras["history_W"]], solution_file=sol_file, error="",
        )
    except (IsacError, ValueError, np.linalg.LinAlgError) as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}", power_ok=False,
                   rate_ok=False, leak_ok=False, converged=False)
    row["wall_time"] = time.perf_counter() - t0
    return row


def save_solution(path, sol: BeamformingSolution):
    np.savez(path, W=sol.W, R=sol.R, robust_set=sol.extras.get("robust_set", "stacked"))


def load_solution(path):
    with np.load(path) as data:
        sol = BeamformingSolution(W=data["W"], R=data["R"])
        sol.extras["robust_set"] = str(data["robust_set"])
    return sol


def reaudit_row(spec: ExperimentSpec, row):
    """Recompute audit flags for a stored row from its serialized solution."""
    base, geometry = spec.base_config()
    scn = build_scenario(point_config(base, spec.sweep, row["point"], row["seed"]), geometry)
    sol = load_solution(Path(spec.out_dir) / row["solution_file"])
    rep = audit_solution(sol, scn, n_samples=spec.audit_samples)
    return {k: rep[k] for k in ("power_ok", "rate_ok", "leak_ok")}


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Run every (scheme, grid point, seed) cell; write ``results.csv``."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base, _ = spec.base_config()
    tasks = [(spec, s, p, base.rng_seed + k) for s in spec.schemes for p in spec.grid for k in range(spec.seeds)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(run_one, tasks))
    else:
        rows = [run_one(t) for t in tasks]
    order = {s: i for i, s in enumerate(spec.schemes)}
    rows.sort(key=lambda r: (order[r["scheme"]], r["point"], r["seed"]))
    failed = [r for r in rows if r["status"] != "ok"]
    if failed:
        warnings.warn(f"{len(failed)} of {len(rows)} runs failed; see the error column", RuntimeWarning)
    table = ResultTable(rows)
    table.write_csv(out / "results.csv")
    return table
