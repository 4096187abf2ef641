"""Figure-style plots of harness results; every image ships its CSV sidecar."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InvalidArgument  # noqa: E402
from .scenario import watts_to_dbm  # noqa: E402

KINDS = {
    # kind: (x column, y column, y label)
    "power_vs_rate": ("point", "total_power_W", "Total power (dBm)"),
    "power_vs_pmax": ("point", "total_power_W", "Total power (dBm)"),
    "power_vs_mse": ("point", "total_power_W", "Total power (dBm)"),
    "mse_vs_rate": ("point", "trace_Q2", "tr(Q2) (m^2)"),
    "convergence": ("iteration", "history_W", "Total power (dBm)"),
}


def _rows(table):
    return table.rows if hasattr(table, "rows") else list(table)


def summarize(table, x="point", y="total_power_W"):
    """Mean and std across seeds per (scheme, x); failed / infinite runs are skipped."""
    groups = {}
    for r in _rows(table):
        if r.get("status", "ok") != "ok":
            continue
        v = float(r[y])
        if not np.isfinite(v):
            continue
        groups.setdefault((r["scheme"], float(r[x])), []).append(v)
    out = []
    for (scheme, xv), vals in sorted(groups.items()):
        out.append({"scheme": scheme, "x": xv, "mean": float(np.mean(vals)),
                    "std": float(np.std(vals)), "n": len(vals)})
    return out


def _convergence_series(table):
    out = []
    for r in _rows(table):
        if r.get("status", "ok") != "ok":
            continue
        hist = r["history_W"]
        if isinstance(hist, str):
            import json

            hist = json.loads(hist)
        for it, v in enumerate(hist):
            out.append({"scheme": r["scheme"], "label": f"{r['scheme']} {r['sweep']}={r['point']:g}",
                        "seed": r["seed"], "iteration": it, "value": float(v)})
    return out


def plot_results(table, kind, out_dir, name=None):
    """Write ``<name>.png`` and ``<name>.csv``; return both paths."""
    if kind not in KINDS:
        raise InvalidArgument(f"unknown plot kind {kind!r}; choose from {sorted(KINDS)}")
    rows = _rows(table)
    if not rows:
        raise InvalidArgument("table is empty")
    x, y, ylabel = KINDS[kind]
    need = {"scheme", "status", "point"} | ({"history_W", "sweep", "seed"} if kind == "convergence" else {y})
    missing = need - set(rows[0])
    if missing:
        raise InvalidArgument(f"table is missing columns {sorted(missing)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = name or kind
    png, sidecar = out_dir / f"{name}.png", out_dir / f"{name}.csv"
    fig, ax = plt.subplots(figsize=(5, 3.6))
    if kind == "convergence":
        series = _convergence_series(rows)
        with open(sidecar, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["scheme", "label", "seed", "iteration", "value"], lineterminator="\n")
            w.writeheader()
            w.writerows(series)
        for label in sorted({s["label"] for s in series}):
            pts = [s for s in series if s["label"] == label and s["seed"] == min(
                q["seed"] for q in series if q["label"] == label)]
            ax.plot([p["iteration"] for p in pts], watts_to_dbm([p["value"] for p in pts]), marker="o",
                    ms=3, label=label)
        ax.set_xlabel("Iteration")
    else:
        stats = summarize(rows, x, y)
        with open(sidecar, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["scheme", "x", "mean", "std", "n"], lineterminator="\n")
            w.writeheader()
            w.writerows(stats)
        for scheme in sorted({s["scheme"] for s in stats}):
            pts = [s for s in stats if s["scheme"] == scheme]
            xs = np.array([p["x"] for p in pts])
            mean = np.array([p["mean"] for p in pts])
            std = np.array([p["std"] for p in pts])
            if y == "total_power_W":
                lo, hi = watts_to_dbm(np.maximum(mean - std, 1e-30)), watts_to_dbm(mean + std)
                mean = watts_to_dbm(mean)
                yerr = np.vstack([mean - lo, hi - mean])
            else:
                yerr = std
            ax.errorbar(xs, mean, yerr=yerr, marker="o", ms=4, capsize=3, label=scheme)
        if kind == "power_vs_mse":
            ax.set_xscale("log")
        ax.set_xlabel(rows[0].get("sweep", "point"))
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return png, sidecar
