"""Post-solve audits shared by every scheme: power, rate, sampled leakage, radii."""

from __future__ import annotations

import numpy as np

from .metrics import all_rates, total_power
from .sensing import stage2_covariance
from .uncertainty import per_bs_radii, worst_case_leakage_oracle

RATE_TOL = 1e-3
LEAK_TOL = 1e-3
POWER_TOL = 1e-9  # watts


def audit_radii(sol, scn):
    """Per-BS CSI radii ``(2, M)`` implied by the stage-1 design (inf if Q2 singular)."""
    Q2 = stage2_covariance(sol, scn)
    beta1 = per_bs_radii(scn, scn.Q1)
    beta2 = np.full(scn.M, np.inf) if Q2 is None else per_bs_radii(scn, Q2)
    return np.stack([beta1, beta2]), Q2


def worst_case_leakage(sol, scn, stacked, n_samples=10_000, seed=0, refine=True):
    """Sampled worst-case ``sum_i tau_i log2(1 + leakage)`` per user, shape (M, K)."""
    beta, _ = audit_radii(sol, scn)
    out = np.zeros((scn.M, scn.K))
    if not np.all(np.isfinite(beta)):
        out[:] = np.inf
        return out
    g_bar = scn.channels.g_bar
    for m in range(scn.M):
        for k in range(scn.K):
            total = 0.0
            for i in range(2):
                radius = float(np.sqrt(np.sum(beta[i] ** 2))) if stacked else beta[i]
                total += scn.tau[i] * worst_case_leakage_oracle(
                    sol, g_bar, radius, i, m, k, n_samples, scn, seed=seed + 7 * i, refine=refine)
            out[m, k] = total
    return out


def audit_solution(sol, scn, n_samples=10_000, refine=True, stacked=None):
    """Check C1 (power), C2 (rate) and sampled C3 (leakage) on ``sol``.

    ``stacked`` selects the CSI error set the design was certified for; by
    default it is read from ``sol.extras['robust_set']``.
    """
    if stacked is None:
        stacked = sol.extras.get("robust_set", "stacked") == "stacked"
    _, per_bs = total_power(sol, scn)
    rates = all_rates(sol, scn)
    leak = worst_case_leakage(sol, scn, stacked, n_samples=n_samples, refine=refine)
    cfg = scn.config
    return {
        "per_bs_power": per_bs,
        "rates": rates,
        "worst_leakage": leak,
        "power_ok": bool(np.all(per_bs <= scn.p_max + POWER_TOL)),
        "rate_ok": bool(np.all(rates >= cfg.R_info - RATE_TOL)),
        "leak_ok": bool(np.all(leak <= cfg.R_leak + LEAK_TOL)),
        "min_rate_margin": float(rates.min() - cfg.R_info),
        "max_leak_excess": float(leak.max() - cfg.R_leak),
    }
