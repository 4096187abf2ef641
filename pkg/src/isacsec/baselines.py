"""Comparison schemes: separated two-stage design and fixed sensing performance."""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from . import model as mdl
from .central import (
    BcdOptions,
    interference_expr,
    run_algorithm1,
    signal_expr,
    stacked_lmi,
    stage_sinr_targets,
    trace_q,
)
from .decentral import AdmmOptions, run_algorithm2
from .errors import InvalidArgument, ScenarioInfeasible, SolverFailure
from .metrics import sinr_user

SCHEMES = ("separated_two_stage", "fixed_sensing")


@dataclass(frozen=True)
class BaselineConfig:
    scheme: str
    fixed_mse_target: float | None = None
    stage1_power_policy: float = 1.0  # fraction of P_max available to stage 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidArgument(f"unknown baseline {self.scheme!r}")
        if self.scheme == "fixed_sensing" and not (self.fixed_mse_target or 0) > 0:
            raise InvalidArgument("fixed_mse_target must be positive for the fixed-sensing baseline")
        if not 0 < self.stage1_power_policy <= 1:
            raise InvalidArgument("stage1_power_policy must lie in (0, 1]")


class _Stage1:
    """Stage-1 covariances as cvxpy variables, with a minimal interface for the helpers."""

    def __init__(self, nm):
        M, K, N = nm.M, nm.K, nm.N
        self.W = [[[None] * K for _ in range(M)]]
        self.R = [[None] * M]
        self.constraints = []
        for m in range(M):
            X, c = mdl.hermitian_psd(N)
            self.R[0][m] = X
            self.constraints.append(c)
            for k in range(K):
                X, c = mdl.hermitian_psd(N)
                self.W[0][m][k] = X
                self.constraints.append(c)

    def S(self, m):
        return sum(self.W[0][m]) + self.R[0][m]


def best_sensing_stage1(nm, power_fraction=1.0, solver=None, gamma=None):
    """Stage 1 that minimizes the location CRB trace under the stage-1 QoS.

    Each BS may spend ``power_fraction * P_max`` on stage 1; every user meets
    the stage-1 SINR target ``gamma`` (default: the full-rate target) and the
    stage-1 leakage stays below the cap.  Returns ``(W1, R1)`` in solver units.
    """
    M, K = nm.M, nm.K
    gamma = nm.gamma_info if gamma is None else gamma
    cov = _Stage1(nm)
    eta = cp.Variable((M, K), nonneg=True)
    cons = list(cov.constraints)
    r2 = float(np.sum(nm.beta1**2))
    for m in range(M):
        cons.append(cp.real(cp.trace(cov.S(m))) <= power_fraction * nm.p_max)
        for k in range(K):
            cons.append(signal_expr(nm, cov, 0, m, k) >= gamma * interference_expr(nm, cov, 0, m, k))
            if nm.secrecy:
                cons.append(stacked_lmi(nm, cov.W[0][m][k], cov.R[0], m, nm.xi_cap, eta[m, k], r2))
    F = mdl.fim_expr(nm.fim_coef, [cov.S(m) for m in range(M)])
    T, lmi = mdl.trace_inverse_epigraph(F, nm.prior)
    cons.append(lmi)
    prob = cp.Problem(cp.Minimize(cp.trace(T)), cons)
    try:
        mdl.solve(prob, "baseline1_stage1", solver)
    except SolverFailure as exc:
        raise ScenarioInfeasible(f"stage-1 sensing design infeasible: {exc}") from exc
    W1 = np.array([[cov.W[0][m][k].value for k in range(K)] for m in range(M)])
    R1 = np.array([cov.R[0][m].value for m in range(M)])
    return W1, R1


def run_baseline1(scn, options: BcdOptions | None = None, power_fraction=1.0):
    """Separated design: best-sensing stage 1, then a secure stage 2 for the achieved radius."""
    options = options or BcdOptions()
    nm = mdl.normalize(scn, options.p_unit)
    # stage-1 SINR targets tried in turn, shifting rate to stage 2 when needed
    for gamma1 in (g[0, 0, 0] for g in stage_sinr_targets(nm)):
        try:
            W1, R1 = best_sensing_stage1(nm, power_fraction, options.solver, gamma=gamma1)
            break
        except ScenarioInfeasible as exc:
            last = exc
    else:
        raise last
    tr_q = trace_q(nm, W1.sum(axis=1) + R1)
    if not np.isfinite(tr_q):
        raise ScenarioInfeasible("stage-1 design leaves the location unobservable")
    delta = nm.radius_from_trace(tr_q)
    # stage-2 SINR targets: what is left of the rate requirement after stage 1
    probe = nm.to_watts(np.stack([W1, np.zeros_like(W1)]), np.stack([R1, np.zeros_like(R1)]))
    gamma = np.zeros((2, nm.M, nm.K))
    for m in range(nm.M):
        for k in range(nm.K):
            r1 = np.log2(1.0 + sinr_user(probe, scn, 0, m, k))
            need = (nm.R_info - nm.tau[0] * r1) / nm.tau[1]
            gamma[:, m, k] = max(2.0**need - 1.0, 0.0)
    try:
        state, sol = run_algorithm1(scn, options.eps, options.max_iter, options,
                                    frozen_stage1=(W1, R1), fixed_delta=delta, gamma=gamma)
    except ScenarioInfeasible as exc:
        raise ScenarioInfeasible(f"stage 2 infeasible for the stage-1 radius: {exc}") from exc
    sol.extras.update(scheme="baseline1", stage1_trace_Q=tr_q)
    return state, sol


def run_baseline2(scn, mse_target, options: AdmmOptions | None = None):
    """Fixed sensing performance: decentralized design with ``tr(Q) <= mse_target``."""
    if not mse_target > 0:
        raise InvalidArgument("mse_target must be positive")
    state, sol = run_algorithm2(scn, options=options, fixed_mse=float(mse_target))
    sol.extras.update(scheme="baseline2", mse_target=float(mse_target))
    return state, sol


def mse_grid(adaptive_mse, n=12, low=0.1, high=10.0):
    """Log-spaced MSE targets bracketing the adaptive operating point."""
    if not adaptive_mse > 0:
        raise InvalidArgument("adaptive_mse must be positive")
    return np.geomspace(low * adaptive_mse, high * adaptive_mse, n)


def sweep_baseline2(scn, grid, options_factory=AdmmOptions):
    """Total power (W) per MSE target; infeasible targets give ``inf``."""
    out = []
    for mse in grid:
        try:
            _, sol = run_baseline2(scn, mse, options_factory())
            out.append(float(sol.extras["history_W"][-1]))
        except ScenarioInfeasible:
            out.append(np.inf)
    return np.array(out)
