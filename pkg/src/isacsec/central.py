"""Centralized block-coordinate design (Algorithm 1) on the relaxed SDP.

Block 1 optimizes the covariances and the radius auxiliaries with the
leakage auxiliaries frozen; block 2 re-certifies the leakage auxiliaries for
the new covariances.  Every SCA term is re-expanded at the previous iterate,
so the objective trace is non-increasing.

All optimization runs on :class:`~isacsec.model.NormalizedModel` data; the
returned :class:`~isacsec.metrics.BeamformingSolution` is in watts.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import model as mdl
from .errors import (
    InvalidExpansionPoint,
    RankOneRecoveryFailed,
    ScenarioInfeasible,
    SolverFailure,
)
from .metrics import BeamformingSolution, total_power
from .sensing import fim_from_coefficients
from .surrogates import LN2, interference_term

STAGES = (0, 1)
OBJ_FLOOR = 1e-6  # solver units; below this the relative-change test is absolute


@dataclass
class BcdOptions:
    eps: float = 1e-3
    max_iter: int = 50
    max_restarts: int = 6
    max_failures: int = 3
    solver: str | None = None
    p_unit: float = 1e-3
    trace_path: str | None = None
    recover: bool = True


@dataclass
class BcdState:
    """Iterate of Algorithm 1 in solver units (powers in ``p_unit``)."""

    W: np.ndarray  # (2, M, K, N, N)
    R: np.ndarray  # (2, M, N, N)
    delta: np.ndarray  # (M,)
    delta0: float
    xi: np.ndarray  # (2, M, K)
    eta: np.ndarray  # (2, M, K)
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    failures: int = 0
    records: list = field(default_factory=list)

    def copy(self):
        return BcdState(W=self.W.copy(), R=self.R.copy(), delta=self.delta.copy(),
                        delta0=float(self.delta0), xi=self.xi.copy(), eta=self.eta.copy(),
                        history=list(self.history), iterations=self.iterations,
                        converged=self.converged, failures=self.failures, records=list(self.records))


# --- shared expression builders --------------------------------------------------


class _Covariances:
    """Covariance variables; stage 1 may be frozen to constants."""

    def __init__(self, nm, frozen_stage1=None):
        M, K, N = nm.M, nm.K, nm.N
        self.W = [[[None] * K for _ in range(M)] for _ in STAGES]
        self.R = [[None] * M for _ in STAGES]
        self.constraints = []
        self.variables = []
        for i in STAGES:
            for m in range(M):
                if i == 0 and frozen_stage1 is not None:
                    self.R[i][m] = frozen_stage1[1][m]
                    for k in range(K):
                        self.W[i][m][k] = frozen_stage1[0][m, k]
                    continue
                X, c = mdl.hermitian_psd(N)
                self.R[i][m] = X
                self.constraints.append(c)
                self.variables.append(X)
                for k in range(K):
                    X, c = mdl.hermitian_psd(N)
                    self.W[i][m][k] = X
                    self.constraints.append(c)
                    self.variables.append(X)

    def S(self, i, m):
        return sum(self.W[i][m]) + self.R[i][m]

    def value(self):
        def val(x):
            return x.value if isinstance(x, cp.Expression) else np.asarray(x)
        W = np.array([[[val(x) for x in row] for row in stage] for stage in self.W])
        R = np.array([[val(x) for x in stage] for stage in self.R])
        return W, R


def _tr(X):
    return cp.real(cp.trace(X)) if isinstance(X, cp.Expression) else float(np.real(np.trace(X)))


def _q(h, X):
    return mdl.quad(h, X) if isinstance(X, cp.Expression) else float(np.real(np.conj(h) @ X @ h))


def per_bs_power_expr(nm, cov, m):
    return sum(nm.tau[i] * (sum(_tr(W) for W in cov.W[i][m]) + _tr(cov.R[i][m])) for i in STAGES)


def signal_expr(nm, cov, i, m, k):
    return _q(nm.h[m, m, k], cov.W[i][m][k])


def interference_expr(nm, cov, i, m, k):
    """Affine expression for ``Z`` of user ``(m, k)`` (noise normalized to 1)."""
    z = 1.0
    for mp in range(nm.M):
        hv = nm.h[mp, m, k]
        for kp in range(nm.K):
            if mp == m and kp == k:
                continue
            z = z + _q(hv, cov.W[i][mp][kp])
        z = z + _q(hv, cov.R[i][mp])
    return z


def stacked_lmi(nm, Wmk, R_list, m, xi, eta, radius2):
    """Robust leakage LMI over the stacked error ball (cvxpy expression)."""
    M, N = nm.M, nm.N
    n = M * N
    zero = np.zeros((N, N))
    Wbar = cp.bmat([[Wmk if (r == m and c == m) else zero for c in range(M)] for r in range(M)])
    Rbar = cp.bmat([[R_list[r] if r == c else zero for c in range(M)] for r in range(M)])
    gb = nm.g_bar.reshape(-1)
    B = np.hstack([np.eye(n), gb[:, None]])
    E1 = np.diag(np.r_[np.ones(n), 0.0])
    E2 = np.zeros((n + 1, n + 1))
    E2[n, n] = 1.0
    L = eta * E1 + (xi - eta * radius2) * E2 - np.conj(B.T) @ (Wbar - xi * Rbar) @ B
    return mdl.herm(L) >> 0


def _crb_params(nm):
    """Indices of BSs whose radius depends on the location covariance."""
    return [m for m in range(nm.M) if np.isfinite(nm.a[m])]


# --- problems -------------------------------------------------------------------


class CentralProblems:
    """Compiled conic programs shared by all iterations of one run.

    ``frozen_stage1`` pins the stage-1 covariances (a tuple ``(W1, R1)`` in
    solver units); ``fixed_delta`` pins the stage-2 radii and removes the
    CRB coupling (both used by the separated baseline).
    """

    def __init__(self, nm, frozen_stage1=None, fixed_delta=None, mse_cap=None):
        self.nm = nm
        self.frozen = frozen_stage1
        self.fixed_delta = None if fixed_delta is None else np.asarray(fixed_delta, dtype=float)
        self.mse_cap = mse_cap
        self._build_init()
        self._build_block1()
        self._build_block2()

    # -- feasible starting point --

    def _build_init(self):
        nm = self.nm
        M, K = nm.M, nm.K
        cov = _Covariances(nm, self.frozen)
        eta = cp.Variable((2, M * K), nonneg=True)
        self.init_gamma = cp.Parameter((2, M * K), nonneg=True)
        self.init_xi = cp.Parameter((2, M * K), nonneg=True)
        self.init_r2 = cp.Parameter(nonneg=True)
        self.init_tmax = cp.Parameter(nonneg=True)
        self.init_pmax = cp.Parameter(nonneg=True)
        cons = list(cov.constraints)
        for m in range(M):
            cons.append(per_bs_power_expr(nm, cov, m) <= self.init_pmax)
        for i in STAGES:
            if i == 0 and self.frozen is not None:
                continue
            r2 = float(np.sum(nm.beta1**2)) if i == 0 else self.init_r2
            for m in range(M):
                for k in range(K):
                    j = m * K + k
                    cons.append(signal_expr(nm, cov, i, m, k)
                                >= self.init_gamma[i, j] * interference_expr(nm, cov, i, m, k))
                    if nm.secrecy:
                        cons.append(stacked_lmi(nm, cov.W[i][m][k], cov.R[i], m,
                                                self.init_xi[i, j], eta[i, j], r2))
        coupled = self.fixed_delta is None and nm.secrecy and _crb_params(nm)
        if self.frozen is None and (coupled or self.mse_cap is not None):
            F = mdl.fim_expr(nm.fim_coef, [cov.S(0, m) for m in range(M)])
            T, lmi = mdl.trace_inverse_epigraph(F, nm.prior)
            cons += [lmi, cp.trace(T) <= self.init_tmax]
        obj = cp.Minimize(sum(per_bs_power_expr(nm, cov, m) for m in range(M)))
        self.init_problem = cp.Problem(obj, cons)
        self.init_cov, self.init_eta = cov, eta

    def initial_point(self, gamma, xi, delta, p_max, solver=None):
        nm = self.nm
        M, K = nm.M, nm.K
        self.init_gamma.value = np.broadcast_to(gamma, (2, M, K)).reshape(2, -1).copy()
        self.init_xi.value = np.broadcast_to(xi, (2, M, K)).reshape(2, -1).copy()
        self.init_r2.value = float(np.sum(np.asarray(delta) ** 2))
        idx = _crb_params(nm)
        tmax = min((nm.a[m] ** 2 * (delta[m] - nm.b[m]) ** 2 for m in idx), default=0.0)
        self.init_tmax.value = max(tmax, 0.0) if self.mse_cap is None else float(self.mse_cap)
        self.init_pmax.value = p_max
        mdl.solve(self.init_problem, "init", solver)
        W, R = self.init_cov.value()
        return W, R, _value_or_zero(self.init_eta).reshape(2, M, K)

    # -- block 1: covariances and radii --

    def _build_block1(self):
        nm = self.nm
        M, K = nm.M, nm.K
        cov = _Covariances(nm, self.frozen)
        self.b1_xi = cp.Parameter((2, M * K), nonneg=True)
        self.b1_eta = cp.Parameter((2, M * K), nonneg=True)
        self.b1_cz = cp.Parameter((2, M * K), nonneg=True)  # 1 / (ln2 Z0)
        self.b1_y0 = cp.Parameter((2, M * K))  # log2 Z0 - 1/ln2
        self.b1_c1 = cp.Parameter(M, nonneg=True)
        self.b1_c0 = cp.Parameter(M)
        self.b1_pmax = cp.Parameter(nonneg=True)
        delta = cp.Variable(M, nonneg=True)
        delta0 = cp.Variable(nonneg=True)
        cons = list(cov.constraints)
        for m in range(M):
            cons.append(per_bs_power_expr(nm, cov, m) <= self.b1_pmax)
        for m in range(M):
            for k in range(K):
                j = m * K + k
                rate = 0
                for i in STAGES:
                    z = interference_expr(nm, cov, i, m, k)
                    s = signal_expr(nm, cov, i, m, k)
                    if isinstance(s + z, cp.Expression):
                        x = cp.log(s + z) / LN2
                    else:
                        x = float(np.log2(s + z))
                    rate = rate + nm.tau[i] * (x - self.b1_y0[i, j] - self.b1_cz[i, j] * z)
                cons.append(rate >= nm.R_info)
        for i in STAGES:
            if i == 0 and self.frozen is not None:
                continue
            r2 = float(np.sum(nm.beta1**2)) if i == 0 else delta0
            for m in range(M):
                for k in range(K):
                    j = m * K + k
                    if nm.secrecy:
                        cons.append(stacked_lmi(nm, cov.W[i][m][k], cov.R[i], m,
                                                self.b1_xi[i, j], self.b1_eta[i, j], r2))
        cons.append(cp.sum_squares(delta) <= delta0)
        if self.fixed_delta is not None:
            cons.append(delta == self.fixed_delta)
        else:
            # without a secrecy requirement the radius is irrelevant: no CRB coupling
            idx = _crb_params(nm) if nm.secrecy else []
            for m in range(M):
                if m not in idx:
                    cons.append(delta[m] == nm.b[m])
            if idx:
                F = mdl.fim_expr(nm.fim_coef, [cov.S(0, m) for m in range(M)])
                T, lmi = mdl.trace_inverse_epigraph(F, nm.prior)
                cons.append(lmi)
                for m in idx:
                    cons.append(cp.trace(T) <= self.b1_c1[m] * delta[m] - self.b1_c0[m])
        obj = cp.Minimize(sum(per_bs_power_expr(nm, cov, m) for m in range(M)))
        self.block1_problem = cp.Problem(obj, cons)
        self.b1_cov, self.b1_delta, self.b1_delta0 = cov, delta, delta0

    def set_block1_params(self, state, p_max):
        nm = self.nm
        M, K = nm.M, nm.K
        cz = np.zeros((2, M * K))
        y0 = np.zeros((2, M * K))
        for i in STAGES:
            for m in range(M):
                for k in range(K):
                    Z0 = interference_term(state.W[i], state.R[i], nm.h, 1.0, m, k)
                    if not Z0 > 0:
                        raise InvalidExpansionPoint("interference-plus-noise must be positive")
                    cz[i, m * K + k] = 1.0 / (LN2 * Z0)
                    y0[i, m * K + k] = np.log2(Z0) - 1.0 / LN2
        self.b1_cz.value = cz
        self.b1_y0.value = y0
        self.b1_xi.value = state.xi.reshape(2, -1).copy()
        self.b1_eta.value = state.eta.reshape(2, -1).copy()
        c1 = np.zeros(M)
        c0 = np.zeros(M)
        for m in (_crb_params(nm) if nm.secrecy else []):
            d = state.delta[m] - nm.b[m]
            if not d > 0:
                raise InvalidExpansionPoint(f"delta[{m}] must exceed b[{m}]")
            c1[m] = 2.0 * nm.a[m] ** 2 * d
            c0[m] = nm.a[m] ** 2 * d * (state.delta[m] + nm.b[m])
        self.b1_c1.value = c1
        self.b1_c0.value = c0
        self.b1_pmax.value = p_max

    def solve_block1(self, state, p_max, solver=None):
        self.set_block1_params(state, p_max)
        mdl.solve(self.block1_problem, "block1", solver)
        W, R = self.b1_cov.value()
        return W, R, np.asarray(self.b1_delta.value, dtype=float), float(self.b1_delta0.value)

    # -- block 2: leakage auxiliaries --

    def _build_block2(self):
        nm = self.nm
        M, K, N = nm.M, nm.K, nm.N
        self.b2_W = [[[cp.Parameter((N, N), hermitian=True) for _ in range(K)] for _ in range(M)]
                     for _ in STAGES]
        self.b2_R = [[cp.Parameter((N, N), hermitian=True) for _ in range(M)] for _ in STAGES]
        self.b2_r2 = cp.Parameter(nonneg=True)
        self.b2_slope = cp.Parameter((2, M * K), nonneg=True)
        xi = cp.Variable((2, M * K), nonneg=True)
        eta = cp.Variable((2, M * K), nonneg=True)
        cons = []
        for i in STAGES:
            r2 = float(np.sum(nm.beta1**2)) if i == 0 else self.b2_r2
            for m in range(M):
                for k in range(K):
                    j = m * K + k
                    if nm.secrecy:
                        cons.append(stacked_lmi(nm, self.b2_W[i][m][k], self.b2_R[i], m,
                                                xi[i, j], eta[i, j], r2))
        obj = cp.Minimize(cp.sum(cp.multiply(self.b2_slope, xi)))
        self.block2_problem = cp.Problem(obj, cons)
        self.b2_xi, self.b2_eta = xi, eta

    def solve_block2(self, state, solver=None):
        nm = self.nm
        M, K = nm.M, nm.K
        for i in STAGES:
            for m in range(M):
                self.b2_R[i][m].value = mdl_hermitian(state.R[i, m])
                for k in range(K):
                    self.b2_W[i][m][k].value = mdl_hermitian(state.W[i, m, k])
        self.b2_r2.value = max(float(state.delta0), 0.0)
        slope = nm.tau[:, None] / (LN2 * (1.0 + state.xi.reshape(2, -1)))
        self.b2_slope.value = slope
        mdl.solve(self.block2_problem, "block2", solver)
        xi = np.maximum(_value_or_zero(self.b2_xi), 0.0).reshape(2, M, K)
        eta = np.maximum(_value_or_zero(self.b2_eta), 0.0).reshape(2, M, K)
        return xi, eta


def _value_or_zero(var):
    # variables that appear in no constraint (no secrecy requirement) stay unset
    return np.zeros(var.shape) if var.value is None else var.value


def mdl_hermitian(X):
    return 0.5 * (X + np.conj(X.T))


# --- algorithm driver -------------------------------------------------------------


def objective(nm, W, R):
    """Total frame-averaged power in solver units."""
    tr_w = np.real(np.trace(W, axis1=-2, axis2=-1)).sum(axis=2)
    tr_r = np.real(np.trace(R, axis1=-2, axis2=-1))
    return float(np.tensordot(nm.tau, tr_w + tr_r, axes=(0, 0)).sum())


def per_bs_power(nm, W, R):
    tr_w = np.real(np.trace(W, axis1=-2, axis2=-1)).sum(axis=2)
    tr_r = np.real(np.trace(R, axis1=-2, axis2=-1))
    return np.tensordot(nm.tau, tr_w + tr_r, axes=(0, 0))


def trace_q(nm, R1_W1_S):
    """``tr((F + prior)^-1)`` for stage-1 covariances ``S`` (inf if singular)."""
    F = fim_from_coefficients(nm.fim_coef, R1_W1_S) + nm.prior
    try:
        if np.linalg.eigvalsh(F).min() <= 1e-12 * max(1.0, np.abs(F).max()):
            return np.inf
        return float(np.trace(np.linalg.inv(F)))
    except np.linalg.LinAlgError:
        return np.inf


RADIUS_FACTORS = (1.0, 0.7, 0.5, 0.35, 0.25, 2.0)


def delta_schedule(nm, attempt):
    """Stage-2 radius tried by the ``attempt``-th initialization."""
    f = RADIUS_FACTORS[attempt % len(RADIUS_FACTORS)]
    return nm.b + f * (nm.beta1 - nm.b)


def stage_sinr_targets(nm):
    """Per-stage SINR targets tried in turn by the initialization.

    The first asks each stage for the full rate; later ones shift rate to
    stage 2 (``tau_1 r_1 + tau_2 r_2 = R_info``), which helps when the wide
    stage-1 uncertainty ball makes secure stage-1 transmission expensive.
    """
    R = nm.R_info
    tau = nm.tau
    out, seen = [], set()
    for r1 in (R, R - 1.0, 0.5 * R, 0.0):
        r1 = max(r1, 0.0)
        r2 = (R - tau[0] * r1) / tau[1]
        if (r1, r2) in seen:
            continue
        seen.add((r1, r2))
        gamma = np.empty((2, nm.M, nm.K))
        gamma[0], gamma[1] = 2.0**r1 - 1.0, 2.0**r2 - 1.0
        out.append(gamma)
    return out


def cheapest_anchor(problems, nm, options, targets, xi):
    """Lowest-power feasible anchor ``(W, R, eta, delta)`` over the radius schedule.

    Rate splits are tried in order; the first split with any feasible radius
    wins.  The radius is free in the full problem, so the anchor picks the one
    that is cheapest to start from.
    """
    last = None
    n_radii = 1 if problems.fixed_delta is not None else options.max_restarts
    for gamma in targets:
        best = None
        for attempt in range(n_radii):
            delta = delta_schedule(nm, attempt) if problems.fixed_delta is None else problems.fixed_delta
            try:
                W, R, eta = problems.initial_point(gamma, xi, delta, nm.p_max, options.solver)
            except SolverFailure as exc:
                last = exc
                continue
            f = objective(nm, W, R)
            if best is None or f < best[0]:
                best = (f, W, R, eta, np.asarray(delta, dtype=float).copy())
        if best is not None:
            return best[1:]
    raise ScenarioInfeasible(f"no feasible initialization after {len(targets)} rate splits x "
                             f"{n_radii} radii: {last}")


def initialize(problems, nm, options, gamma=None, xi=None):
    """Feasible anchor: per-stage SINR targets, leakage at the cap, radii fixed."""
    targets = stage_sinr_targets(nm) if gamma is None else [gamma]
    xi = nm.xi_cap if xi is None else xi
    W, R, eta, delta = cheapest_anchor(problems, nm, options, targets, xi)
    xi_arr = np.broadcast_to(np.asarray(xi, dtype=float), (2, nm.M, nm.K)).copy()
    return BcdState(W=W, R=R, delta=delta, delta0=float(np.sum(delta**2)), xi=xi_arr, eta=eta)


def _record(nm, state, it, elapsed):
    S1 = state.W[0].sum(axis=1) + state.R[0]
    return {
        "iter": it,
        "objective_W": objective(nm, state.W, state.R) * nm.p_unit,
        "per_bs_power_W": (per_bs_power(nm, state.W, state.R) * nm.p_unit).tolist(),
        "trace_Q": trace_q(nm, S1),
        "xi": state.xi.reshape(-1).tolist(),
        "delta0": float(state.delta0),
        "wall_time": elapsed,
    }


def run_algorithm1(scn, eps1=1e-3, max_iter=50, options: BcdOptions | None = None,
                   frozen_stage1=None, fixed_delta=None, gamma=None, xi_init=None):
    """Run the centralized BCD; return ``(state, solution_in_watts)``."""
    options = options or BcdOptions()
    options.eps, options.max_iter = eps1, max_iter
    nm = mdl.normalize(scn, options.p_unit)
    problems = CentralProblems(nm, frozen_stage1=frozen_stage1, fixed_delta=fixed_delta)
    state = initialize(problems, nm, options, gamma=gamma, xi=xi_init)
    t0 = time.perf_counter()
    # certify the anchor once so block 1 starts from the tightest leakage auxiliaries
    state.xi, state.eta = problems.solve_block2(state, options.solver)
    state.history.append(objective(nm, state.W, state.R))
    state.records.append(_record(nm, state, 0, time.perf_counter() - t0))
    margin = 0
    for it in range(1, max_iter + 1):
        prev = state.copy()
        try:
            W, R, delta, delta0 = problems.solve_block1(state, nm.p_max * (1 - 0.01 * margin),
                                                        options.solver)
            state.W, state.R, state.delta, state.delta0 = W, R, delta, delta0
            state.xi, state.eta = problems.solve_block2(state, options.solver)
        except (SolverFailure, InvalidExpansionPoint):
            state = prev
            state.failures += 1
            margin += 1
            if state.failures >= options.max_failures:
                break
            continue
        f_new = objective(nm, state.W, state.R)
        f_old = state.history[-1]
        state.history.append(f_new)
        state.iterations = it
        state.records.append(_record(nm, state, it, time.perf_counter() - t0))
        if abs(f_new - f_old) <= options.eps * max(f_old, OBJ_FLOOR):
            state.converged = True
            break
    if options.trace_path:
        write_trace(options.trace_path, state.records)
    sol = nm.to_watts(state.W, state.R)
    sol.extras.update(finalize_extras(nm, state, stacked=True))
    if options.recover:
        try:
            sol = recover_solution(sol, scn)
        except RankOneRecoveryFailed as exc:
            sol.extras["recovery_error"] = str(exc)
    return state, sol


def finalize_extras(nm, state, stacked):
    S1 = state.W[0].sum(axis=1) + state.R[0]
    tr_q = trace_q(nm, S1)
    return {
        "scheme": "central" if stacked else "decentral",
        "history_W": [f * nm.p_unit for f in state.history],
        "iterations": state.iterations,
        "converged": state.converged,
        "trace_Q2": tr_q,
        "delta": (np.asarray(state.delta) / nm.g_scale).tolist(),
        "xi": np.asarray(state.xi).tolist(),
        "robust_set": "stacked" if stacked else "per_bs",
    }


def write_trace(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


# --- rank-one recovery --------------------------------------------------------------


def eigen_ratio(W):
    ev = np.linalg.eigvalsh(mdl_hermitian(W))
    tr = ev.sum()
    return 1.0 if tr <= 0 else float(ev[-1] / tr)


def recover_rank_one(W, rng=None, n_draws=200, threshold=0.999):
    """Principal-eigenvector beamformer, or Gaussian-randomized candidates.

    Returns ``(w, candidates)``: ``candidates`` is ``None`` when the principal
    eigenvector was accepted, otherwise an array of randomized vectors with
    ``E[w w^H] = W`` that the caller screens against its constraints.
    """
    W = mdl_hermitian(np.asarray(W))
    ev, U = np.linalg.eigh(W)
    ev = np.clip(ev, 0.0, None)
    w0 = np.sqrt(ev[-1]) * U[:, -1]
    if ev.sum() <= 0 or ev[-1] / ev.sum() >= threshold:
        return w0, None
    rng = np.random.default_rng(rng)
    N = W.shape[0]
    z = (rng.standard_normal((n_draws, N)) + 1j * rng.standard_normal((n_draws, N))) / np.sqrt(2)
    cands = (z * np.sqrt(ev)[None, :]) @ U.T
    return w0, cands


def recover_solution(sol, scn, rng=0, n_draws=200, threshold=0.999):
    """Attach beamformers to ``sol``; report the recovery path in ``extras``."""
    from .audit import audit_solution

    M, K, N = sol.shape
    w = np.zeros((2, M, K, N), dtype=complex)
    ratios = np.zeros((2, M, K))
    needs = []
    for i in STAGES:
        for m in range(M):
            for k in range(K):
                ratios[i, m, k] = eigen_ratio(sol.W[i, m, k])
                w0, cands = recover_rank_one(sol.W[i, m, k], rng=rng, n_draws=n_draws,
                                             threshold=threshold)
                w[i, m, k] = w0
                if cands is not None:
                    needs.append((i, m, k, cands))
    extras = dict(sol.extras)
    extras["eigen_ratio_min"] = float(ratios.min())
    base_power = total_power(sol, scn)[0]
    if not needs:
        out = BeamformingSolution.from_vectors(w, sol.R)
        extras.update(recovery="eigen", recovery_power_increase=0.0)
        out.extras = extras
        return out
    # Gaussian randomization: scale each candidate to keep the user's own signal
    # power, and keep the cheapest candidate set that passes the audits.
    best = None
    n = len(needs[0][3])
    for d in range(n):
        trial = w.copy()
        for i, m, k, cands in needs:
            c = cands[d]
            hv = scn.channels.h[m, m, k]
            target = np.real(np.conj(hv) @ sol.W[i, m, k] @ hv)
            got = abs(np.conj(hv) @ c) ** 2
            trial[i, m, k] = c * np.sqrt(target / got) if got > 0 else c
        cand = BeamformingSolution.from_vectors(trial, sol.R)
        cand.extras = extras
        p = total_power(cand, scn)[0]
        if best is not None and p >= best[0]:
            continue
        report = audit_solution(cand, scn, n_samples=200, refine=False)
        if report["rate_ok"] and report["power_ok"] and report["leak_ok"]:
            best = (p, cand)
    if best is None:
        raise RankOneRecoveryFailed("no randomized candidate met the audited constraints")
    out = best[1]
    out.extras = dict(extras, recovery="randomized",
                      recovery_power_increase=float(best[0] / base_power - 1.0))
    return out
