"""Scenario data rescaled for the conic solvers, plus the solver front end.

Covariances are optimized in units of ``p_unit`` watts (1 mW by default)
and every channel is divided by the square root of its receiver noise, so
noise powers become 1 and SINRs, leakage ratios and rates are unchanged.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .errors import SolverFailure
from .metrics import BeamformingSolution
from .sensing import prior_information, transmitter_fim_coefficients
from .uncertainty import per_bs_radii, scenario_constants

DEFAULT_SOLVER = "CLARABEL"
ACCEPTED = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


@dataclass(frozen=True)
class NormalizedModel:
    scn: object
    p_unit: float
    h: np.ndarray  # (M, M, K, N) scaled so user noise is 1
    g_bar: np.ndarray  # (M, N) scaled so eavesdropper noise is 1
    g_scale: float
    p_max: float
    fim_coef: np.ndarray  # (M, 2, 2, N, N): F = sum_m Re tr(S_m A_m)
    prior: np.ndarray
    a: np.ndarray
    b: np.ndarray
    beta1: np.ndarray  # stage-1 per-BS radii
    gamma_info: float
    xi_cap: float

    @property
    def M(self):
        return self.scn.M

    @property
    def N(self):
        return self.scn.N

    @property
    def K(self):
        return self.scn.K

    @property
    def tau(self):
        return self.scn.tau

    @property
    def R_info(self):
        return self.scn.config.R_info

    @property
    def R_leak(self):
        return self.scn.config.R_leak

    @property
    def secrecy(self):
        """False when ``R_leak`` is infinite: no leakage constraints are built."""
        return bool(np.isfinite(self.R_leak))

    def to_watts(self, W, R, w=None):
        return BeamformingSolution(W=np.asarray(W) * self.p_unit, R=np.asarray(R) * self.p_unit,
                                   w=None if w is None else np.asarray(w) * np.sqrt(self.p_unit))

    def from_watts(self, sol):
        return sol.W / self.p_unit, sol.R / self.p_unit

    def radius_from_trace(self, tr_q):
        """Per-BS radii (scaled units) for a location covariance of trace ``tr_q``."""
        slope = np.where(np.isfinite(self.a), 1.0 / np.where(np.isfinite(self.a), self.a, 1.0), 0.0)
        return self.b + slope * np.sqrt(max(tr_q, 0.0))


def normalize(scn, p_unit=1e-3):
    ch = scn.channels
    g_scale = np.sqrt(p_unit / scn.sigma2_eve)
    a, b = scenario_constants(scn)
    cfg = scn.config
    return NormalizedModel(
        scn=scn,
        p_unit=p_unit,
        h=ch.h * np.sqrt(p_unit / scn.sigma2_user),
        g_bar=ch.g_bar * g_scale,
        g_scale=float(g_scale),
        p_max=scn.p_max / p_unit,
        fim_coef=transmitter_fim_coefficients(scn) * p_unit,
        prior=prior_information(scn),
        a=a / g_scale,
        b=b * g_scale,
        beta1=per_bs_radii(scn, scn.Q1) * g_scale,
        gamma_info=2.0 ** cfg.R_info - 1.0,
        xi_cap=2.0 ** cfg.R_leak - 1.0 if np.isfinite(cfg.R_leak) else 0.0,
    )


def solver_name():
    return os.environ.get("ISAC_SOLVER", DEFAULT_SOLVER).upper()


# settings retried when the interior-point method breaks down numerically
RETRY_SETTINGS = {"CLARABEL": ({"static_regularization_constant": 1e-7}, {"equilibrate_enable": False})}


def solve(problem, tag, solver=None, **kwargs):
    """Solve ``problem`` and raise :class:`SolverFailure` unless it is (near) optimal."""
    name = (solver or solver_name()).upper()
    attempts = [kwargs] + [{**kwargs, **extra} for extra in RETRY_SETTINGS.get(name, ())]
    for i, kw in enumerate(attempts):
        try:
            with warnings.catch_warnings():
                # inaccurate solves are accepted below and reported through the status
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                problem.solve(solver=name, **kw)
            break
        except cp.error.SolverError as exc:
            if i == len(attempts) - 1:
                raise SolverFailure(tag, "solver_error", str(exc)) from exc
    if problem.status not in ACCEPTED:
        raise SolverFailure(tag, problem.status)
    return problem.value


def hermitian_psd(n, name=None):
    X = cp.Variable((n, n), hermitian=True, name=name)
    return X, X >> 0


def herm(expr):
    """Symmetrize an expression so cvxpy accepts it in a PSD constraint."""
    return 0.5 * (expr + expr.H)


def quad(h, X):
    """``Re(h^H X h)`` for a constant vector ``h`` and matrix expression ``X``."""
    return cp.real(np.conj(h) @ X @ h)


def fim_expr(coef, S):
    """2x2 FIM expression from per-BS covariance expressions ``S[m]``."""
    entries = [[0, 0], [0, 0]]
    for i in range(2):
        for j in range(2):
            entries[i][j] = sum(cp.real(cp.trace(S[m] @ coef[m, i, j])) for m in range(len(S)))
    return cp.bmat(entries)


def trace_inverse_epigraph(F_expr, prior):
    """Return ``(T, constraint)`` with ``tr(T) >= tr((F + prior)^-1)`` when feasible."""
    T = cp.Variable((2, 2), symmetric=True)
    I2 = np.eye(2)
    lmi = cp.bmat([[T, I2], [I2, F_expr + prior]])
    return T, 0.5 * (lmi + lmi.T) >> 0
