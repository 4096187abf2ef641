"""Convex surrogates used by both optimizers, in plain numpy form.

The optimizers express the same quantities as cvxpy expressions; the
functions here are the reference implementations the audits and tests
compare against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidExpansionPoint

LN2 = np.log(2.0)


# --- rate ---------------------------------------------------------------------


def interference_term(W, R, h, sigma2, m, k):
    """``Z`` of user ``(m, k)``: everything in the SINR denominator.

    ``W`` has shape (M, K, N, N) and ``R`` (M, N, N) for one stage;
    ``h[mp, m, k]`` is the channel from BS ``mp`` to user ``(m, k)``.
    """
    M, K = W.shape[:2]
    z = sigma2
    for mp in range(M):
        hv = h[mp, m, k]
        for kp in range(K):
            if mp == m and kp == k:
                continue
            z += np.real(np.conj(hv) @ W[mp, kp] @ hv)
        z += np.real(np.conj(hv) @ R[mp] @ hv)
    return float(z)


@dataclass(frozen=True)
class RateSurrogate:
    """Tangent upper bound on ``Y = log2 Z`` around an expansion point."""

    Y0: float
    Z0: float
    grad_W: np.ndarray  # (M, K, N, N)
    grad_R: np.ndarray  # (M, N, N)
    m: int
    k: int

    def value(self, W, R, W0, R0):
        # Re tr(G dX) for Hermitian gradient blocks G
        dW = np.real(np.einsum("mkij,mkji->", self.grad_W, W - W0))
        dR = np.real(np.einsum("mij,mji->", self.grad_R, R - R0))
        return self.Y0 + dW + dR


def rate_surrogate(W0, R0, h, sigma2, m, k):
    """Linearize ``log2 Z`` of user ``(m, k)`` at ``(W0, R0)``.

    Gradient blocks are ``H / (ln2 Z0)`` for every interfering covariance
    and zero for the user's own beam.
    """
    Z0 = interference_term(W0, R0, h, sigma2, m, k)
    if not Z0 > 0:
        raise InvalidExpansionPoint("interference-plus-noise must be positive")
    M, K, N, _ = W0.shape
    grad_W = np.zeros((M, K, N, N), dtype=complex)
    grad_R = np.zeros((M, N, N), dtype=complex)
    for mp in range(M):
        H = np.outer(h[mp, m, k], np.conj(h[mp, m, k]))
        grad_R[mp] = H / (LN2 * Z0)
        for kp in range(K):
            if not (mp == m and kp == k):
                grad_W[mp, kp] = H / (LN2 * Z0)
    return RateSurrogate(Y0=float(np.log2(Z0)), Z0=Z0, grad_W=grad_W, grad_R=grad_R, m=m, k=k)


# --- leakage ------------------------------------------------------------------


@dataclass(frozen=True)
class LeakageSurrogate:
    xi0: np.ndarray
    tau: np.ndarray

    @property
    def slope(self):
        return self.tau / (LN2 * (1.0 + self.xi0))

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return float(np.sum(self.tau * (np.log2(1.0 + self.xi0) + (xi - self.xi0) / (LN2 * (1.0 + self.xi0)))))

    def exact(self, xi):
        return float(np.sum(self.tau * np.log2(1.0 + np.asarray(xi, dtype=float))))


def leakage_surrogate(xi_prev, tau):
    """Tangent overestimator of ``sum_i tau_i log2(1 + xi_i)`` at ``xi_prev``."""
    xi_prev = np.atleast_1d(np.asarray(xi_prev, dtype=float))
    if np.any(xi_prev < 0):
        raise InvalidArgument("expansion point must be nonnegative")
    tau = np.broadcast_to(np.asarray(tau, dtype=float), xi_prev.shape)
    return LeakageSurrogate(xi0=xi_prev, tau=np.array(tau))


# --- S-procedure ----------------------------------------------------------------


def block_diag_select(W_mk, m, M):
    """Place ``W_mk`` in diagonal block ``m`` of an (MN x MN) zero matrix."""
    N = W_mk.shape[0]
    out = np.zeros((M * N, M * N), dtype=complex)
    out[m * N:(m + 1) * N, m * N:(m + 1) * N] = W_mk
    return out


def s_procedure_lmi(W_bar, R_bar, xi, eta, g_bar, radius2, sigma2):
    """Robust-leakage LMI matrix; the constraint holds iff it is PSD.

    ``W_bar``/``R_bar`` are the stacked (MN x MN) block matrices and
    ``radius2`` is the squared radius of the stacked error ball.
    """
    W_bar = np.asarray(W_bar)
    R_bar = np.asarray(R_bar)
    g_bar = np.asarray(g_bar).reshape(-1)
    n = g_bar.size
    if W_bar.shape != (n, n) or R_bar.shape != (n, n):
        raise InvalidArgument(f"expected {n}x{n} blocks, got {W_bar.shape} and {R_bar.shape}")
    Mmat = W_bar - xi * R_bar
    B = np.hstack([np.eye(n), g_bar[:, None]])
    top = np.zeros((n + 1, n + 1), dtype=complex)
    top[:n, :n] = eta * np.eye(n)
    top[n, n] = -eta * radius2 + xi * sigma2
    out = top - np.conj(B.T) @ Mmat @ B
    return 0.5 * (out + np.conj(out.T))


def lmi_min_eig(A):
    return float(np.linalg.eigvalsh(0.5 * (A + np.conj(A.T))).min())


# --- CRB coupling ---------------------------------------------------------------


@dataclass(frozen=True)
class CrbSurrogate:
    """Affine lower bound ``a^2 (delta - b)^2 >= c1 * delta - c0`` at ``delta0``."""

    delta0: float
    a: float
    b: float

    @property
    def c1(self):
        return 2.0 * self.a**2 * (self.delta0 - self.b)

    @property
    def c0(self):
        return self.a**2 * (self.delta0 - self.b) * (self.delta0 + self.b)

    def rhs(self, delta):
        return self.c1 * np.asarray(delta, dtype=float) - self.c0

    def exact_rhs(self, delta):
        return self.a**2 * (np.asarray(delta, dtype=float) - self.b) ** 2

    def holds(self, trace_Finv, delta, tol=0.0):
        return bool(trace_Finv - self.rhs(delta) <= tol)

    def slack(self, trace_Finv, delta):
        return float(self.rhs(delta) - trace_Finv)


def crb_coupling_constraint(delta_prev, a, b):
    """Linearized ``tr(F^-1) <= a^2 (delta - b)^2`` around ``delta_prev``."""
    if not np.isfinite(a):
        raise InvalidArgument("a must be finite; the radius does not depend on Q")
    if not delta_prev > b:
        raise InvalidExpansionPoint(f"delta_prev={delta_prev} must exceed b={b}")
    return CrbSurrogate(delta0=float(delta_prev), a=float(a), b=float(b))
