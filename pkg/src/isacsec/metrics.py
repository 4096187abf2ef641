"""Closed-form SINR, rate, leakage and power metrics.

Stage indices are 0-based throughout the package: ``i = 0`` is the
sensing-and-communication stage, ``i = 1`` the secure-transmission stage.
All quantities are in linear units (watts, linear SINR).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RANK_ONE_TOL = 1e-3


def hermitian_part(A):
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


@dataclass
class BeamformingSolution:
    """Per-stage covariances.

    ``W[i, m, k]`` is the information covariance for user ``(m, k)``,
    ``R[i, m]`` the dedicated sensing covariance of BS ``m``; both in watts.
    ``w`` optionally holds recovered beamformers with shape ``(2, M, K, N)``.
    """

    W: np.ndarray
    R: np.ndarray
    w: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, M, K, N):
        return cls(W=np.zeros((2, M, K, N, N), dtype=complex), R=np.zeros((2, M, N, N), dtype=complex))

    @property
    def shape(self):
        _, M, K, N, _ = self.W.shape
        return M, K, N

    def S(self, i):
        """Transmit covariance of every BS in stage ``i``."""
        return self.W[i].sum(axis=1) + self.R[i]

    def copy(self):
        return BeamformingSolution(
            W=self.W.copy(), R=self.R.copy(),
            w=None if self.w is None else self.w.copy(), extras=dict(self.extras),
        )

    def scaled(self, c):
        return BeamformingSolution(W=self.W * c, R=self.R * c,
                                   w=None if self.w is None else self.w * np.sqrt(c))

    def check(self, tol=1e-8):
        """Raise ``ValueError`` if a covariance is not Hermitian PSD."""
        for name, arr in (("W", self.W), ("R", self.R)):
            if not np.allclose(arr, hermitian_part(arr), atol=tol * max(1.0, np.abs(arr).max())):
                raise ValueError(f"{name} is not Hermitian")
            eig = np.linalg.eigvalsh(hermitian_part(arr))
            scale = max(1.0, np.abs(arr).max())
            if eig.min() < -tol * scale:
                raise ValueError(f"{name} is not PSD (min eig {eig.min():.3e})")
        if self.w is not None:
            outer = np.einsum("imkn,imkl->imknl", self.w, np.conj(self.w))
            num = np.linalg.norm(outer - self.W, axis=(-2, -1))
            den = np.linalg.norm(self.W, axis=(-2, -1))
            ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), num)
            if ratio.max() > RANK_ONE_TOL:
                raise ValueError("recovered beamformers do not match W")

    @classmethod
    def from_vectors(cls, w, R):
        W = np.einsum("imkn,imkl->imknl", w, np.conj(w))
        return cls(W=W, R=np.asarray(R, dtype=complex), w=np.asarray(w, dtype=complex))


def _quad(h, A):
    return float(np.real(np.conj(h) @ A @ h))


def interference_plus_noise(sol, scn, i, m, k, h=None):
    """Denominator of the SINR of user ``(m, k)`` in stage ``i``."""
    h = scn.channels.h if h is None else h
    M, K = scn.M, scn.K
    total = scn.sigma2_user
    for mp in range(M):
        hv = h[mp, m, k]
        for kp in range(K):
            if mp == m and kp == k:
                continue
            total += _quad(hv, sol.W[i, mp, kp])
        total += _quad(hv, sol.R[i, mp])
    return total


def sinr_user(sol, scn, i, m, k):
    hv = scn.channels.h[m, m, k]
    return _quad(hv, sol.W[i, m, k]) / interference_plus_noise(sol, scn, i, m, k)


def sinr_user_vectors(w, R, scn, i, m, k):
    """SINR evaluated from beamforming vectors rather than covariances."""
    return sinr_user(BeamformingSolution.from_vectors(w, R), scn, i, m, k)


def achievable_rate(sol, scn, m, k):
    return float(sum(scn.tau[i] * np.log2(1.0 + sinr_user(sol, scn, i, m, k)) for i in range(2)))


def all_rates(sol, scn):
    M, K = scn.M, scn.K
    return np.array([[achievable_rate(sol, scn, m, k) for k in range(K)] for m in range(M)])


def leakage_ratio(sol, g, scn, i, m, k):
    g = np.asarray(g)
    den = scn.sigma2_eve + sum(_quad(g[mp], sol.R[i, mp]) for mp in range(len(g)))
    return _quad(g[m], sol.W[i, m, k]) / den


def leakage_rate(sol, g, scn, i, m, k):
    """Eavesdropper rate on user ``(m, k)`` with multiuser interference removed."""
    return float(np.log2(1.0 + leakage_ratio(sol, g, scn, i, m, k)))


def total_power(sol, scn):
    """Return ``(sum_m P_m, P)`` with ``P[m]`` the frame-averaged power of BS ``m``."""
    tr_w = np.real(np.trace(sol.W, axis1=-2, axis2=-1)).sum(axis=2)
    tr_r = np.real(np.trace(sol.R, axis1=-2, axis2=-1))
    per_bs = np.tensordot(scn.tau, tr_w + tr_r, axes=(0, 0))
    return float(per_bs.sum()), per_bs
