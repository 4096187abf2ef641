"""Fisher information and CRB for locating the eavesdropper from stage-1 echoes.

Conventions: ``G[mp, m]`` is the target response of the link leaving BS
``mp`` (transmitter) and returning to BS ``m`` (receiver).  The path gains
are treated as independent of position, so only the steering phases carry
location information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationImpossible, InvalidGeometry, SingularCovariance
from .scenario import steering_vector


@dataclass(frozen=True)
class ResponseDerivatives:
    G: np.ndarray  # (M, M, N, N)
    dG: np.ndarray  # (M, M, 2, N, N)
    a: np.ndarray  # (M, N) steering vectors toward p
    da: np.ndarray  # (M, 2, N) derivatives of a w.r.t. p_x, p_y


@dataclass(frozen=True)
class FisherBlock:
    F: np.ndarray
    tag: str

    @property
    def singular(self):
        return np.linalg.matrix_rank(self.F, tol=1e-12 * max(1.0, np.abs(self.F).max())) < 2

    @property
    def Q(self):
        if self.singular:
            return None
        return np.linalg.inv(self.F)

    @property
    def trace_Q(self):
        return np.inf if self.singular else float(np.trace(np.linalg.inv(self.F)))


def direction_cosine_gradient(q, p):
    """``cos(theta)`` of ``p`` seen from ``q`` and its gradient w.r.t. ``p``."""
    dx, dy = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    d = np.hypot(dx, dy)
    if d == 0:
        raise InvalidGeometry("target colocated with a BS")
    return dx / d, np.array([dy * dy, -dx * dy]) / d**3


def response_and_derivatives(geometry, alpha_mm, p=None, N=None):
    if p is None:
        p = geometry.eve_position_est
    M = geometry.M
    if N is None:
        raise ValueError("N is required")
    n = np.arange(N)
    a = np.empty((M, N), dtype=complex)
    da = np.empty((M, 2, N), dtype=complex)
    for m in range(M):
        u, grad_u = direction_cosine_gradient(geometry.bs_positions[m], p)
        a[m] = steering_vector(np.arccos(np.clip(u, -1, 1)), N)
        for j in range(2):
            da[m, j] = 1j * np.pi * n * a[m] * grad_u[j]
    G = np.einsum("pm,mi,pj->pmij", alpha_mm, a, np.conj(a))
    dG = (np.einsum("pm,mxi,pj->pmxij", alpha_mm, da, np.conj(a))
          + np.einsum("pm,mi,pxj->pmxij", alpha_mm, a, np.conj(da)))
    return ResponseDerivatives(G=G, dG=dG, a=a, da=da)


def _derivs(scn, p=None):
    return response_and_derivatives(scn.geometry, scn.channels.alpha_mm, p=p, N=scn.N)


def fim_scale(scn):
    return 2.0 * scn.config.L / scn.sigma2_sense


def stage1_covariances(sol):
    return sol.S(0)


def centralized_fim(sol, scn, p=None):
    """Pooled-echo FIM built from the block-diagonal stacked responses."""
    rd = _derivs(scn, p)
    M, N = scn.M, scn.N
    S = stage1_covariances(sol)
    ones = np.ones((M, M))
    F = np.zeros((2, 2))
    for m in range(M):
        S_tilde = np.kron(ones, S[m])
        blocks = []
        for j in range(2):
            Gd = np.zeros((M * N, M * N), dtype=complex)
            for r in range(M):
                Gd[r * N:(r + 1) * N, r * N:(r + 1) * N] = rd.dG[m, r, j]
            blocks.append(Gd)
        for i in range(2):
            for j in range(2):
                F[i, j] += np.real(np.trace(blocks[j] @ S_tilde @ blocks[i].conj().T))
    return FisherBlock(F=fim_scale(scn) * F, tag="centralized")


def local_fim(sol, scn, m, p=None):
    """FIM from the echoes received at BS ``m`` only."""
    rd = _derivs(scn, p)
    S = stage1_covariances(sol)
    F = np.zeros((2, 2))
    for mp in range(scn.M):
        for i in range(2):
            for j in range(2):
                F[i, j] += np.real(np.trace(rd.dG[mp, m, j] @ S[mp] @ rd.dG[mp, m, i].conj().T))
    return FisherBlock(F=fim_scale(scn) * F, tag=f"per-BS({m})")


def transmitter_fim(sol, scn, m, p=None):
    """Information carried by the signals transmitted from BS ``m`` (all receivers)."""
    rd = _derivs(scn, p)
    S = stage1_covariances(sol)
    F = np.zeros((2, 2))
    for r in range(scn.M):
        for i in range(2):
            for j in range(2):
                F[i, j] += np.real(np.trace(rd.dG[m, r, j] @ S[m] @ rd.dG[m, r, i].conj().T))
    return fim_scale(scn) * F


def transmitter_fim_coefficients(scn, p=None):
    """Matrices ``A[m, i, j]`` with ``F_bar_m[i, j] = Re tr(S_m A[m, i, j])``.

    The FIM is linear in the stage-1 transmit covariances; these are the
    coefficients the optimizers use to express it in the decision variables.
    """
    rd = _derivs(scn, p)
    A = np.einsum("mrxkl,mrykn->mxyln", np.conj(rd.dG), rd.dG)
    return fim_scale(scn) * A


def fim_from_coefficients(A, S):
    return np.real(np.einsum("mnl,mijln->ij", S, A))


def prior_information(scn):
    """Prior information added to the stage-2 FIM when ``sensing_prior`` is set."""
    if not getattr(scn.config, "sensing_prior", False):
        return np.zeros((2, 2))
    return np.linalg.inv(scn.Q1)


def stage2_covariance(sol, scn):
    """Location covariance available to stage 2 (``inf`` trace if singular)."""
    F = centralized_fim(sol, scn).F + prior_information(scn)
    block = FisherBlock(F=F, tag="stage2")
    if block.singular:
        return None
    return np.linalg.inv(F)


def fuse_estimates(p_hat, Q):
    """Minimum-MSE linear fusion of per-BS estimates.

    Returns ``(p_fused, Q_fused, A)`` with weights ``A[m]`` summing to the
    identity.
    """
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1, 2)
    Q = np.asarray(Q, dtype=float).reshape(-1, 2, 2)
    info = []
    for Qm in Q:
        if np.linalg.matrix_rank(Qm) < 2 or np.linalg.eigvalsh(0.5 * (Qm + Qm.T)).min() <= 0:
            raise SingularCovariance("every per-BS covariance must be positive definite")
        info.append(np.linalg.inv(Qm))
    info = np.array(info)
    Q_fused = np.linalg.inv(info.sum(axis=0))
    A = np.einsum("ij,mjk->mik", Q_fused, info)
    p_fused = np.einsum("mij,mj->i", A, p_hat)
    return p_fused, Q_fused, A


def simulate_estimation(scn, sol, mode="centralized", rng=None):
    """Draw an estimate ``p + e`` with ``e`` Gaussian at the CRB of the chosen mode."""
    rng = np.random.default_rng(rng)
    p = scn.geometry.eve_position_true
    if mode == "centralized":
        block = centralized_fim(sol, scn)
        if block.singular:
            raise EstimationImpossible("centralized FIM is singular")
        Q = block.Q
        return p + rng.multivariate_normal(np.zeros(2), Q), Q
    if mode != "decentralized":
        raise ValueError(f"unknown mode {mode!r}")
    blocks = [local_fim(sol, scn, m) for m in range(scn.M)]
    F_sum = sum(b.F for b in blocks)
    if FisherBlock(F=F_sum, tag="fused").singular:
        raise EstimationImpossible("fused FIM is singular")
    if any(b.singular for b in blocks):
        Q = np.linalg.inv(F_sum)
        return p + rng.multivariate_normal(np.zeros(2), Q), Q
    Qs = np.array([b.Q for b in blocks])
    p_hat = np.array([p + rng.multivariate_normal(np.zeros(2), Qm) for Qm in Qs])
    p_fused, Q_fused, _ = fuse_estimates(p_hat, Qs)
    return p_fused, Q_fused
