"""Location covariance -> angle / CSI error radii, and a worst-case leakage falsifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidGeometry


def _steering_error_gain(N):
    return np.sqrt(N * (N - 1) * (2 * N - 1) / 6.0)


def angle_radius(Q, d_bar):
    """Three-sigma angle radius ``3 sqrt(tr Q) / d_bar`` (radians)."""
    if d_bar <= 0:
        raise InvalidGeometry("d_bar must be positive")
    tr = float(np.trace(np.asarray(Q, dtype=float)))
    return 3.0 * np.sqrt(max(tr, 0.0)) / d_bar


def crb_slope(alpha, kappa, theta_bar, d_bar, N):
    """Growth of the CSI radius per unit of ``sqrt(tr Q)``."""
    if d_bar <= 0:
        raise InvalidGeometry("d_bar must be positive")
    return (3 * np.pi * abs(alpha) * np.sin(theta_bar) / d_bar
            * np.sqrt(kappa / (1 + kappa)) * _steering_error_gain(N))


def nlos_radius(alpha, kappa, beta_nlos):
    return abs(alpha) * beta_nlos * np.sqrt(1.0 / (1 + kappa))


def csi_radius(alpha, kappa, beta_nlos, theta_bar, d_bar, N, Q):
    """Norm bound on the eavesdropper CSI error of one BS."""
    if kappa < 0 or N < 1:
        raise InvalidArgument("need kappa >= 0 and N >= 1")
    tr = max(float(np.trace(np.asarray(Q, dtype=float))), 0.0)
    return nlos_radius(alpha, kappa, beta_nlos) + crb_slope(alpha, kappa, theta_bar, d_bar, N) * np.sqrt(tr)


def crb_constants(alpha, kappa, beta_nlos, theta_bar, d_bar, N):
    """Return ``(a, b)`` such that ``delta >= radius(Q)`` iff ``tr Q <= a^2 (delta - b)^2``.

    ``a`` is the reciprocal of :func:`crb_slope`; it is ``inf`` when the
    radius does not depend on ``Q`` (``N = 1``, ``kappa = 0`` or broadside
    along the array axis).
    """
    c = crb_slope(alpha, kappa, theta_bar, d_bar, N)
    a = np.inf if c == 0 else 1.0 / c
    return a, nlos_radius(alpha, kappa, beta_nlos)


@dataclass(frozen=True)
class UncertaintyModel:
    Q: np.ndarray  # (2, 2, 2): one covariance per stage
    beta_theta: np.ndarray  # (2, M)
    beta_g: np.ndarray  # (2, M)
    beta_g_stacked: np.ndarray  # (2,)
    a: np.ndarray  # (M,)
    b: np.ndarray  # (M,)


def scenario_constants(scn):
    geo, ch, cfg = scn.geometry, scn.channels, scn.config
    ab = [crb_constants(ch.alpha[m], cfg.rician_kappa, cfg.beta_nlos[m], geo.theta_bar[m],
                        geo.d_bar[m], cfg.N) for m in range(cfg.M)]
    return np.array([x[0] for x in ab]), np.array([x[1] for x in ab])


def per_bs_radii(scn, Q):
    geo, ch, cfg = scn.geometry, scn.channels, scn.config
    return np.array([
        csi_radius(ch.alpha[m], cfg.rician_kappa, cfg.beta_nlos[m], geo.theta_bar[m],
                   geo.d_bar[m], cfg.N, Q)
        for m in range(cfg.M)
    ])


def uncertainty_model(scn, Q2):
    """Radii for both stages given the stage-2 location covariance ``Q2``."""
    Q = np.stack([scn.Q1, np.asarray(Q2, dtype=float)])
    beta_theta = np.array([[angle_radius(Q[i], d) for d in scn.geometry.d_bar] for i in range(2)])
    beta_g = np.stack([per_bs_radii(scn, Q[i]) for i in range(2)])
    a, b = scenario_constants(scn)
    return UncertaintyModel(Q=Q, beta_theta=beta_theta, beta_g=beta_g,
                            beta_g_stacked=np.sqrt((beta_g**2).sum(axis=1)), a=a, b=b)


def delta_consistency(delta, delta0, beta=None, tol=0.0):
    """Audit the radius auxiliaries: ``delta0 >= sum delta^2`` and ``delta >= beta``."""
    delta = np.asarray(delta, dtype=float)
    ok = delta0 >= float(np.sum(delta**2)) - tol
    if beta is not None:
        ok = ok and bool(np.all(delta >= np.asarray(beta, dtype=float) - tol))
    return bool(ok)


# --- worst-case leakage falsifier -------------------------------------------


def _ratios(W, R, g, m, sigma2):
    """Leakage ratio for a batch of channel stacks ``g`` with shape (n, M, N)."""
    gm = g[:, m, :]
    num = np.real(np.einsum("sn,nl,sl->s", np.conj(gm), W, gm))
    den = sigma2 + np.real(np.einsum("smn,mnl,sml->s", np.conj(g), R, g))
    return num / den


def _project(delta, beta, stacked):
    if stacked:
        norm = np.linalg.norm(delta)
        return delta if norm <= beta or norm == 0 else delta * (beta / norm)
    norms = np.linalg.norm(delta, axis=1)
    scale = np.where(norms > beta, beta / np.where(norms > 0, norms, 1.0), 1.0)
    return delta * scale[:, None]


def sample_ball_perturbations(beta, M, N, n, seed, stacked):
    """Prefix-stable draws: the first ``n`` samples do not depend on ``n``."""
    dir_rng, rad_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    z = dir_rng.standard_normal((n, M, N, 2))
    z = z[..., 0] + 1j * z[..., 1]
    u = rad_rng.uniform(size=(n, M))
    on_sphere = np.arange(n) % 2 == 0
    if stacked:
        z /= np.linalg.norm(z.reshape(n, -1), axis=1)[:, None, None]
        r = np.where(on_sphere, 1.0, u[:, 0] ** (1.0 / (2 * M * N))) * beta
        return z * r[:, None, None]
    z /= np.linalg.norm(z, axis=2, keepdims=True)
    r = np.where(on_sphere[:, None], 1.0, u ** (1.0 / (2 * N))) * np.asarray(beta)[None, :]
    return z * r[:, :, None]


def worst_case_leakage_oracle(sol, g_bar, beta, i, m, k, n_samples, scn, seed=0,
                              refine_steps=50, refine=True):
    """Largest leakage rate found over the CSI error set (a lower bound on the true max).

    ``beta`` is either one radius for the stacked error vector or an array of
    per-BS radii (product of balls).  Random draws are refined by projected
    gradient ascent from the best draw.
    """
    g_bar = np.asarray(g_bar)
    M, N = g_bar.shape
    W = sol.W[i, m, k]
    R = sol.R[i]
    sigma2 = scn.sigma2_eve
    stacked = np.ndim(beta) == 0
    beta_arr = float(beta) if stacked else np.asarray(beta, dtype=float)
    if np.any(np.asarray(beta_arr) < 0):
        raise InvalidArgument("beta must be nonnegative")

    best = _ratios(W, R, g_bar[None], m, sigma2)[0]
    if np.all(np.asarray(beta_arr) == 0) or n_samples <= 0:
        return float(np.log2(1 + best))

    deltas = sample_ball_perturbations(beta_arr, M, N, n_samples, seed, stacked)
    vals = _ratios(W, R, g_bar[None] + deltas, m, sigma2)
    j = int(np.argmax(vals))
    if vals[j] > best:
        best = vals[j]
    if refine:
        for start in (deltas[j], np.zeros_like(g_bar)):
            best = max(best, _ascend(W, R, g_bar, start, beta_arr, m, sigma2, stacked, refine_steps))
    return float(np.log2(1 + best))


def _ascend(W, R, g_bar, delta, beta, m, sigma2, stacked, steps):
    step = 0.1 * (beta if stacked else np.max(beta))
    delta = delta.copy()
    g = g_bar + delta
    f = _ratios(W, R, g[None], m, sigma2)[0]
    for _ in range(steps):
        num = np.real(np.conj(g[m]) @ W @ g[m])
        den = sigma2 + sum(np.real(np.conj(g[q]) @ R[q] @ g[q]) for q in range(len(g)))
        grad = -num * np.einsum("mnl,ml->mn", R, g)
        grad[m] += den * (W @ g[m])
        norm = np.linalg.norm(grad)
        if norm == 0:
            break
        cand = _project(delta + step * grad / norm, beta, stacked)
        gc = g_bar + cand
        fc = _ratios(W, R, gc[None], m, sigma2)[0]
        if fc > f:
            delta, g, f = cand, gc, fc
        else:
            step *= 0.5
    return f
