"""Decentralized consensus-ADMM design (Algorithm 2).

Each BS keeps local copies of the quantities it shares with the others:
interference it causes / receives (``e``, ``t``), eavesdropper-interference
floors (``u``) and its Fisher-information contribution (``V``).  A controller
keeps the global stack and reconciles the copies with closed-form
least-squares averages; scaled duals and a geometric penalty schedule drive
the copies to consensus.

Global stacks are ordered lexicographically by (source BS, victim BS, user)
for ``e``/``t``, by BS for ``u`` and in 2x2 blocks by BS for ``V``.  Local
vectors put the aggregate "received from others" rows first and the BS's own
emissions after, as the maps in :class:`SelectionMaps` encode.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import model as mdl
from .central import (
    _value_or_zero,
    OBJ_FLOOR,
    BcdOptions,
    CentralProblems,
    cheapest_anchor,
    eigen_ratio,
    mdl_hermitian,
    recover_solution,
    stage_sinr_targets,
    trace_q,
    write_trace,
)
from .errors import (
    DegenerateTopology,
    InvalidExpansionPoint,
    RankOneRecoveryFailed,
    ScenarioInfeasible,
    SolverFailure,
)
from .surrogates import LN2

STAGES = (0, 1)
FAMILIES = ("e", "t", "u", "V")


# --- selection maps ----------------------------------------------------------------


@dataclass(frozen=True)
class SelectionMaps:
    M: int
    K: int
    pairs: tuple  # (source, victim) in global order
    E: np.ndarray  # (M, MK, M(M-1)K); T_m is identical
    U: np.ndarray  # (M, 2, M)
    V: np.ndarray  # (M, 4, 2M)
    E_inv: np.ndarray
    U_inv: np.ndarray
    V_inv: np.ndarray

    @property
    def T(self):
        return self.E

    @property
    def T_inv(self):
        return self.E_inv

    def index(self, src, victim, k):
        return self.pairs.index((src, victim)) * self.K + k

    def local(self, family, m, g):
        """Apply BS ``m``'s map to a global stack."""
        return self._map(family)[m] @ g

    def _map(self, family):
        return {"e": self.E, "t": self.E, "u": self.U, "V": self.V}[family]

    def _inv(self, family):
        return {"e": self.E_inv, "t": self.E_inv, "u": self.U_inv, "V": self.V_inv}[family]

    def least_squares(self, family, targets):
        """``argmin_g sum_m ||targets[m] - A_m g||^2`` in closed form."""
        A = self._map(family)
        rhs = sum(A[m].T @ targets[m] for m in range(self.M))
        return self._inv(family) @ rhs


def build_selection_maps(M, K):
    if M < 2:
        raise DegenerateTopology("consensus maps need at least two BSs")
    pairs = tuple((s, v) for s in range(M) for v in range(M) if s != v)
    n = len(pairs) * K
    E = np.zeros((M, M * K, n))
    for m in range(M):
        for k in range(K):
            for src in range(M):
                if src != m:
                    E[m, k, pairs.index((src, m)) * K + k] = 1.0
        row = K
        for victim in range(M):
            if victim == m:
                continue
            for k in range(K):
                E[m, row, pairs.index((m, victim)) * K + k] = 1.0
                row += 1
    U = np.zeros((M, 2, M))
    for m in range(M):
        U[m, 0] = 1.0
        U[m, 0, m] = 0.0
        U[m, 1, m] = 1.0
    V = np.stack([np.kron(U[m], np.eye(2)) for m in range(M)])

    def inv(A):
        return np.linalg.inv(sum(a.T @ a for a in A))

    return SelectionMaps(M=M, K=K, pairs=pairs, E=E, U=U, V=V,
                         E_inv=inv(E), U_inv=inv(U), V_inv=inv(V))


# --- per-BS data ---------------------------------------------------------------------


@dataclass(frozen=True)
class LocalView:
    """Everything BS ``m`` may read: its own outgoing channels and sensing data."""

    m: int
    M: int
    K: int
    N: int
    tau: np.ndarray
    h_out: np.ndarray  # (M, K, N): channel from BS m to user (victim, k)
    g_bar: np.ndarray  # (N,)
    beta1: float
    a: float
    b: float
    fim_coef: np.ndarray  # (2, 2, N, N)
    prior: np.ndarray
    p_max: float
    R_info: float
    R_leak: float


def local_view(nm, m):
    return LocalView(m=m, M=nm.M, K=nm.K, N=nm.N, tau=np.asarray(nm.tau), h_out=nm.h[m].copy(),
                     g_bar=nm.g_bar[m].copy(), beta1=float(nm.beta1[m]), a=float(nm.a[m]),
                     b=float(nm.b[m]), fim_coef=nm.fim_coef[m].copy(), prior=nm.prior.copy(),
                     p_max=float(nm.p_max), R_info=nm.R_info, R_leak=nm.R_leak)


@dataclass
class LocalState:
    W: np.ndarray  # (2, K, N, N)
    R: np.ndarray  # (2, N, N)
    delta: float
    s: float  # >= delta^2
    e: np.ndarray  # (2, MK)
    t: np.ndarray  # (2, MK)
    u: np.ndarray  # (2, 2): [aggregate of others, own floor]
    Vhat: np.ndarray  # (4, 2): [V_bar; V_m]
    xi: np.ndarray  # (2, K)
    psi: np.ndarray  # (2, K)
    lam: np.ndarray  # (2,)

    def copy(self):
        return LocalState(**{k: (np.array(v, copy=True) if isinstance(v, np.ndarray) else v)
                             for k, v in self.__dict__.items()})

    def family(self, name):
        return {"e": self.e, "t": self.t, "u": self.u, "V": self.Vhat}[name]


@dataclass
class ConsensusState:
    locals: list
    globals: dict  # e, t: (2, M(M-1)K); u: (2, M); V: (2M, 2)
    duals: list  # per BS: dict family -> array shaped like the local copy
    rho: dict
    history: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    failures: int = 0
    messages: list = field(default_factory=list)
    records: list = field(default_factory=list)


# --- local conic programs --------------------------------------------------------------


def _psd(N):
    X = cp.Variable((N, N), hermitian=True)
    return X, X >> 0


def psi_lmi(view, W, R, xi, psi, u_bar, radius2):
    """Per-BS robust leakage LMI on the ball of BS ``m``'s eavesdropper channel."""
    N = view.N
    D = np.hstack([np.eye(N), view.g_bar[:, None]])
    E1 = np.diag(np.r_[np.ones(N), 0.0])
    E2 = np.zeros((N + 1, N + 1))
    E2[N, N] = 1.0
    L = psi * E1 + (xi * u_bar + xi - psi * radius2) * E2 - np.conj(D.T) @ (W - xi * R) @ D
    return mdl.herm(L) >> 0


def phi_lmi(view, R, lam, u_own, radius2):
    """Certifies ``g^H R g >= u_own`` on the ball of BS ``m``'s eavesdropper channel."""
    N = view.N
    D = np.hstack([np.eye(N), view.g_bar[:, None]])
    E1 = np.diag(np.r_[np.ones(N), 0.0])
    E2 = np.zeros((N + 1, N + 1))
    E2[N, N] = 1.0
    L = lam * E1 + (-lam * radius2 - u_own) * E2 + np.conj(D.T) @ R @ D
    return mdl.herm(L) >> 0


def local_fim_expr(view, S):
    return mdl.fim_expr(view.fim_coef[None], [S])


class LocalProblems:
    """Compiled block-1, block-2 and floor-certification programs of one BS.

    ``fixed_mse`` switches to the fixed-sensing variant: the radius is pinned
    and the fused-CRB bound is imposed explicitly.
    """

    def __init__(self, view: LocalView, fixed_mse=None, fixed_delta=None):
        self.view = view
        self.fixed_mse = fixed_mse
        self.fixed_delta = fixed_delta
        self.bypass = view.M == 1
        self._build_block1()
        self._build_block2()
        self._build_floor()

    # -- block 1 --

    def _build_block1(self):
        v = self.view
        M, K, N, m = v.M, v.K, v.N, v.m
        MK = M * K
        W = [[None] * K for _ in STAGES]
        R = [None] * 2
        cons = []
        for i in STAGES:
            for k in range(K):
                W[i][k], c = _psd(N)
                cons.append(c)
            R[i], c = _psd(N)
            cons.append(c)
        delta = cp.Variable(nonneg=True)
        s = cp.Variable(nonneg=True)
        e = cp.Variable((2, MK), nonneg=True)
        t = cp.Variable((2, MK), nonneg=True)
        u = cp.Variable((2, 2))
        Vbar = cp.Variable((2, 2), symmetric=True)
        Vm = cp.Variable((2, 2), symmetric=True)
        p = {
            "xi": cp.Parameter((2, K), nonneg=True),
            "psi": cp.Parameter((2, K), nonneg=True),
            "lam": cp.Parameter(2, nonneg=True),
            "cz": cp.Parameter((2, K), nonneg=True),
            "y0": cp.Parameter((2, K)),
            "c1": cp.Parameter(nonneg=True),
            "c0": cp.Parameter(),
            "p_max": cp.Parameter(nonneg=True),
            "sqrt_rho": cp.Parameter(4, nonneg=True),
            "q_e": cp.Parameter((2, MK)),
            "q_t": cp.Parameter((2, MK)),
            "q_u": cp.Parameter((2, 2)),
            "q_V": cp.Parameter((4, 2)),
        }
        power = sum(v.tau[i] * (sum(cp.real(cp.trace(X)) for X in W[i]) + cp.real(cp.trace(R[i])))
                    for i in STAGES)
        cons.append(power <= p["p_max"])
        h_own = v.h_out[m]
        for k in range(K):
            rate = 0
            for i in STAGES:
                z = (sum(mdl.quad(h_own[k], W[i][kp]) for kp in range(K) if kp != k)
                     + mdl.quad(h_own[k], R[i]) + e[i, k] + t[i, k] + 1.0)
                x = cp.log(mdl.quad(h_own[k], W[i][k]) + z) / LN2
                rate = rate + v.tau[i] * (x - p["y0"][i, k] - p["cz"][i, k] * z)
            cons.append(rate >= v.R_info)
        victims = [q for q in range(M) if q != m]
        for i in STAGES:
            for j, q in enumerate(victims):
                for k in range(K):
                    row = K + j * K + k
                    cons.append(e[i, row] >= sum(mdl.quad(v.h_out[q, k], W[i][kp]) for kp in range(K)))
                    cons.append(t[i, row] >= mdl.quad(v.h_out[q, k], R[i]))
            r2 = v.beta1**2 if i == 0 else s
            for k in range(K if np.isfinite(v.R_leak) else 0):
                cons.append(psi_lmi(v, W[i][k], R[i], p["xi"][i, k], p["psi"][i, k], u[i, 0], r2))
            cons.append(phi_lmi(v, R[i], p["lam"][i], u[i, 1], r2))
        cons.append(cp.square(delta) <= s)
        F = local_fim_expr(v, sum(W[0]) + R[0])
        T, lmi = mdl.trace_inverse_epigraph(F + Vbar, v.prior)
        cons += [lmi, 0.5 * ((F - Vm) + (F - Vm).T) >> 0]
        if self.fixed_mse is not None:
            cons += [delta == self.fixed_delta, cp.trace(T) <= self.fixed_mse]
        elif np.isfinite(v.a) and np.isfinite(v.R_leak):
            cons.append(cp.trace(T) <= p["c1"] * delta - p["c0"])
        else:
            cons.append(delta == v.b)
        if self.bypass:
            cons += [e[:, :K] == 0, t[:, :K] == 0, u[:, 0] == 0, Vbar == 0]
            penalty = 0
        else:
            Vhat = cp.vstack([Vbar, Vm])
            sr = p["sqrt_rho"]
            penalty = 0.5 * (cp.sum_squares(sr[0] * e - p["q_e"]) + cp.sum_squares(sr[1] * t - p["q_t"])
                             + cp.sum_squares(sr[2] * u - p["q_u"])
                             + cp.sum_squares(sr[3] * Vhat - p["q_V"]))
        self.b1 = cp.Problem(cp.Minimize(power + penalty), cons)
        self.b1_params = p
        self.b1_vars = dict(W=W, R=R, delta=delta, s=s, e=e, t=t, u=u, Vbar=Vbar, Vm=Vm)
        self.b1_power = power

    def solve_block1(self, loc: LocalState, targets, rho, p_max, solver=None):
        v = self.view
        p = self.b1_params
        K, m = v.K, v.m
        cz = np.zeros((2, K))
        y0 = np.zeros((2, K))
        h_own = v.h_out[m]
        for i in STAGES:
            for k in range(K):
                z0 = (sum(_q(h_own[k], loc.W[i, kp]) for kp in range(K) if kp != k)
                      + _q(h_own[k], loc.R[i]) + loc.e[i, k] + loc.t[i, k] + 1.0)
                if not z0 > 0:
                    raise InvalidExpansionPoint("interference-plus-noise must be positive")
                cz[i, k] = 1.0 / (LN2 * z0)
                y0[i, k] = np.log2(z0) - 1.0 / LN2
        p["cz"].value, p["y0"].value = cz, y0
        p["xi"].value, p["psi"].value = loc.xi.copy(), loc.psi.copy()
        p["lam"].value = loc.lam.copy()
        if np.isfinite(v.a) and np.isfinite(v.R_leak) and self.fixed_mse is None:
            d = loc.delta - v.b
            if not d > 0:
                raise InvalidExpansionPoint(f"delta must exceed b at BS {m}")
            p["c1"].value = 2.0 * v.a**2 * d
            p["c0"].value = v.a**2 * d * (loc.delta + v.b)
        else:
            p["c1"].value, p["c0"].value = 0.0, 0.0
        p["p_max"].value = p_max
        sr = np.sqrt([rho[f] for f in FAMILIES])
        p["sqrt_rho"].value = sr
        for j, f in enumerate(FAMILIES):
            p["q_" + f].value = sr[j] * targets[f]
        mdl.solve(self.b1, f"local_block1[{m}]", solver)
        x = self.b1_vars
        out = loc.copy()
        out.W = np.array([[X.value for X in x["W"][i]] for i in STAGES])
        out.R = np.array([x["R"][i].value for i in STAGES])
        out.delta = float(x["delta"].value)
        out.s = float(max(x["s"].value, out.delta**2))
        out.e = np.asarray(x["e"].value)
        out.t = np.asarray(x["t"].value)
        out.u = np.asarray(x["u"].value)
        out.Vhat = np.vstack([_sym(x["Vbar"].value), _sym(x["Vm"].value)])
        return out

    # -- block 2 --

    def _build_block2(self):
        v = self.view
        K, N = v.K, v.N
        W = [[cp.Parameter((N, N), hermitian=True) for _ in range(K)] for _ in STAGES]
        R = [cp.Parameter((N, N), hermitian=True) for _ in STAGES]
        u_bar = cp.Parameter(2)
        r2 = cp.Parameter(nonneg=True)
        slope = cp.Parameter((2, K), nonneg=True)
        xi = cp.Variable((2, K), nonneg=True)
        psi = cp.Variable((2, K), nonneg=True)
        cons = []
        for i in STAGES:
            rad = v.beta1**2 if i == 0 else r2
            for k in range(K if np.isfinite(v.R_leak) else 0):
                cons.append(psi_lmi(v, W[i][k], R[i], xi[i, k], psi[i, k], u_bar[i], rad))
        self.b2 = cp.Problem(cp.Minimize(cp.sum(cp.multiply(slope, xi))), cons)
        self.b2_params = dict(W=W, R=R, u_bar=u_bar, r2=r2, slope=slope)
        self.b2_vars = dict(xi=xi, psi=psi)

    def solve_block2(self, loc: LocalState, solver=None):
        v = self.view
        p = self.b2_params
        for i in STAGES:
            p["R"][i].value = mdl_hermitian(loc.R[i])
            for k in range(v.K):
                p["W"][i][k].value = mdl_hermitian(loc.W[i, k])
        p["u_bar"].value = loc.u[:, 0].copy()
        p["r2"].value = loc.s
        p["slope"].value = v.tau[:, None] / (LN2 * (1.0 + loc.xi))
        mdl.solve(self.b2, f"local_block2[{v.m}]", solver)
        out = loc.copy()
        out.xi = np.maximum(_value_or_zero(self.b2_vars["xi"]), 0.0)
        out.psi = np.maximum(_value_or_zero(self.b2_vars["psi"]), 0.0)
        out.lam = np.array([self.floor(loc.R[i], v.beta1**2 if i == 0 else loc.s, solver)[0]
                            for i in STAGES])
        return out

    # -- interference floor --

    def _build_floor(self):
        v = self.view
        R = cp.Parameter((v.N, v.N), hermitian=True)
        r2 = cp.Parameter(nonneg=True)
        lam = cp.Variable(nonneg=True)
        u = cp.Variable()
        self.fl = cp.Problem(cp.Maximize(u), [phi_lmi(v, R, lam, u, r2)])
        self.fl_params = dict(R=R, r2=r2)
        self.fl_vars = dict(lam=lam, u=u)

    def floor(self, R, radius2, solver=None):
        """Largest certified ``min g^H R g`` over the ball, with its multiplier."""
        self.fl_params["R"].value = mdl_hermitian(R)
        self.fl_params["r2"].value = max(float(radius2), 0.0)
        mdl.solve(self.fl, f"floor[{self.view.m}]", solver)
        return float(max(self.fl_vars["lam"].value, 0.0)), float(self.fl_vars["u"].value)


def _q(h, X):
    return float(np.real(np.conj(h) @ X @ h))


def _sym(X):
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + X.T)


# --- consensus updates -------------------------------------------------------------------


def assemble_locals_from_solution(nm, W, R, delta, problems):
    """Consistent local copies (zero consensus residual) for covariances ``W, R``."""
    M, K = nm.M, nm.K
    locs = []
    F_bar = [fim_m(nm, W, R, m) for m in range(M)]
    for m in range(M):
        locs.append(LocalState(
            W=W[:, m].copy(), R=R[:, m].copy(), delta=float(delta[m]), s=float(delta[m] ** 2),
            e=np.zeros((2, M * K)), t=np.zeros((2, M * K)), u=np.zeros((2, 2)),
            Vhat=np.zeros((4, 2)), xi=np.zeros((2, K)), psi=np.zeros((2, K)), lam=np.zeros(2)))
    own_u = np.zeros((2, M))
    for m in range(M):
        for i in STAGES:
            r2 = nm.beta1[m] ** 2 if i == 0 else delta[m] ** 2
            locs[m].lam[i], own_u[i, m] = problems[m].floor(R[i, m], r2)
    for m in range(M):
        loc = locs[m]
        victims = [q for q in range(M) if q != m]
        for i in STAGES:
            for k in range(K):
                loc.e[i, k] = sum(sum(_q(nm.h[src, m, k], W[i, src, kp]) for kp in range(K))
                                  for src in range(M) if src != m)
                loc.t[i, k] = sum(_q(nm.h[src, m, k], R[i, src]) for src in range(M) if src != m)
                for j, q in enumerate(victims):
                    loc.e[i, K + j * K + k] = sum(_q(nm.h[m, q, k], W[i, m, kp]) for kp in range(K))
                    loc.t[i, K + j * K + k] = _q(nm.h[m, q, k], R[i, m])
            loc.u[i] = [own_u[i].sum() - own_u[i, m], own_u[i, m]]
        loc.Vhat = np.vstack([sum(F_bar[q] for q in victims) if victims else np.zeros((2, 2)), F_bar[m]])
    return locs


def fim_m(nm, W, R, m):
    S = W[0, m].sum(axis=0) + R[0, m]
    return np.real(np.einsum("nl,ijln->ij", S, nm.fim_coef[m]))


def update_globals(state: ConsensusState, maps: SelectionMaps):
    """Exact minimizer of the augmented terms over the global stacks."""
    M = maps.M
    new = {}
    for f in ("e", "t", "u"):
        rows = []
        for i in STAGES:
            targets = [state.locals[m].family(f)[i] + state.duals[m][f][i] / state.rho[f] for m in range(M)]
            rows.append(maps.least_squares(f, targets))
        new[f] = np.array(rows)
    targets = [state.locals[m].Vhat + state.duals[m]["V"] / state.rho["V"] for m in range(M)]
    new["V"] = maps.least_squares("V", targets)
    state.globals = new
    return new


def mapped_globals(state: ConsensusState, maps: SelectionMaps, m):
    g = state.globals
    return {
        "e": np.array([maps.E[m] @ g["e"][i] for i in STAGES]),
        "t": np.array([maps.E[m] @ g["t"][i] for i in STAGES]),
        "u": np.array([maps.U[m] @ g["u"][i] for i in STAGES]),
        "V": maps.V[m] @ g["V"],
    }


def consensus_residuals(state: ConsensusState, maps: SelectionMaps):
    """Per-family ``||local - map global|| / max(||global||, 1)``."""
    out = {}
    for f in FAMILIES:
        num = 0.0
        for m in range(maps.M):
            num += float(np.sum((state.locals[m].family(f) - mapped_globals(state, maps, m)[f]) ** 2))
        out[f] = np.sqrt(num) / max(float(np.linalg.norm(state.globals[f])), 1.0)
    return out


def update_duals(state: ConsensusState, maps: SelectionMaps):
    """``lambda <- lambda + rho (local - map global)`` for every family."""
    for m in range(maps.M):
        g = mapped_globals(state, maps, m)
        for f in FAMILIES:
            state.duals[m][f] = state.duals[m][f] + state.rho[f] * (state.locals[m].family(f) - g[f])
    return state.duals


def local_targets(state: ConsensusState, maps: SelectionMaps, m):
    """``map global - dual / rho`` for each family; the proximal centre of ``h_m``."""
    g = mapped_globals(state, maps, m)
    return {f: g[f] - state.duals[m][f] / state.rho[f] for f in FAMILIES}


# --- message accounting ----------------------------------------------------------------------


def message_sizes(M, K):
    """Scalars per BS per iteration: locals uploaded, mapped globals downloaded.

    Symmetric 2x2 blocks count three scalars; duals stay at the BS.
    """
    per_stage = 2 * M * K + 2  # e_m, t_m, u_m
    up = 2 * per_stage + 6  # both stages + [V_bar; V_m]
    return {"locals_up": up, "globals_down": up, "duals_local": 0}


def iteration_messages(M, K, it):
    sizes = message_sizes(M, K)
    return [{"iter": it, "bs_id": m, "payload_kind": kind, "scalar_count": n}
            for m in range(M) for kind, n in sizes.items()]


def exchanged_per_iteration(M, K):
    s = message_sizes(M, K)
    return M * (s["locals_up"] + s["globals_down"])


def centralized_overhead(M, N, K, L):
    """Scalars a central design collects once: echoes (M N L) and CSI (M^2 K N), complex."""
    return 2 * (M * N * L + M * M * K * N)


# --- algorithm driver ---------------------------------------------------------------------------


@dataclass
class AdmmOptions(BcdOptions):
    rho0: float = 1.0
    varsigma: float = 1.5
    rho_cap: float = 1e3  # normalized units; larger penalties break the interior-point solves
    residual_tol: float = 1e-4  # below the 1e-3 target: consensus error shows up as rate shortfall
    min_iter: int = 3
    message_path: str | None = None


def _objective(nm, locs):
    return float(sum(
        sum(nm.tau[i] * (np.real(np.trace(loc.W[i], axis1=-2, axis2=-1)).sum() + np.real(np.trace(loc.R[i])))
            for i in STAGES)
        for loc in locs))


def _stack(locs):
    W = np.stack([loc.W for loc in locs], axis=1)
    R = np.stack([loc.R for loc in locs], axis=1)
    return W, R


def initial_consensus(nm, problems, maps, options, fixed_delta=None, fixed_mse=None):
    """Feasible consistent start from the stacked-ball anchor."""
    central = CentralProblems(nm, fixed_delta=fixed_delta, mse_cap=fixed_mse)
    W, R, _, delta = cheapest_anchor(central, nm, options, stage_sinr_targets(nm), nm.xi_cap)
    try:
        locs = assemble_locals_from_solution(nm, W, R, delta, problems)
    except SolverFailure as exc:
        raise ScenarioInfeasible(f"local certification of the anchor failed: {exc}") from exc
    for loc in locs:
        loc.xi[:] = nm.xi_cap
    locs = [problems[m].solve_block2(locs[m], options.solver) for m in range(nm.M)]
    state = ConsensusState(locals=locs, globals={}, duals=[], rho={f: options.rho0 for f in FAMILIES})
    if maps is not None:
        state.duals = [{f: np.zeros_like(loc.family(f)) for f in FAMILIES} for loc in locs]
        update_globals(state, maps)  # zero duals: globals reproduce the consistent copies
    return state


def run_algorithm2(scn, eps2=1e-3, sigma_scale=1.5, max_iter=50, options: AdmmOptions | None = None,
                   fixed_mse=None):
    """Run consensus ADMM; return ``(state, solution_in_watts)``.

    ``fixed_mse`` (m^2) selects the fixed-sensing variant used by baseline 2.
    """
    options = options or AdmmOptions()
    options.eps, options.max_iter, options.varsigma = eps2, max_iter, sigma_scale
    nm = mdl.normalize(scn, options.p_unit)
    M, K = nm.M, nm.K
    maps = build_selection_maps(M, K) if M >= 2 else None
    fixed_delta = None
    if fixed_mse is not None:
        if not fixed_mse > 0:
            raise ValueError("fixed_mse must be positive")
        fixed_delta = nm.radius_from_trace(fixed_mse)
    problems = [LocalProblems(local_view(nm, m), fixed_mse=fixed_mse,
                              fixed_delta=None if fixed_delta is None else float(fixed_delta[m]))
                for m in range(M)]
    state = initial_consensus(nm, problems, maps, options, fixed_delta=fixed_delta, fixed_mse=fixed_mse)
    t0 = time.perf_counter()
    state.history.append(_objective(nm, state.locals))
    state.records.append(_admm_record(nm, state, maps, 0, t0))
    zeros = {"e": np.zeros((2, M * K)), "t": np.zeros((2, M * K)), "u": np.zeros((2, 2)),
             "V": np.zeros((4, 2))}
    margin = 0
    for it in range(1, max_iter + 1):
        try:
            new_locs = []
            for m in range(M):
                targets = zeros if maps is None else local_targets(state, maps, m)
                loc = problems[m].solve_block1(state.locals[m], targets, state.rho,
                                               nm.p_max * (1 - 0.01 * margin), options.solver)
                new_locs.append(problems[m].solve_block2(loc, options.solver))
        except (SolverFailure, InvalidExpansionPoint):
            state.failures += 1
            margin += 1
            if state.failures >= options.max_failures:
                break
            continue
        state.locals = new_locs
        if maps is not None:
            update_globals(state, maps)
            update_duals(state, maps)
            state.rho = {f: min(r * options.varsigma, options.rho_cap) for f, r in state.rho.items()}
            state.messages += iteration_messages(M, K, it)
        f_new, f_old = _objective(nm, state.locals), state.history[-1]
        state.history.append(f_new)
        state.iterations = it
        rec = _admm_record(nm, state, maps, it, t0)
        state.records.append(rec)
        res_ok = maps is None or max(rec["residuals"].values()) <= options.residual_tol
        if it >= options.min_iter and res_ok and abs(f_new - f_old) <= options.eps * max(f_old, OBJ_FLOOR):
            state.converged = True
            break
    if options.trace_path:
        write_trace(options.trace_path, state.records)
    if options.message_path:
        write_trace(options.message_path, state.messages)
    W, R = _stack(state.locals)
    sol = nm.to_watts(W, R)
    S1 = W[0].sum(axis=1) + R[0]
    sol.extras.update({
        "scheme": "decentral" if fixed_mse is None else "fixed_sensing",
        "history_W": [f * nm.p_unit for f in state.history],
        "iterations": state.iterations,
        "converged": state.converged,
        "trace_Q2": trace_q(nm, S1),
        "delta": [loc.delta / nm.g_scale for loc in state.locals],
        "xi": np.array([loc.xi for loc in state.locals]).transpose(1, 0, 2).tolist(),
        "robust_set": "per_bs",
        "residuals": [r["residuals"] for r in state.records],
        "messages_per_iter": exchanged_per_iteration(M, K) if maps is not None else 0,
    })
    if options.recover:
        try:
            sol = recover_solution(sol, scn)
        except RankOneRecoveryFailed as exc:
            sol.extras["recovery_error"] = str(exc)
    return state, sol


def _admm_record(nm, state, maps, it, t0):
    W, R = _stack(state.locals)
    res = consensus_residuals(state, maps) if maps is not None else {f: 0.0 for f in FAMILIES}
    return {
        "iter": it,
        "objective_W": _objective(nm, state.locals) * nm.p_unit,
        "per_bs_power_W": [float(_objective(nm, [loc]) * nm.p_unit) for loc in state.locals],
        "trace_Q": trace_q(nm, W[0].sum(axis=1) + R[0]),
        "residuals": res,
        "rho": dict(state.rho),
        "wall_time": time.perf_counter() - t0,
    }


def local_eigen_ratios(state):
    return np.array([[eigen_ratio(loc.W[1, k]) for k in range(loc.W.shape[1])] for loc in state.locals])


def dumps_messages(messages):
    return "\n".join(json.dumps(r) for r in messages)
