import numpy as np
import pytest

from conftest import random_psd
from isacsec import model as mdl
from isacsec.audit import audit_solution
from isacsec.central import run_algorithm1
from isacsec.decentral import (
    FAMILIES,
    AdmmOptions,
    ConsensusState,
    LocalProblems,
    LocalState,
    build_selection_maps,
    centralized_overhead,
    consensus_residuals,
    exchanged_per_iteration,
    fim_m,
    iteration_messages,
    local_targets,
    local_view,
    message_sizes,
    run_algorithm2,
    update_duals,
    update_globals,
)
from isacsec.errors import DegenerateTopology
from isacsec.scenario import GeometrySpec, SystemConfig, build_scenario
from isacsec.sensing import centralized_fim


def _random_consensus(rng, M=3, K=2):
    maps = build_selection_maps(M, K)
    locs = []
    for m in range(M):
        V = rng.standard_normal((4, 2))
        locs.append(LocalState(
            W=np.zeros((2, K, 2, 2)), R=np.zeros((2, 2, 2)), delta=0.0, s=0.0,
            e=rng.standard_normal((2, M * K)), t=rng.standard_normal((2, M * K)),
            u=rng.standard_normal((2, 2)), Vhat=V, xi=np.zeros((2, K)), psi=np.zeros((2, K)),
            lam=np.zeros(2)))
    duals = [{f: rng.standard_normal(locs[m].family(f).shape) for f in FAMILIES} for m in range(M)]
    rho = {f: float(rng.uniform(0.5, 3)) for f in FAMILIES}
    return maps, ConsensusState(locals=locs, globals={}, duals=duals, rho=rho)


class TestSelectionMaps:
    def test_two_bs_single_user(self):
        maps = build_selection_maps(2, 1)
        assert maps.E.shape == (2, 2, 2)
        np.testing.assert_array_equal(maps.E[0], [[0, 1], [1, 0]])
        np.testing.assert_array_equal(maps.E[1], [[1, 0], [0, 1]])

    def test_ordering(self):
        maps = build_selection_maps(3, 2)
        assert maps.pairs == ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))
        assert maps.index(1, 2, 1) == 7

    def test_round_trip(self, rng):
        M, K = 3, 2
        maps = build_selection_maps(M, K)
        g = rng.standard_normal(M * (M - 1) * K)
        for m in range(M):
            local = maps.local("e", m, g)
            # aggregate rows: sum over other sources of the cross-term to (m, k)
            for k in range(K):
                expect = sum(g[maps.index(s, m, k)] for s in range(M) if s != m)
                np.testing.assert_allclose(local[k], expect)
            victims = [q for q in range(M) if q != m]
            for j, q in enumerate(victims):
                for k in range(K):
                    assert local[K + j * K + k] == g[maps.index(m, q, k)]

    def test_column_use_counts(self):
        maps = build_selection_maps(3, 2)
        N_u = sum(U.T @ U for U in maps.U)
        # own entry read once, plus (M-1) reads inside the other BSs' aggregates;
        # the aggregate rows also couple every pair of floors (M-2 shared rows)
        np.testing.assert_allclose(N_u, 2 * np.eye(3) + np.ones((3, 3)))
        assert np.linalg.matrix_rank(N_u) == 3
        N_e = sum(E.T @ E for E in maps.E)
        assert np.linalg.matrix_rank(N_e) == N_e.shape[0]

    def test_degenerate(self):
        with pytest.raises(DegenerateTopology):
            build_selection_maps(1, 2)


class TestGlobalUpdate:
    def test_matches_generic_lstsq(self, rng):
        maps, state = _random_consensus(rng)
        update_globals(state, maps)
        for f in ("e", "t", "u"):
            A = np.vstack([maps._map(f)[m] for m in range(maps.M)])
            for i in range(2):
                b = np.concatenate([state.locals[m].family(f)[i] + state.duals[m][f][i] / state.rho[f]
                                    for m in range(maps.M)])
                ref = np.linalg.lstsq(A, b, rcond=None)[0]
                assert np.abs(state.globals[f][i] - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())
        A = np.vstack(list(maps.V))
        b = np.vstack([state.locals[m].Vhat + state.duals[m]["V"] / state.rho["V"] for m in range(maps.M)])
        np.testing.assert_allclose(state.globals["V"], np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-10)

    def test_exact_minimizer(self, rng):
        maps, state = _random_consensus(rng)
        update_globals(state, maps)

        def aug():
            total = 0.0
            for m in range(maps.M):
                tg = local_targets(state, maps, m)
                for f in FAMILIES:
                    r = state.locals[m].family(f) - tg[f]
                    total += 0.5 * state.rho[f] * np.sum(r**2)
            return total

        base = aug()
        for f in FAMILIES:
            g = state.globals[f]
            for idx in [(0, 0), (1, g.shape[1] - 1)]:
                for d in (1e-3, -1e-3):
                    g[idx] += d
                    assert aug() >= base - 1e-12
                    g[idx] -= d

    def test_consistent_locals_reproduced(self, rng):
        maps, state = _random_consensus(rng)
        g = {"e": rng.standard_normal((2, 12)), "t": rng.standard_normal((2, 12)),
             "u": rng.standard_normal((2, 3)), "V": rng.standard_normal((6, 2))}
        for m in range(3):
            loc = state.locals[m]
            loc.e = np.array([maps.E[m] @ g["e"][i] for i in range(2)])
            loc.t = np.array([maps.E[m] @ g["t"][i] for i in range(2)])
            loc.u = np.array([maps.U[m] @ g["u"][i] for i in range(2)])
            loc.Vhat = maps.V[m] @ g["V"]
            state.duals[m] = {f: np.zeros_like(loc.family(f)) for f in FAMILIES}
        update_globals(state, maps)
        for f in FAMILIES:
            np.testing.assert_allclose(state.globals[f], g[f], atol=1e-10)
        assert max(consensus_residuals(state, maps).values()) <= 1e-10


class TestDuals:
    def test_zero_residual(self, rng):
        maps, state = _random_consensus(rng)
        for m in range(3):
            state.duals[m] = {f: np.zeros_like(state.locals[m].family(f)) for f in FAMILIES}
        update_globals(state, maps)
        # make locals consistent with the globals
        for m in range(3):
            tg = local_targets(state, maps, m)
            for f, attr in zip(FAMILIES, ("e", "t", "u", "Vhat")):
                setattr(state.locals[m], attr, tg[f].copy())
        before = [{f: d[f].copy() for f in FAMILIES} for d in state.duals]
        update_duals(state, maps)
        for m in range(3):
            for f in FAMILIES:
                np.testing.assert_array_equal(state.duals[m][f], before[m][f])

    def test_increment_and_schedule(self, rng):
        maps, state = _random_consensus(rng)
        update_globals(state, maps)
        g = {f: state.globals[f].copy() for f in FAMILIES}
        r = {f: state.locals[0].family(f) - local_targets(state, maps, 0)[f]
             - state.duals[0][f] / state.rho[f] for f in FAMILIES}
        d0 = {f: state.duals[0][f].copy() for f in FAMILIES}
        rho1 = dict(state.rho)
        update_duals(state, maps)
        for f in FAMILIES:
            np.testing.assert_allclose(state.duals[0][f] - d0[f], rho1[f] * r[f], atol=1e-12)
        # second iteration, same residual, penalty scaled by 1.5
        state.rho = {f: 1.5 * v for f, v in state.rho.items()}
        state.globals = g
        d1 = {f: state.duals[0][f].copy() for f in FAMILIES}
        update_duals(state, maps)
        for f in FAMILIES:
            np.testing.assert_allclose(state.duals[0][f] - d1[f], 1.5 * rho1[f] * r[f], atol=1e-12)


class TestLocalProblems:
    def test_locality(self, desk_scn):
        nm = mdl.normalize(desk_scn)
        view = local_view(nm, 1)
        np.testing.assert_array_equal(view.h_out, nm.h[1])
        np.testing.assert_array_equal(view.g_bar, nm.g_bar[1])
        assert not hasattr(view, "h") and view.fim_coef.shape == (2, 2, 3, 3)

    def test_floor_without_sensing(self, desk_scn):
        nm = mdl.normalize(desk_scn)
        lp = LocalProblems(local_view(nm, 0))
        lam, u = lp.floor(np.zeros((3, 3)), 0.3)
        assert u <= 1e-7 and abs(u) <= 1e-6

    def test_floor_soundness(self, desk_scn, rng):
        nm = mdl.normalize(desk_scn)
        lp = LocalProblems(local_view(nm, 0))
        R = random_psd(rng, 3, scale=5.0)
        radius = 0.5 * np.linalg.norm(nm.g_bar[0])
        _, u = lp.floor(R, radius**2)
        z = rng.standard_normal((10_000, 3)) + 1j * rng.standard_normal((10_000, 3))
        z *= (radius * rng.uniform(size=10_000) ** (1 / 6) / np.linalg.norm(z, axis=1))[:, None]
        g = nm.g_bar[0][None] + z
        vals = np.real(np.einsum("sn,nl,sl->s", g.conj(), R, g))
        assert vals.min() >= u - 1e-6 * max(1.0, abs(u))

    def test_block2_zero_design(self, desk_scn):
        nm = mdl.normalize(desk_scn)
        lp = LocalProblems(local_view(nm, 0))
        loc = LocalState(W=np.zeros((2, 2, 3, 3)), R=np.zeros((2, 3, 3)), delta=float(nm.beta1[0]),
                         s=float(nm.beta1[0] ** 2), e=np.zeros((2, 4)), t=np.zeros((2, 4)),
                         u=np.zeros((2, 2)), Vhat=np.zeros((4, 2)), xi=np.full((2, 2), 0.3),
                         psi=np.zeros((2, 2)), lam=np.zeros(2))
        out = lp.solve_block2(loc)
        np.testing.assert_allclose(out.xi, 0, atol=1e-6)

    def test_fim_bridge(self, desk_scn, rng):
        """Per-transmitter blocks exchanged as V sum to the centralized FIM."""
        nm = mdl.normalize(desk_scn)
        W = np.array([[[random_psd(rng, 3, 1) for _ in range(2)] for _ in range(2)] for _ in range(2)])
        R = np.array([[random_psd(rng, 3) for _ in range(2)] for _ in range(2)])
        F = sum(fim_m(nm, W, R, m) for m in range(2))
        ref = centralized_fim(nm.to_watts(W, R), desk_scn).F
        assert np.abs(F - ref).max() <= 1e-10 * np.abs(ref).max()


class TestMessages:
    def test_sizes(self):
        s = message_sizes(2, 2)
        assert s == {"locals_up": 26, "globals_down": 26, "duals_local": 0}
        assert exchanged_per_iteration(3, 2) == 2 * 3 * (4 * 3 * 2 + 10)

    def test_records(self):
        recs = iteration_messages(2, 1, 4)
        assert len(recs) == 6 and {r["payload_kind"] for r in recs} == {"locals_up", "globals_down", "duals_local"}
        assert all(r["iter"] == 4 for r in recs)

    def test_central_ledger(self):
        assert centralized_overhead(3, 4, 2, 1024) == 2 * (3 * 4 * 1024 + 9 * 2 * 4)
        assert exchanged_per_iteration(3, 2) < centralized_overhead(3, 4, 2, 1024)


class TestAlgorithm2:
    def test_converges(self, decentral_run, desk_scn):
        state, sol = decentral_run
        assert state.converged
        assert max(state.records[-1]["residuals"].values()) <= 1e-3
        rep = audit_solution(sol, desk_scn, n_samples=2000)
        assert rep["power_ok"] and rep["rate_ok"] and rep["leak_ok"]

    def test_not_better_than_central(self, decentral_run, central_run):
        assert decentral_run[1].extras["history_W"][-1] >= central_run[1].extras["history_W"][-1] * (1 - 1e-4)

    def test_message_file(self, desk_scn, tmp_path):
        path = tmp_path / "msg.jsonl"
        state, sol = run_algorithm2(desk_scn, max_iter=2, options=AdmmOptions(message_path=str(path)))
        lines = path.read_text().splitlines()
        assert len(lines) == 3 * 2 * state.iterations
        assert sol.extras["messages_per_iter"] == exchanged_per_iteration(2, 2)

    def test_single_bs_matches_central(self):
        scn = build_scenario(SystemConfig(M=1, N=3, K=2, L=256, beta_nlos=(0.2,), sensing_prior=True),
                             GeometrySpec.paper(1))
        _, s1 = run_algorithm1(scn)
        _, s2 = run_algorithm2(scn)
        p1, p2 = s1.extras["history_W"][-1], s2.extras["history_W"][-1]
        assert abs(p1 - p2) <= 1e-4 * p1
