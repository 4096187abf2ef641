import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isacsec.errors import InvalidArgument, InvalidGeometry
from isacsec.metrics import BeamformingSolution, leakage_rate
from isacsec.uncertainty import (
    angle_radius,
    crb_constants,
    csi_radius,
    delta_consistency,
    nlos_radius,
    sample_ball_perturbations,
    uncertainty_model,
    worst_case_leakage_oracle,
)


class TestAngleRadius:
    def test_zero(self):
        assert angle_radius(np.zeros((2, 2)), 10.0) == 0.0

    def test_simple(self):
        np.testing.assert_allclose(angle_radius(np.diag([2.0, 2.0]), 6.0), 1.0)

    def test_default_prior_bs1(self):
        np.testing.assert_allclose(angle_radius(np.diag([0.25, 0.25]), 27.04), 0.07845, atol=5e-6)

    def test_bad_distance(self):
        with pytest.raises(InvalidGeometry):
            angle_radius(np.eye(2), 0.0)


class TestCsiRadius:
    alpha, kappa, beta, theta, d = 0.3 + 0.4j, 10.0, 0.2, 1.0, 20.0

    def test_zero_covariance(self):
        r = csi_radius(self.alpha, self.kappa, self.beta, self.theta, self.d, 4, np.zeros((2, 2)))
        np.testing.assert_allclose(r, 0.5 * 0.2 / np.sqrt(11.0))

    def test_single_antenna(self):
        r = csi_radius(self.alpha, self.kappa, self.beta, self.theta, self.d, 1, np.eye(2))
        np.testing.assert_allclose(r, nlos_radius(self.alpha, self.kappa, self.beta))

    def test_no_los(self):
        r = csi_radius(self.alpha, 0.0, self.beta, self.theta, self.d, 4, np.eye(2))
        np.testing.assert_allclose(r, abs(self.alpha) * self.beta)

    def test_hand_computed(self):
        Q = np.diag([0.1, 0.3])
        N = 4
        first = abs(self.alpha) * self.beta / np.sqrt(1 + self.kappa)
        second = (3 * np.pi * abs(self.alpha) * np.sin(self.theta) / self.d
                  * np.sqrt(self.kappa / (1 + self.kappa)) * np.sqrt(N * (N - 1) * (2 * N - 1) / 6) * np.sqrt(0.4))
        np.testing.assert_allclose(csi_radius(self.alpha, self.kappa, self.beta, self.theta, self.d, N, Q),
                                   first + second)

    def test_first_order_steering_error(self):
        """For small angle errors the radius matches the actual LoS steering error."""
        N, Q = 4, np.diag([1e-4, 1e-4])
        w = np.sqrt(self.kappa / (1 + self.kappa))
        dtheta = angle_radius(Q, self.d)
        n = np.arange(N)
        errs = [np.linalg.norm(self.alpha * w * (np.exp(1j * np.pi * n * np.cos(self.theta + eps))
                                                 - np.exp(1j * np.pi * n * np.cos(self.theta))))
                for eps in np.linspace(-dtheta, dtheta, 41)]
        bound = csi_radius(self.alpha, self.kappa, 0.0, self.theta, self.d, N, Q)
        np.testing.assert_allclose(max(errs) / bound, 1.0, atol=2e-3)

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            csi_radius(1.0, -1.0, 0.1, 1.0, 1.0, 2, np.eye(2))
        with pytest.raises(InvalidGeometry):
            csi_radius(1.0, 1.0, 0.1, 1.0, 0.0, 2, np.eye(2))

    @settings(max_examples=100, deadline=None)
    @given(tr=st.floats(0.0, 50.0), extra=st.floats(0.0, 2.0), theta=st.floats(0.05, 3.09))
    def test_crb_constants_equivalence(self, tr, extra, theta):
        """``delta >= radius(Q)`` iff ``tr Q <= a^2 (delta - b)^2`` for ``delta >= b``."""
        a, b = crb_constants(self.alpha, self.kappa, self.beta, theta, self.d, 4)
        Q = np.diag([tr / 2, tr / 2])
        r = csi_radius(self.alpha, self.kappa, self.beta, theta, self.d, 4, Q)
        delta = b + extra
        # compare on the radius scale so both sides share one tolerance
        lhs = delta >= r - 1e-9
        rhs = np.sqrt(tr) / a <= (delta - b) + 1e-9
        assert lhs == rhs

    def test_crb_constants_degenerate(self):
        a, b = crb_constants(self.alpha, self.kappa, self.beta, self.theta, self.d, 1)
        assert np.isinf(a) and b > 0


class TestDeltaConsistency:
    def test_boundary(self):
        assert delta_consistency([1, 1, 1], 3.0)

    def test_violation(self):
        assert not delta_consistency([1, 1, 1], 2.9)

    def test_radius_check(self):
        assert not delta_consistency([1, 1], 5.0, beta=[0.5, 1.5])

    def test_model_shapes(self, desk_scn):
        um = uncertainty_model(desk_scn, 0.5 * np.eye(2))
        assert um.beta_g.shape == (2, 2) and um.beta_theta.shape == (2, 2)
        np.testing.assert_allclose(um.beta_g_stacked, np.linalg.norm(um.beta_g, axis=1))


class TestBallSampler:
    @pytest.mark.parametrize("stacked", [True, False])
    def test_inside_ball(self, stacked):
        beta = 0.7 if stacked else np.array([0.3, 0.9])
        d = sample_ball_perturbations(beta, 2, 3, 2000, 0, stacked)
        if stacked:
            assert np.linalg.norm(d.reshape(2000, -1), axis=1).max() <= 0.7 + 1e-12
        else:
            assert np.all(np.linalg.norm(d, axis=2) <= beta + 1e-12)

    def test_prefix_stable(self):
        a = sample_ball_perturbations(0.5, 2, 3, 100, 4, True)
        b = sample_ball_perturbations(0.5, 2, 3, 1000, 4, True)
        np.testing.assert_array_equal(a, b[:100])


class TestLeakageOracle:
    def _solution(self, scn, rng):
        g = scn.channels.g_bar
        sol = BeamformingSolution.zeros(2, 2, 3)
        sol.W[1, 0, 0] = 1e-3 * np.outer(g[0], g[0].conj()) / np.linalg.norm(g[0]) ** 2
        return sol

    def test_zero_radius_is_nominal(self, desk_scn, rng):
        sol = self._solution(desk_scn, rng)
        g = desk_scn.channels.g_bar
        val = worst_case_leakage_oracle(sol, g, 0.0, 1, 0, 0, 100, desk_scn)
        assert val == leakage_rate(sol, g, desk_scn, 1, 0, 0)

    def test_aligned_growth(self, desk_scn, rng):
        sol = self._solution(desk_scn, rng)
        g = desk_scn.channels.g_bar
        nominal = leakage_rate(sol, g, desk_scn, 1, 0, 0)
        beta = 0.2 * np.linalg.norm(g)
        val = worst_case_leakage_oracle(sol, g, beta, 1, 0, 0, 2000, desk_scn)
        assert val >= nominal
        # with R = 0 the maximizer scales g_0 along itself
        g_star = g.copy()
        g_star[0] = g[0] * (1 + beta / np.linalg.norm(g[0]))
        np.testing.assert_allclose(val, leakage_rate(sol, g_star, desk_scn, 1, 0, 0), rtol=1e-6)

    def test_monotone_in_radius(self, desk_scn, rng):
        sol = self._solution(desk_scn, rng)
        g = desk_scn.channels.g_bar
        vals = [worst_case_leakage_oracle(sol, g, b, 1, 0, 0, 500, desk_scn) for b in (1e-9, 1e-8, 1e-7)]
        assert vals[0] <= vals[1] <= vals[2]

    def test_negative_radius(self, desk_scn, rng):
        with pytest.raises(InvalidArgument):
            worst_case_leakage_oracle(self._solution(desk_scn, rng), desk_scn.channels.g_bar,
                                      np.array([-1.0, 1.0]), 1, 0, 0, 10, desk_scn)
