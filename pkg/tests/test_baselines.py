import numpy as np
import pytest

from isacsec import model as mdl
from isacsec.audit import audit_solution
from isacsec.baselines import (
    BaselineConfig,
    best_sensing_stage1,
    mse_grid,
    run_baseline1,
    run_baseline2,
)
from isacsec.central import trace_q
from isacsec.errors import InvalidArgument, ScenarioInfeasible


@pytest.fixture(scope="module")
def baseline1_run(desk_scn):
    return run_baseline1(desk_scn)


class TestConfig:
    def test_valid(self):
        BaselineConfig("fixed_sensing", fixed_mse_target=0.1)
        BaselineConfig("separated_two_stage", stage1_power_policy=0.5)

    @pytest.mark.parametrize("kw", [dict(scheme="other"), dict(scheme="fixed_sensing"),
                                    dict(scheme="fixed_sensing", fixed_mse_target=-1.0),
                                    dict(scheme="separated_two_stage", stage1_power_policy=1.5)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidArgument):
            BaselineConfig(**kw)

    def test_grid(self):
        g = mse_grid(0.5)
        assert len(g) == 12
        np.testing.assert_allclose([g[0], g[-1]], [0.05, 5.0])
        assert np.all(np.diff(np.log(g)) > 0)
        with pytest.raises(InvalidArgument):
            mse_grid(0.0)


class TestSeparatedDesign:
    def test_stage1_saturates_budget(self, desk_scn):
        nm = mdl.normalize(desk_scn)
        W1, R1 = best_sensing_stage1(nm)
        S1 = W1.sum(axis=1) + R1
        np.testing.assert_allclose(np.real(np.trace(S1, axis1=-2, axis2=-1)), nm.p_max, rtol=1e-4)

    def test_best_sensing(self, baseline1_run, central_run, decentral_run):
        _, b1 = baseline1_run
        assert b1.extras["stage1_trace_Q"] <= central_run[1].extras["trace_Q2"] * (1 + 1e-4)
        assert b1.extras["stage1_trace_Q"] <= decentral_run[1].extras["trace_Q2"] * (1 + 1e-4)

    def test_costs_more_than_joint(self, baseline1_run, central_run):
        assert baseline1_run[1].extras["history_W"][-1] >= central_run[1].extras["history_W"][-1]

    def test_audits(self, baseline1_run, desk_scn):
        rep = audit_solution(baseline1_run[1], desk_scn, n_samples=2000)
        assert rep["power_ok"] and rep["rate_ok"] and rep["leak_ok"]


class TestFixedSensing:
    def test_bad_target(self, desk_scn):
        with pytest.raises(InvalidArgument):
            run_baseline2(desk_scn, 0.0)

    def test_matches_adaptive_point(self, desk_scn, decentral_run):
        _, dec = decentral_run
        _, b2 = run_baseline2(desk_scn, dec.extras["trace_Q2"])
        assert b2.extras["trace_Q2"] <= dec.extras["trace_Q2"] * (1 + 1e-4)
        np.testing.assert_allclose(b2.extras["history_W"][-1], dec.extras["history_W"][-1], rtol=0.02)
        rep = audit_solution(b2, desk_scn, n_samples=2000)
        assert rep["power_ok"] and rep["rate_ok"] and rep["leak_ok"]

    def test_strict_target_costs_more(self, desk_scn, decentral_run):
        _, dec = decentral_run
        try:
            _, b2 = run_baseline2(desk_scn, 0.1 * dec.extras["trace_Q2"])
        except ScenarioInfeasible:
            return
        assert b2.extras["history_W"][-1] >= dec.extras["history_W"][-1]
        nm = mdl.normalize(desk_scn)
        S1 = (b2.W[0].sum(axis=1) + b2.R[0]) / nm.p_unit
        assert trace_q(nm, S1) <= 0.1 * dec.extras["trace_Q2"] * (1 + 1e-4)
