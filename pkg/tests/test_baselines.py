import numpy as np
import pytest

from conftest import make_instance
from rsmiso.baselines import awamse_no_rs, mmse_precoder
from rsmiso.bounds import PrecoderSet, sum_rate_lower_bound
from rsmiso.channel import CovarianceModel, EstimateSet, SystemConfig
from rsmiso.sim import SweepSpec, run_sweep


class TestMmse:
    def test_matched_filter_limit(self, rng):
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        est = EstimateSet(h[:, None], np.zeros((1, 4, 4)), np.array([1e-12]))
        p = mmse_precoder(est, SystemConfig(M=4, K=1, T_dl=1, P_dl=1e12)).P_p[:, 0]
        cos = abs(np.vdot(h, p)) / np.linalg.norm(h)
        assert np.arccos(min(cos, 1.0)) < 1e-6

    def test_scalar_plug_in(self):
        # 2 / (4 + 1 + 1) = 1/3 before normalization, so delta = 3
        est = EstimateSet(np.array([[2.0]]), np.array([[[1.0]]]), np.array([1.0]))
        P, params = mmse_precoder(est, SystemConfig(M=1, K=1, T_dl=1, P_dl=1.0), return_params=True)
        assert params.eta == 1.0
        assert params.delta == pytest.approx(3.0, rel=1e-14)
        assert P.P_p[0, 0] == pytest.approx(1.0, rel=1e-14)

    def test_unit_norm_no_common(self, rng):
        for K in (1, 3, 6):
            est, _ = make_instance(rng, 6, K)
            P = mmse_precoder(est, SystemConfig(M=6, K=K, T_dl=3, P_dl=1 / est.sigma2[0]))
            assert abs(np.linalg.norm(P.P_p) - 1) < 1e-12
            assert not np.any(P.p_c)

    def test_matches_direct_formula(self, rng):
        for K in (1, 2, 5):
            est, _ = make_instance(rng, 6, K, T_dl=3)
            cfg = SystemConfig(M=6, K=K, T_dl=3, P_dl=1 / est.sigma2[0])
            H = est.H_hat
            direct = np.linalg.solve(H @ H.conj().T + est.C_err.sum(0) + 6 / cfg.P_dl * np.eye(6), H)
            np.testing.assert_allclose(mmse_precoder(est, cfg).P_p, direct / np.linalg.norm(direct),
                                       atol=1e-10)

    def test_deterministic(self, rng):
        est, _ = make_instance(rng, 5, 3)
        cfg = SystemConfig(M=5, K=3, T_dl=2)
        np.testing.assert_array_equal(mmse_precoder(est, cfg).P_p, mmse_precoder(est, cfg).P_p)


class TestNoRs:
    @pytest.mark.parametrize("seed", range(8))
    def test_descent_and_no_common(self, seed):
        rng = np.random.default_rng(seed)
        est, _ = make_instance(rng, 6, 4, T_dl=2)
        cfg = SystemConfig(M=6, K=4, T_dl=2, P_dl=1 / est.sigma2[0])
        P, trace = awamse_no_rs(cfg, est, mmse_precoder(est, cfg))
        seq = np.array([trace.initial_objective] + trace.objective_per_iter)
        assert np.all(np.diff(seq) <= 0)
        assert not np.any(P.p_c)
        assert P.power == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_single_user_beats_mmse(self, seed):
        rng = np.random.default_rng(100 + seed)
        est, _ = make_instance(rng, 4, 1, T_dl=1)
        cfg = SystemConfig(M=4, K=1, T_dl=1, P_dl=1 / est.sigma2[0])
        Pm = mmse_precoder(est, cfg)
        P, _ = awamse_no_rs(cfg, est, Pm)
        assert sum_rate_lower_bound(est, P) >= sum_rate_lower_bound(est, Pm) - 1e-9

    def test_common_input_is_dropped(self, rng):
        est, P0 = make_instance(rng, 4, 2)
        P, _ = awamse_no_rs(SystemConfig(M=4, K=2, T_dl=2), est, P0.scaled(0.9))
        assert not np.any(P.p_c)

    def test_full_dof_with_enough_pilots(self):
        spec = SweepSpec(M=4, K=2, T_dl=4, n_trials=10, powers_db=(30.0, 35.0, 40.0),
                         methods=("awamse_no_rs",), covariance=CovarianceModel("identity"), seed=5)
        agg = run_sweep(spec)
        assert agg.slopes["awamse_no_rs"] >= 0.8 * spec.K
        assert all(r.common_rate == 0.0 for r in agg.trials)
