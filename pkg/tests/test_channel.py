import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsmiso.channel import (
    CovarianceModel,
    EstimateSet,
    PilotMatrix,
    SystemConfig,
    crandn,
    draw_channel,
    estimate_users,
    lmmse_estimate,
    make_pilot_matrix,
    observe,
    synth_covariance,
)


class TestSystemConfig:
    def test_noise_is_inverse_power(self):
        cfg = SystemConfig(M=4, K=3, T_dl=2, P_dl=200.0)
        np.testing.assert_allclose(cfg.sigma2, np.full(3, 1 / 200.0))

    @pytest.mark.parametrize("kw", [dict(T_dl=0), dict(T_dl=20), dict(P_dl=0.0),
                                    dict(alpha_c=1.5), dict(K=0), dict(tol=0.0)])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            SystemConfig(**kw)


class TestSynthCovariance:
    def test_identity(self):
        C = synth_covariance(3, CovarianceModel("identity"))
        np.testing.assert_array_equal(C, np.eye(3))
        assert np.trace(C).real == 3

    def test_exponential_2x2(self):
        C = synth_covariance(2, CovarianceModel("exponential", rho=0.5))
        np.testing.assert_allclose(C, [[1, 0.5], [0.5, 1]], atol=1e-15)

    def test_rank_limited_has_exact_rank(self, rng):
        C = synth_covariance(8, CovarianceModel("rank-limited", rank=2, decay=0.5), rng)
        lam = np.linalg.eigvalsh(C)
        tr = np.trace(C).real
        assert np.count_nonzero(lam > 1e-8 * tr) == 2
        assert tr == pytest.approx(8.0, abs=1e-10)

    @pytest.mark.parametrize("rho", [1.0, -0.1, 1.5])
    def test_rejects_rho(self, rho):
        with pytest.raises(ValueError):
            synth_covariance(4, CovarianceModel("exponential", rho=rho))

    def test_rejects_rank_above_m(self, rng):
        with pytest.raises(ValueError):
            synth_covariance(3, CovarianceModel("rank-limited", rank=4), rng)

    @pytest.mark.parametrize("model", [CovarianceModel("exponential", rho=0.9),
                                       CovarianceModel("rank-limited", rank=3, decay=0.3),
                                       CovarianceModel("identity")])
    def test_hermitian_psd_trace_m(self, model, rng):
        C = synth_covariance(6, model, rng)
        assert np.abs(C - C.conj().T).max() < 1e-12
        assert np.linalg.eigvalsh(C).min() >= -1e-10
        assert np.trace(C).real == pytest.approx(6.0, abs=1e-10)


class TestPilots:
    def test_full_dft_is_unitary(self):
        Phi = make_pilot_matrix(4, 4).Phi
        np.testing.assert_allclose(Phi.conj().T @ Phi, np.eye(4), atol=1e-14)

    def test_truncated_dft_orthonormal(self):
        Phi = make_pilot_matrix(4, 2).Phi
        assert Phi.shape == (4, 2)
        np.testing.assert_allclose(Phi.conj().T @ Phi, np.eye(2), atol=1e-14)

    def test_random_unitary_unit_norm(self, rng):
        Phi = make_pilot_matrix(16, 3, "random-unitary", rng).Phi
        np.testing.assert_allclose(np.linalg.norm(Phi, axis=0), 1.0, atol=1e-12)

    def test_too_many_pilots(self):
        with pytest.raises(ValueError):
            make_pilot_matrix(4, 5)


class TestObserve:
    def test_zero_channel_vanishing_noise(self, rng):
        y = observe(make_pilot_matrix(4, 2), np.zeros(4, complex), 1e-30, rng)
        assert np.abs(y).max() < 1e-10

    def test_selector_pilot(self, rng):
        Phi = PilotMatrix(np.array([[1.0], [0.0]], dtype=complex))
        y = observe(Phi, np.array([3.0, 7.0], dtype=complex), 1e-30, rng)
        np.testing.assert_allclose(y, [3.0], atol=1e-10)

    def test_noise_covariance(self):
        rng = np.random.default_rng(7)
        Phi = make_pilot_matrix(4, 3)
        h = np.zeros(4, complex)
        Y = np.array([observe(Phi, h, 1.0, rng) for _ in range(100_000)])
        emp = Y.T @ Y.conj() / len(Y)
        assert np.abs(emp - np.eye(3)).max() < 0.05

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            observe(make_pilot_matrix(4, 2), np.zeros(3, complex), 1.0, rng)


class TestLmmse:
    def test_zero_covariance(self):
        e = lmmse_estimate(np.zeros((3, 3), complex), make_pilot_matrix(3, 2), 0.1,
                           np.array([1.0, -2.0j]))
        np.testing.assert_array_equal(e.h_hat, 0)
        np.testing.assert_array_equal(e.C_err, 0)

    def test_hand_computed_2x2(self):
        # C = I, Phi = e1, sigma2 = 1: gain 1 / (1 + 1), error variance 1/2 then 1
        y1 = 0.8 - 0.3j
        e = lmmse_estimate(np.eye(2), PilotMatrix(np.array([[1.0], [0.0]], complex)), 1.0,
                           np.array([y1]))
        np.testing.assert_allclose(e.h_hat, [y1 / 2, 0], atol=1e-12, rtol=0)
        np.testing.assert_allclose(e.C_err, np.diag([0.5, 1.0]), atol=1e-12, rtol=0)

    def test_noiseless_full_observation(self, rng):
        y = crandn(rng, 3)
        e = lmmse_estimate(np.eye(3), PilotMatrix(np.eye(3, dtype=complex)), 1e-12, y)
        np.testing.assert_allclose(e.h_hat, y, atol=1e-6)
        assert np.abs(e.C_err).max() < 1e-6

    def test_rejects_nonpositive_noise(self):
        with pytest.raises(ValueError):
            lmmse_estimate(np.eye(2), make_pilot_matrix(2, 1), 0.0, np.zeros(1))

    def test_error_covariance_bounded_by_prior(self, rng):
        C = synth_covariance(6, CovarianceModel("rank-limited", rank=4, decay=0.6), rng)
        e = lmmse_estimate(C, make_pilot_matrix(6, 2), 0.3, crandn(rng, 2))
        assert np.abs(e.C_err - e.C_err.conj().T).max() < 1e-10
        assert np.linalg.eigvalsh(e.C_err).min() >= -1e-10
        assert np.linalg.eigvalsh(C - e.C_err).min() >= -1e-8

    def test_monte_carlo_orthogonality_and_consistency(self):
        rng = np.random.default_rng(11)
        M, T, s2 = 4, 2, 0.5
        C = synth_covariance(M, CovarianceModel("exponential", rho=0.6))
        Phi = make_pilot_matrix(M, T)
        n = 20_000
        E = np.empty((n, M), complex)
        Hh = np.empty((n, M), complex)
        for i in range(n):
            h = draw_channel(C, rng).h
            e = lmmse_estimate(C, Phi, s2, observe(Phi, h, s2, rng))
            E[i], Hh[i] = h - e.h_hat, e.h_hat
        C_err = e.C_err
        cross = E.T @ Hh.conj() / n
        assert np.abs(cross).max() < 5e-2 * np.trace(C).real / M
        emp = E.T @ E.conj() / n
        assert np.abs(emp - C_err).max() < 0.05 * np.trace(C_err).real / M

    def test_reproducible_given_seed(self):
        C = synth_covariance(4, CovarianceModel("exponential", rho=0.3))
        Phi = make_pilot_matrix(4, 2)

        def once():
            r = np.random.default_rng(99)
            h = draw_channel(C, r).h
            return lmmse_estimate(C, Phi, 0.2, observe(Phi, h, 0.2, r))

        a, b = once(), once()
        np.testing.assert_array_equal(a.h_hat, b.h_hat)
        np.testing.assert_array_equal(a.C_err, b.C_err)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s_a=st.floats(1e-4, 10.0), factor=st.floats(1.0, 100.0),
       T=st.integers(1, 5))
def test_error_trace_monotone_in_noise(seed, s_a, factor, T):
    rng = np.random.default_rng(seed)
    C = synth_covariance(5, CovarianceModel("rank-limited", rank=3, decay=0.7), rng)
    Phi = make_pilot_matrix(5, T, "random-unitary", rng)
    y = np.zeros(T, complex)
    lo = lmmse_estimate(C, Phi, s_a, y).C_err
    hi = lmmse_estimate(C, Phi, s_a * factor, y).C_err
    assert np.trace(lo).real <= np.trace(hi).real + 1e-10


def test_estimate_set_stacks_users(rng):
    C = synth_covariance(4, CovarianceModel("exponential", rho=0.5))
    Phi = make_pilot_matrix(4, 2)
    H = [draw_channel(C, rng).h for _ in range(3)]
    noise = crandn(rng, 3, 2)
    est = estimate_users([C] * 3, H, Phi, np.full(3, 0.1), noise)
    assert est.H_hat.shape == (4, 3) and est.C_err.shape == (3, 4, 4)
    y0 = Phi.Phi.conj().T @ H[0] + np.sqrt(0.1) * noise[0]
    ref = lmmse_estimate(C, Phi, 0.1, y0)
    np.testing.assert_allclose(est.H_hat[:, 0], ref.h_hat, atol=1e-14)
    np.testing.assert_allclose(est.R[1], np.outer(est.H_hat[:, 1], est.H_hat[:, 1].conj()) + est.C_err[1])
    assert isinstance(est, EstimateSet)
