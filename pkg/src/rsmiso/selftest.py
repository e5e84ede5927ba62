"""Fast oracle and invariant checks behind ``rsmiso selftest``."""

from __future__ import annotations

import numpy as np

from .awamse_rs import (
    fixed_index_objective,
    init_precoder,
    precoder_candidate,
    refresh_state,
    run_awamse_rs,
)
from .baselines import mmse_precoder
from .bounds import (
    FilterWeightState,
    PrecoderSet,
    average_mse,
    awamse,
    link_statistics,
    mmse_filters,
    optimal_weights,
    rate_lower_bounds,
)
from .channel import (
    CovarianceModel,
    EstimateSet,
    PilotMatrix,
    SystemConfig,
    crandn,
    lmmse_estimate,
    synth_covariance,
)


def random_instance(rng, M, K, T_dl=None, P_dl=None):
    """Random estimates with exponential covariances and random precoders."""
    T_dl = T_dl or max(1, M // 2)
    P_dl = P_dl or 10 ** rng.uniform(0, 3)
    C = synth_covariance(M, CovarianceModel("exponential", rng.uniform(0, 0.9)))
    Phi = np.linalg.qr(crandn(rng, M, T_dl))[0]
    ests = []
    for _ in range(K):
        lam, V = np.linalg.eigh(C)
        h = (V * np.sqrt(lam)) @ crandn(rng, M)
        y = Phi.conj().T @ h + crandn(rng, T_dl, var=1 / P_dl)
        ests.append(lmmse_estimate(C, PilotMatrix(Phi), 1 / P_dl, y))
    est = EstimateSet.from_estimates(ests, np.full(K, 1 / P_dl))
    P = PrecoderSet(crandn(rng, M), crandn(rng, M, K)).normalized()
    return est, P


def check_identities(n=200, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        est, P = random_instance(rng, int(rng.choice([2, 4, 8])), int(rng.integers(1, 5)))
        g_c, g_p = mmse_filters(est, P)
        state = FilterWeightState(g_c, g_p, np.ones(est.K), np.ones(est.K))
        mses = average_mse(est, P, state)
        state.u_c, state.u_p = optimal_weights(*mses)
        xi_c, xi_p = awamse(state, mses)
        R_c, R_p = rate_lower_bounds(link_statistics(est, P))
        worst = max(worst, np.abs(xi_c - (1 - R_c)).max(), np.abs(xi_p - (1 - R_p)).max())
    return worst < 1e-10, f"max |xi - (1 - R)| = {worst:.2e}"


def _fd_gradient(f, P: PrecoderSet, h=1e-6):
    X = P.matrix
    grad = np.zeros(X.shape, dtype=complex)
    for idx in np.ndindex(X.shape):
        for unit in (1.0, 1j):
            Xp, Xm = X.copy(), X.copy()
            Xp[idx] += h * unit
            Xm[idx] -= h * unit
            d = (f(PrecoderSet.from_matrix(Xp)) - f(PrecoderSet.from_matrix(Xm))) / (2 * h)
            grad[idx] += d * unit
    return grad


def check_stationarity(n=10, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        est, P0 = random_instance(rng, 4, 3)
        state = refresh_state(est, P0)
        k_c = int(rng.integers(est.K))

        def f(P):
            return fixed_index_objective(k_c, est, P, state)

        P = precoder_candidate(k_c, est, state)
        ratio = np.linalg.norm(_fd_gradient(f, P)) / np.linalg.norm(_fd_gradient(f, P0))
        worst = max(worst, ratio)
    return worst < 1e-6, f"max relative gradient residual = {worst:.2e}"


def check_lmmse_hand_case():
    y = np.array([0.8 - 0.3j])
    e = lmmse_estimate(np.eye(2), PilotMatrix(np.array([[1.0], [0.0]], dtype=complex)), 1.0, y)
    ok = (np.allclose(e.h_hat, [y[0] / 2, 0], atol=1e-12, rtol=0)
          and np.allclose(e.C_err, np.diag([0.5, 1.0]), atol=1e-12, rtol=0))
    return ok, "2x2 LMMSE estimate and error covariance"


def check_descent(n=10, seed=3):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        est, _ = random_instance(rng, 8, 4, T_dl=2, P_dl=100.0)
        cfg = SystemConfig(M=8, K=4, T_dl=2, P_dl=100.0)
        P0 = init_precoder(est, 0.5, mmse_precoder(est, cfg))
        P, trace = run_awamse_rs(cfg, est, P0)
        seq = [trace.initial_objective] + trace.objective_per_iter
        if np.any(np.diff(seq) > 0) or abs(P.power - 1) > 1e-9:
            return False, "objective increased or power constraint violated"
    return True, f"{n} runs monotone with unit power"


def run_checks():
    """Return ``(name, passed, detail)`` for every check."""
    checks = [
        ("rate-awamse identity", check_identities),
        ("closed-form stationarity", check_stationarity),
        ("lmmse hand case", check_lmmse_hand_case),
        ("monotone descent", check_descent),
    ]
    return [(name, *fn()) for name, fn in checks]
