"""
Lower bounds, MMSE filters and the rate-AWAMSE identity
=======================================================

Estimate a few channels from downlink pilots, pick a random precoder and
check that the weighted MSE at the MMSE filters and weights equals one
minus the lower-bound rate, stream by stream.
"""

import numpy as np

from rsmiso import (
    CovarianceModel,
    EstimateSet,
    FilterWeightState,
    PrecoderSet,
    average_mse,
    awamse,
    draw_channel,
    lmmse_estimate,
    link_statistics,
    make_pilot_matrix,
    mmse_filters,
    observe,
    optimal_weights,
    rate_lower_bounds,
    synth_covariance,
)

rng = np.random.default_rng(7)
M, K, T_dl, P_dl = 8, 3, 2, 100.0
sigma2 = 1 / P_dl

###############################################################################
# Training: every user observes the same ``T_dl`` pilots through its own
# channel and forms an LMMSE estimate.
pilots = make_pilot_matrix(M, T_dl)
ests = []
for k in range(K):
    C = synth_covariance(M, CovarianceModel("exponential", rho=0.7), rng)
    h = draw_channel(C, rng).h
    ests.append(lmmse_estimate(C, pilots, sigma2, observe(pilots, h, sigma2, rng)))
est = EstimateSet.from_estimates(ests, np.full(K, sigma2))
print("trace of error covariances:", np.round(est.C_err.trace(axis1=1, axis2=2).real, 3))

###############################################################################
# A random unit-power precoder: common stream plus one private stream per user.
P = PrecoderSet(rng.standard_normal(M) + 1j * rng.standard_normal(M),
                rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))).normalized()

R_c, R_p = rate_lower_bounds(link_statistics(est, P))
g_c, g_p = mmse_filters(est, P)
state = FilterWeightState(g_c, g_p, np.ones(K), np.ones(K))
mses = average_mse(est, P, state)
state.u_c, state.u_p = optimal_weights(*mses)
xi_c, xi_p = awamse(state, mses)

print("private rates  ", np.round(R_p, 4))
print("1 - xi private ", np.round(1 - xi_p, 4))
print("max deviation   %.1e" % max(np.abs(xi_c - (1 - R_c)).max(), np.abs(xi_p - (1 - R_p)).max()))
