"""
Convergence of the alternating AWAMSE iterations
================================================

Run the algorithm on a handful of channel draws, print the objective
trajectory of one run and the distribution of iteration counts.
"""

import numpy as np

from rsmiso import (
    CovarianceModel,
    SystemConfig,
    estimate_users,
    draw_channel,
    init_precoder,
    make_pilot_matrix,
    mmse_precoder,
    run_awamse_rs,
    synth_covariance,
)

cfg = SystemConfig(M=16, K=5, T_dl=3, P_dl=1e3)
rng = np.random.default_rng(3)
iters, reasons = [], []
for trial in range(20):
    covs = [synth_covariance(cfg.M, CovarianceModel("exponential", rho=0.7), rng) for _ in range(cfg.K)]
    chans = [draw_channel(C, rng).h for C in covs]
    noise = rng.standard_normal((cfg.K, cfg.T_dl)) + 1j * rng.standard_normal((cfg.K, cfg.T_dl))
    est = estimate_users(covs, chans, make_pilot_matrix(cfg.M, cfg.T_dl), cfg.sigma2, noise / np.sqrt(2))
    P, trace = run_awamse_rs(cfg, est, init_precoder(est, cfg.alpha_c, mmse_precoder(est, cfg)))
    iters.append(trace.iterations)
    reasons.append(trace.converged_by)
    if trial == 0:
        print("objective, first run:", np.round([trace.initial_objective] + trace.objective_per_iter[:8], 4))

###############################################################################
# The objective never increases; runs stop on a small change, on a failed
# improvement step, or at the iteration cap.
print("iterations: median %d, max %d" % (np.median(iters), max(iters)))
for r in sorted(set(reasons)):
    print(f"  {r:15s} {reasons.count(r)}")
