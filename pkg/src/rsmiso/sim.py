"""Monte-Carlo sweeps over transmit power for the precoding methods.

A trial fixes one realization of covariances, channels, pilots and
unit-variance training noise, then sweeps the power grid; every method
at a grid point sees the same channel estimates.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .awamse_rs import init_precoder, run_awamse_rs
from .baselines import awamse_no_rs, mmse_precoder
from .bounds import genie_sum_rate, link_statistics, rate_lower_bounds
from .channel import (
    CovarianceModel,
    SystemConfig,
    crandn,
    draw_channel,
    estimate_users,
    make_pilot_matrix,
    synth_covariance,
)
from .errors import ContractError, NumericalError, SweepAborted

__all__ = [
    "METHODS",
    "SLOPE_WINDOW_DB",
    "ACTIVE_THRESHOLD",
    "SweepSpec",
    "TrialResult",
    "AggregateResult",
    "run_trial",
    "run_sweep",
    "aggregate",
    "high_snr_slope",
    "active_stream_count",
]

METHODS = ("awamse_rs", "awamse_no_rs", "mmse")
SLOPE_WINDOW_DB = 30.0
ACTIVE_THRESHOLD = 0.01
MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class SweepSpec:
    """Everything that determines a sweep, including the seed."""

    M: int = 16
    K: int = 5
    T_dl: int = 3
    alpha_c: float = 0.5
    powers_db: tuple = tuple(float(p) for p in range(-10, 45, 5))
    n_trials: int = 100
    methods: tuple = METHODS
    covariance: CovarianceModel = field(default_factory=CovarianceModel)
    redraw_covariance: bool = True
    pilots: str = "dft-truncated"
    seed: int = 0
    tol: float = 1e-5
    max_iter: int = 200

    def __post_init__(self):
        object.__setattr__(self, "powers_db", tuple(float(p) for p in self.powers_db))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.powers_db:
            raise ValueError("powers_db must not be empty")
        if any(b <= a for a, b in zip(self.powers_db, self.powers_db[1:])):
            raise ValueError("powers_db must be strictly increasing")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.pilots not in ("dft-truncated", "random-unitary"):
            raise ValueError(f"unknown pilot kind {self.pilots!r}")
        # validates M, K, T_dl, alpha_c, tol, max_iter
        self.system(self.powers_db[0])

    def system(self, p_dl_db: float) -> SystemConfig:
        return SystemConfig(M=self.M, K=self.K, T_dl=self.T_dl, P_dl=10 ** (p_dl_db / 10),
                            alpha_c=self.alpha_c, seed=self.seed, tol=self.tol,
                            max_iter=self.max_iter)

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "K": self.K,
            "T_dl": self.T_dl,
            "alpha_c": self.alpha_c,
            "powers_db": list(self.powers_db),
            "n_trials": self.n_trials,
            "methods": list(self.methods),
            "covariance": self.covariance.to_dict(),
            "redraw_covariance": self.redraw_covariance,
            "pilots": self.pilots,
            "seed": self.seed,
            "tol": self.tol,
            "max_iter": self.max_iter,
        }


@dataclass(frozen=True)
class TrialResult:
    method: str
    trial: int
    p_dl_db: float
    sum_rate_lb: float
    common_rate: float
    private_rates: tuple
    power_fractions: tuple
    iterations: int
    wall_time_s: float
    converged_by: str
    sum_rate_genie: float = float("nan")
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def _trial_rng(spec: SweepSpec, trial_index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, 0, trial_index])


def _draw_scenario(spec: SweepSpec, trial_index: int):
    rng = _trial_rng(spec, trial_index)
    if spec.redraw_covariance:
        cov_rng = rng
    else:
        # one fixed covariance per user, shared by every trial
        cov_rng = np.random.default_rng([spec.seed, 1])
    covs = [synth_covariance(spec.M, spec.covariance, cov_rng) for _ in range(spec.K)]
    channels = [draw_channel(C, rng).h for C in covs]
    pilots = make_pilot_matrix(spec.M, spec.T_dl, spec.pilots, rng)
    noise = crandn(rng, spec.K, spec.T_dl)
    return covs, np.column_stack(channels), pilots, noise


def _solve(method: str, config: SystemConfig, est):
    if method == "mmse":
        return mmse_precoder(est, config), 0, "closed-form"
    P_mmse = mmse_precoder(est, config)
    if method == "awamse_rs":
        P0 = init_precoder(est, config.alpha_c, P_mmse)
        P, trace = run_awamse_rs(config, est, P0)
    else:
        P, trace = awamse_no_rs(config, est, P_mmse)
    return P, trace.iterations, trace.converged_by


def run_trial(spec: SweepSpec, trial_index: int) -> list:
    """Run every method at every grid power on one channel realization.

    Numerical failures are recorded in the ``error`` field of the
    affected result rather than raised.
    """
    covs, H, pilots, noise = _draw_scenario(spec, trial_index)
    results = []
    for p_db in spec.powers_db:
        config = spec.system(p_db)
        est = estimate_users(covs, list(H.T), pilots, config.sigma2, noise)
        for method in spec.methods:
            t0 = time.perf_counter()
            try:
                P, iters, how = _solve(method, config, est)
            except (NumericalError, ContractError, np.linalg.LinAlgError) as exc:
                results.append(TrialResult(
                    method=method, trial=trial_index, p_dl_db=p_db, sum_rate_lb=float("nan"),
                    common_rate=float("nan"), private_rates=(), power_fractions=(),
                    iterations=0, wall_time_s=time.perf_counter() - t0, converged_by="error",
                    error=f"{type(exc).__name__}: {exc}"))
                continue
            wall = time.perf_counter() - t0
            R_c, R_p = rate_lower_bounds(link_statistics(est, P))
            common = float(R_c.min()) if np.any(P.p_c) else 0.0
            private = tuple(float(r) for r in R_p)
            results.append(TrialResult(
                method=method, trial=trial_index, p_dl_db=p_db,
                sum_rate_lb=float(sum(private) + common), common_rate=common,
                private_rates=private,
                power_fractions=tuple(float(f) for f in P.power_fractions()),
                iterations=int(iters), wall_time_s=wall, converged_by=how,
                sum_rate_genie=genie_sum_rate(H, P, config.sigma2)))
    return results


def high_snr_slope(powers_db, rates, window_db: float = SLOPE_WINDOW_DB):
    """Least-squares slope of rate versus ``log2(P_dl)`` over powers >= ``window_db``.

    Returns ``None`` when fewer than three grid points fall in the window.
    """
    p = np.asarray(powers_db, dtype=float)
    r = np.asarray(rates, dtype=float)
    sel = p >= window_db
    if sel.sum() < 3:
        return None
    x = p[sel] / 10 * np.log2(10)
    return float(np.polyfit(x, r[sel], 1)[0])


def active_stream_count(power_fractions, threshold: float = ACTIVE_THRESHOLD) -> int:
    """Number of private streams whose power fraction exceeds ``threshold``.

    ``power_fractions`` lists the common stream first.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    private = np.asarray(power_fractions, dtype=float)[1:]
    return int(np.count_nonzero(private > threshold))


@dataclass
class AggregateResult:
    """Per-method statistics over all successful trials.

    Arrays indexed by power follow ``spec.powers_db``; per-trial arrays have
    shape (n_trials, n_powers) and hold NaN for failed trials.
    """

    spec: SweepSpec
    mean_sum_rate: dict
    mean_genie_rate: dict
    slopes: dict
    iterations: dict
    wall_times: dict
    mean_power_alloc: dict
    trials: list
    failures: list

    def sum_rates(self, method: str) -> np.ndarray:
        """Per-trial lower-bound sum rates, shape (n_trials, n_powers)."""
        return self._per_trial(method, lambda r: r.sum_rate_lb)

    def power_fractions(self, method: str, p_dl_db: float) -> np.ndarray:
        rows = [r.power_fractions for r in self.trials
                if r.method == method and r.p_dl_db == p_dl_db and not r.failed]
        return np.asarray(rows)

    def _per_trial(self, method, getter) -> np.ndarray:
        spec = self.spec
        out = np.full((spec.n_trials, len(spec.powers_db)), np.nan)
        col = {p: i for i, p in enumerate(spec.powers_db)}
        for r in self.trials:
            if r.method == method and not r.failed:
                out[r.trial, col[r.p_dl_db]] = getter(r)
        return out


def aggregate(spec: SweepSpec, trials: list) -> AggregateResult:
    """Reduce trial results in a fixed order; aborts on excessive failures."""
    failures = [r for r in trials if r.failed]
    for method in spec.methods:
        for p in spec.powers_db:
            n_fail = sum(1 for r in failures if r.method == method and r.p_dl_db == p)
            if n_fail > MAX_FAILURE_FRACTION * spec.n_trials:
                raise SweepAborted(
                    f"{n_fail}/{spec.n_trials} trials failed for {method} at {p:g} dB",
                    [(r.method, r.p_dl_db, r.trial, r.error) for r in failures])
    agg = AggregateResult(spec=spec, mean_sum_rate={}, mean_genie_rate={}, slopes={},
                          iterations={}, wall_times={}, mean_power_alloc={},
                          trials=trials, failures=failures)
    for method in spec.methods:
        agg.mean_sum_rate[method] = np.nanmean(agg.sum_rates(method), axis=0)
        agg.mean_genie_rate[method] = np.nanmean(
            agg._per_trial(method, lambda r: r.sum_rate_genie), axis=0)
        agg.slopes[method] = high_snr_slope(spec.powers_db, agg.mean_sum_rate[method])
        agg.iterations[method] = agg._per_trial(method, lambda r: r.iterations)
        agg.wall_times[method] = agg._per_trial(method, lambda r: r.wall_time_s)
        agg.mean_power_alloc[method] = np.array([
            agg.power_fractions(method, p).mean(axis=0) for p in spec.powers_db])
    return agg


def _trial_task(args):
    spec, index = args
    return run_trial(spec, index)


def run_sweep(spec: SweepSpec, threads: int = 1) -> AggregateResult:
    """Run all trials, optionally in worker processes, and aggregate them."""
    tasks = [(spec, i) for i in range(spec.n_trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_trial_task, tasks))
    else:
        chunks = [_trial_task(t) for t in tasks]
    trials = [r for chunk in chunks for r in chunk]
    return aggregate(spec, trials)


def with_overrides(spec: SweepSpec, **kwargs) -> SweepSpec:
    """Copy of ``spec`` with some fields replaced (validated again)."""
    return replace(spec, **kwargs)
