"""Alternating AWAMSE minimization for one-layer rate-splitting precoding.

The precoder update is closed form for a fixed "common user" index
``k_c``; every index is tried and the one yielding the smallest overall
objective is kept. Receive filters and weights use the power-scaled
expressions, which make the objective invariant to a joint rescaling of
the precoders, so the power constraint is enforced only once at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .bounds import (
    FilterWeightState,
    PrecoderSet,
    _received_powers,
    average_mse,
    awamse,
)
from .channel import EstimateSet, SystemConfig
from .errors import DegenerateInputError, NumericalError

__all__ = [
    "CandidateSystemMatrices",
    "SolveTrace",
    "scaled_filters",
    "scaled_weights",
    "refresh_state",
    "candidate_matrices",
    "precoder_candidate",
    "fixed_index_objective",
    "total_objective",
    "init_precoder",
    "run_awamse_rs",
]

COND_LIMIT = 1e14


@dataclass(frozen=True)
class CandidateSystemMatrices:
    A: np.ndarray
    B: np.ndarray
    C_mat: np.ndarray


@dataclass
class SolveTrace:
    """Convergence record of one run.

    ``objective_per_iter`` holds the accepted objective after every
    accepted update. ``refreshed_objective`` holds the objective of the
    current precoder right after its filters and weights were recomputed,
    one entry per pass of the loop.
    """

    objective_per_iter: list = field(default_factory=list)
    k_min_per_iter: list = field(default_factory=list)
    refreshed_objective: list = field(default_factory=list)
    initial_objective: float = float("nan")
    iterations: int = 0
    converged_by: str = "max-iter"


def _effective_noise(est: EstimateSet, P: PrecoderSet) -> np.ndarray:
    power = P.power
    if power <= 0.0:
        raise DegenerateInputError("precoder is identically zero")
    return est.sigma2 * power


def scaled_filters(est: EstimateSet, P: PrecoderSet):
    """MMSE filters with the noise variance scaled by ``||P||_F^2``."""
    s2 = _effective_noise(est, P)
    a_c, a_p, T_c, T_p = _received_powers(est, P)
    return a_c.conj() / (T_c + s2), a_p.conj() / (T_p + s2)


def scaled_weights(est: EstimateSet, P: PrecoderSet):
    """Weights ``1 / mse`` at the scaled MMSE filters."""
    s2 = _effective_noise(est, P)
    a_c, a_p, T_c, T_p = _received_powers(est, P)
    u_c = 1.0 / (1.0 - np.abs(a_c) ** 2 / (T_c + s2))
    u_p = 1.0 / (1.0 - np.abs(a_p) ** 2 / (T_p + s2))
    return u_c, u_p


def refresh_state(est: EstimateSet, P: PrecoderSet) -> FilterWeightState:
    """Filters and weights for the precoder ``P`` (lines 3 and 4 of a pass)."""
    g_c, g_p = scaled_filters(est, P)
    u_c, u_p = scaled_weights(est, P)
    return FilterWeightState(g_c=g_c, g_p=g_p, u_c=u_c, u_p=u_p)


def _shared_matrices(est: EstimateSet, state: FilterWeightState, s2: np.ndarray):
    wp = state.u_p * np.abs(state.g_p) ** 2
    B = float(np.dot(wp, s2)) * np.eye(est.M)
    C_mat = np.einsum("k,kmn->mn", wp, est.R)
    return B, C_mat, bool(np.any(wp))


def _common_matrix(k_c, est, state, s2) -> np.ndarray:
    wc = state.u_c[k_c] * np.abs(state.g_c[k_c]) ** 2
    return wc * (est.R[k_c] + s2[k_c] * np.eye(est.M))


def candidate_matrices(k_c: int, est: EstimateSet, state: FilterWeightState,
                       sigma2=None) -> CandidateSystemMatrices:
    """System matrices of the closed-form update for common user ``k_c``.

    ``k_c`` is a zero-based user index.
    """
    s2 = est.sigma2 if sigma2 is None else np.broadcast_to(np.asarray(sigma2, float), (est.K,))
    if not 0 <= k_c < est.K:
        raise IndexError(f"user index {k_c} out of range")
    B, C_mat, private_active = _shared_matrices(est, state, s2)
    A = _common_matrix(k_c, est, state, s2)
    if not private_active and not np.any(A):
        raise NumericalError("all receive filters vanish; the update system is singular")
    return CandidateSystemMatrices(A=A, B=B, C_mat=C_mat)


def _pd_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a Hermitian positive definite system, retrying once with jitter."""
    M = A.shape[0]
    for attempt in range(2):
        try:
            c, low = linalg.cho_factor(A, lower=True, check_finite=False)
            d = np.abs(np.diag(c))
            # squared diagonal ratio of the Cholesky factor bounds cond(A) from below
            if d.min() > 0 and (d.max() / d.min()) ** 2 < COND_LIMIT:
                return linalg.cho_solve((c, low), b, check_finite=False)
        except linalg.LinAlgError:
            pass
        if attempt == 0:
            A = A + 1e-12 * np.trace(A).real / M * np.eye(M)
    raise NumericalError("precoder update system is singular")


def _private_update(est: EstimateSet, state: FilterWeightState, system: np.ndarray) -> np.ndarray:
    rhs = est.H_hat * (state.u_p * state.g_p.conj())
    return _pd_solve(system, rhs)


def precoder_candidate(k_c: int, est: EstimateSet, state: FilterWeightState,
                       sigma2=None) -> PrecoderSet:
    """Closed-form minimizer of the fixed-``k_c`` objective (not power normalized)."""
    mats = candidate_matrices(k_c, est, state, sigma2)
    return _candidate_from(k_c, est, state, mats)


def _candidate_from(k_c, est, state, mats: CandidateSystemMatrices) -> PrecoderSet:
    AB = mats.A + mats.B
    coef = state.u_c[k_c] * np.conj(state.g_c[k_c])
    if coef == 0:
        p_c = np.zeros(est.M, dtype=complex)
    else:
        p_c = _pd_solve(AB, coef * est.H_hat[:, k_c])
    P_p = _private_update(est, state, AB + mats.C_mat)
    return PrecoderSet(p_c, P_p)


def _scaled_awamse(est: EstimateSet, P: PrecoderSet, state: FilterWeightState):
    noise = est.sigma2 * P.power
    return awamse(state, average_mse(est, P, state, noise))


def fixed_index_objective(k_c: int, est: EstimateSet, P: PrecoderSet,
                          state: FilterWeightState) -> float:
    """Objective with the common term pinned to user ``k_c``."""
    xi_c, xi_p = _scaled_awamse(est, P, state)
    return float(xi_p.sum() + xi_c[k_c])


def total_objective(est: EstimateSet, P: PrecoderSet, state: FilterWeightState) -> float:
    """Private AWAMSEs summed plus the worst user's common AWAMSE."""
    xi_c, xi_p = _scaled_awamse(est, P, state)
    return float(xi_p.sum() + xi_c.max())


def _private_objective(est, P, state) -> float:
    _, xi_p = _scaled_awamse(est, P, state)
    return float(xi_p.sum())


def init_precoder(est: EstimateSet, alpha_c: float, P_mmse: PrecoderSet) -> PrecoderSet:
    """Dominant left singular vector for the common stream, scaled MMSE for the rest.

    ``alpha_c`` scales amplitudes, so the initial power is
    ``alpha_c**2 + (1 - alpha_c)**2``.
    """
    if not 0.0 <= alpha_c <= 1.0:
        raise ValueError("alpha_c must lie in [0, 1]")
    if not np.any(est.H_hat):
        raise DegenerateInputError("all channel estimates are zero")
    norm = np.linalg.norm(P_mmse.P_p)
    if norm == 0:
        raise DegenerateInputError("MMSE precoder is zero")
    U, _, _ = np.linalg.svd(est.H_hat, full_matrices=False)
    p_c = alpha_c * U[:, 0]
    P_p = (1.0 - alpha_c) * P_mmse.P_p / norm
    P = PrecoderSet(p_c, P_p)
    if P.power > 1.0:
        P = P.normalized()
    return P


def run_awamse_rs(config: SystemConfig, est: EstimateSet, P_init: PrecoderSet,
                  common: bool = True):
    """Run the alternating AWAMSE algorithm from ``P_init``.

    Parameters
    ----------
    config : SystemConfig
        Supplies ``tol`` and ``max_iter``.
    est : EstimateSet
    P_init : PrecoderSet
        Nonzero starting point with power at most one.
    common : bool
        With ``False`` the common stream is pinned to zero and only the
        private AWAMSE sum is minimized (the no-RS variant).

    Returns
    -------
    P : PrecoderSet
        Final precoder with unit total power.
    trace : SolveTrace
    """
    if P_init.power <= 0.0:
        raise DegenerateInputError("initial precoder is identically zero")
    if P_init.power > 1.0 + 1e-9:
        raise ValueError("initial precoder exceeds the power budget")
    if not common:
        P_init = PrecoderSet(np.zeros_like(P_init.p_c), P_init.P_p)
        if P_init.power <= 0.0:
            raise DegenerateInputError("initial private precoders are zero")
    objective = total_objective if common else _private_objective

    trace = SolveTrace()
    P = P_init
    state = refresh_state(est, P)
    xi_min = objective(est, P, state)
    trace.initial_objective = xi_min
    if not np.isfinite(xi_min):
        raise NumericalError("non-finite initial objective", trace)

    n = 0
    while n < config.max_iter:
        n += 1
        if n > 1:
            state = refresh_state(est, P)
        trace.refreshed_objective.append(objective(est, P, state))

        B, C_mat, private_active = _shared_matrices(est, state, est.sigma2)
        if common:
            cands = []
            for k_c in range(est.K):
                A = _common_matrix(k_c, est, state, est.sigma2)
                if not private_active and not np.any(A):
                    # the candidate would be the zero precoder
                    cands.append(None)
                    continue
                cands.append(_candidate_from(k_c, est, state, CandidateSystemMatrices(A, B, C_mat)))
            if all(c is None for c in cands):
                raise NumericalError("all receive filters vanish", trace)
        else:
            if not private_active:
                raise NumericalError("all private receive filters vanish", trace)
            P_p = _private_update(est, state, B + C_mat)
            cands = [PrecoderSet(np.zeros(est.M, dtype=complex), P_p)]
        xis = np.asarray([np.inf if cand is None else objective(est, cand, state)
                          for cand in cands])

        if not np.any(np.isfinite(xis)) or np.any(np.isnan(xis)):
            trace.iterations = n
            raise NumericalError("non-finite objective", trace)
        k_min = int(np.argmin(xis))
        if xis[k_min] > xi_min:
            trace.converged_by = "no-improvement"
            break
        delta = xi_min - xis[k_min]
        P = cands[k_min]
        xi_min = float(xis[k_min])
        trace.objective_per_iter.append(xi_min)
        trace.k_min_per_iter.append(k_min)
        if abs(delta) < config.tol:
            trace.converged_by = "tolerance"
            break

    trace.iterations = n
    return P.normalized(), trace
