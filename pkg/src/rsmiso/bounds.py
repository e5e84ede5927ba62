"""Training-based SINR/rate lower bounds and their MSE counterparts.

Every quantity is evaluated from the channel estimates and error
covariances only; the true channel enters solely through
:func:`genie_sum_rate`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import EstimateSet
from .errors import ContractError

__all__ = [
    "PrecoderSet",
    "LinkStatistics",
    "FilterWeightState",
    "link_statistics",
    "rate_lower_bounds",
    "sum_rate_lower_bound",
    "genie_sum_rate",
    "average_mse",
    "mmse_filters",
    "optimal_weights",
    "awamse",
]

POWER_TOL = 1e-6


@dataclass(frozen=True)
class PrecoderSet:
    """Common precoder ``p_c`` (length M) and private precoders ``P_p`` (M x K)."""

    p_c: np.ndarray
    P_p: np.ndarray

    def __post_init__(self):
        p_c = np.asarray(self.p_c, dtype=complex).reshape(-1)
        P_p = np.asarray(self.P_p, dtype=complex)
        if P_p.ndim != 2 or P_p.shape[0] != p_c.shape[0]:
            raise ValueError("p_c and P_p must share the antenna dimension")
        object.__setattr__(self, "p_c", p_c)
        object.__setattr__(self, "P_p", P_p)

    @classmethod
    def from_matrix(cls, P: np.ndarray) -> "PrecoderSet":
        """Split the stacked matrix ``[p_c, P_p]``."""
        return cls(P[:, 0], P[:, 1:])

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack([self.p_c, self.P_p])

    @property
    def power(self) -> float:
        return float(np.vdot(self.p_c, self.p_c).real + np.sum(np.abs(self.P_p) ** 2))

    def power_fractions(self) -> np.ndarray:
        """Per-stream powers divided by the total, common stream first."""
        per = np.sum(np.abs(self.matrix) ** 2, axis=0)
        total = per.sum()
        return per / total if total > 0 else per

    def scaled(self, c: float) -> "PrecoderSet":
        return PrecoderSet(c * self.p_c, c * self.P_p)

    def normalized(self) -> "PrecoderSet":
        return self.scaled(1.0 / np.sqrt(self.power))


@dataclass(frozen=True)
class LinkStatistics:
    T_c: np.ndarray
    T_p: np.ndarray
    gamma_c: np.ndarray
    gamma_p: np.ndarray


@dataclass
class FilterWeightState:
    """Receive filters and weights of all users, common and private."""

    g_c: np.ndarray
    g_p: np.ndarray
    u_c: np.ndarray
    u_p: np.ndarray


def _projections(est: EstimateSet, Pmat: np.ndarray):
    """Return ``S[k, j] = h_k^H P[:, j]`` and ``Q[k, j] = P[:, j]^H R_k P[:, j]``."""
    S = est.H_hat.conj().T @ Pmat
    RP = np.einsum("kmn,nj->kmj", est.R, Pmat)
    Q = np.einsum("mj,kmj->kj", Pmat.conj(), RP).real
    return S, Q


def _received_powers(est: EstimateSet, P: PrecoderSet):
    """Desired amplitudes and total received powers ``T_c``, ``T_p``."""
    S, Q = _projections(est, P.matrix)
    K = est.K
    a_c = S[:, 0]
    a_p = S[np.arange(K), np.arange(K) + 1]
    T_p = Q[:, 1:].sum(axis=1)
    T_c = Q[:, 0] + T_p
    return a_c, a_p, T_c, T_p


def _noise(est: EstimateSet, sigma2) -> np.ndarray:
    if sigma2 is None:
        return est.sigma2
    return np.broadcast_to(np.asarray(sigma2, dtype=float), (est.K,))


def link_statistics(est: EstimateSet, P: PrecoderSet, sigma2=None) -> LinkStatistics:
    """Received powers and SINR lower bounds of the common and private streams."""
    s2 = _noise(est, sigma2)
    a_c, a_p, T_c, T_p = _received_powers(est, P)
    sig_c = np.abs(a_c) ** 2
    sig_p = np.abs(a_p) ** 2
    gamma_c = sig_c / (T_c - sig_c + s2)
    gamma_p = sig_p / (T_p - sig_p + s2)
    return LinkStatistics(T_c=T_c, T_p=T_p, gamma_c=gamma_c, gamma_p=gamma_p)


def rate_lower_bounds(stats: LinkStatistics):
    """Common and private rate lower bounds in bpcu, one entry per user."""
    return np.log2(1.0 + stats.gamma_c), np.log2(1.0 + stats.gamma_p)


def sum_rate_lower_bound(est: EstimateSet, P: PrecoderSet, sigma2=None) -> float:
    """Private rates summed over users plus the weakest user's common rate."""
    power = P.power
    if power > 1.0 + POWER_TOL:
        raise ContractError(f"precoder power {power:.9g} exceeds the unit budget")
    if power == 0.0:
        return 0.0
    R_c, R_p = rate_lower_bounds(link_statistics(est, P, sigma2))
    return float(R_p.sum() + R_c.min())


def genie_sum_rate(H: np.ndarray, P: PrecoderSet, sigma2) -> float:
    """Sum rate with the true channels ``H`` (M x K) known at the receivers.

    Common stream treated first with all private streams as interference,
    then private streams after perfect SIC.
    """
    K = H.shape[1]
    s2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (K,))
    G = np.abs(H.conj().T @ P.matrix) ** 2
    priv = G[:, 1:]
    tot_p = priv.sum(axis=1)
    own = priv[np.arange(K), np.arange(K)]
    gamma_c = G[:, 0] / (tot_p + s2)
    gamma_p = own / (tot_p - own + s2)
    return float(np.log2(1 + gamma_p).sum() + np.log2(1 + gamma_c).min())


def average_mse(est: EstimateSet, P: PrecoderSet, state: FilterWeightState, sigma2=None):
    """Average common and private MSEs for the filters in ``state``.

    ``sigma2`` is the noise term added to the received power; pass
    ``est.sigma2 * P.power`` for the power-scaled form.
    """
    s2 = _noise(est, sigma2)
    a_c, a_p, T_c, T_p = _received_powers(est, P)
    mse_c = 1 - 2 * np.real(state.g_c * a_c) + np.abs(state.g_c) ** 2 * (T_c + s2)
    mse_p = 1 - 2 * np.real(state.g_p * a_p) + np.abs(state.g_p) ** 2 * (T_p + s2)
    return mse_c, mse_p


def mmse_filters(est: EstimateSet, P: PrecoderSet, sigma2=None):
    """Receive filters minimizing the average MSEs for fixed precoders."""
    s2 = _noise(est, sigma2)
    a_c, a_p, T_c, T_p = _received_powers(est, P)
    return a_c.conj() / (T_c + s2), a_p.conj() / (T_p + s2)


def optimal_weights(mse_c, mse_p):
    """Weights ``1 / mse``; all MSEs must lie in (0, 1]."""
    mse_c = np.asarray(mse_c, dtype=float)
    mse_p = np.asarray(mse_p, dtype=float)
    if np.any(mse_c <= 0) or np.any(mse_p <= 0):
        raise ContractError("MSEs must be strictly positive")
    return 1.0 / mse_c, 1.0 / mse_p


def awamse(state: FilterWeightState, mses):
    """Augmented weighted MSEs ``u * mse - log2(u)``, common and private."""
    mse_c, mse_p = mses
    xi_c = state.u_c * mse_c - np.log2(state.u_c)
    xi_p = state.u_p * mse_p - np.log2(state.u_p)
    return xi_c, xi_p
