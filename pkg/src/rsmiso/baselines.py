"""Reference precoders: regularized MMSE and AWAMSE without rate splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .awamse_rs import _pd_solve, run_awamse_rs
from .bounds import PrecoderSet
from .channel import EstimateSet, SystemConfig

__all__ = ["MmseBaselineParams", "mmse_precoder", "awamse_no_rs"]


@dataclass(frozen=True)
class MmseBaselineParams:
    eta: float
    delta: float


def mmse_precoder(est: EstimateSet, config: SystemConfig, return_params: bool = False):
    """Regularized MMSE precoder accounting for the estimation errors.

    ``P = delta (H H^H + sum_k C_err,k + eta I)^{-1} H`` with
    ``eta = M / P_dl`` and ``delta`` chosen for unit Frobenius norm. The
    common precoder is zero.
    """
    M, K = est.M, est.K
    eta = M / config.P_dl
    H = est.H_hat
    # push-through form D^{-1} H (I + H^H D^{-1} H)^{-1}, D = sum C_err + eta I;
    # it avoids forming H H^H, which loses the direction of H when eta is tiny
    D = est.C_err.sum(axis=0) + eta * np.eye(M)
    DH = _pd_solve(0.5 * (D + D.conj().T), H)
    inner = np.eye(K) + H.conj().T @ DH
    raw = np.linalg.solve(0.5 * (inner + inner.conj().T).T, DH.T).T
    delta = 1.0 / np.linalg.norm(raw)
    P = PrecoderSet(np.zeros(M, dtype=complex), delta * raw)
    if return_params:
        return P, MmseBaselineParams(eta=eta, delta=delta)
    return P


def awamse_no_rs(config: SystemConfig, est: EstimateSet, P_init: PrecoderSet):
    """AWAMSE iterations with the common stream disabled.

    Reconstructed as the special case of the rate-splitting algorithm with
    ``p_c = 0``: the common filters vanish, the common weights equal one
    and the private update reduces to ``(B + C)^{-1} u_p g_p^* h``.
    """
    return run_awamse_rs(config, est, P_init, common=False)
