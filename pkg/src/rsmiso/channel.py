"""Channel statistics, pilot training and LMMSE channel estimation.

All randomness is drawn from an explicit :class:`numpy.random.Generator`,
so every function here is reproducible given the generator state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

__all__ = [
    "SystemConfig",
    "CovarianceModel",
    "PilotMatrix",
    "UserChannelModel",
    "ChannelEstimate",
    "EstimateSet",
    "crandn",
    "synth_covariance",
    "draw_channel",
    "make_pilot_matrix",
    "observe",
    "lmmse_estimate",
    "estimate_users",
]


@dataclass(frozen=True)
class SystemConfig:
    """Scenario scalars of a single-cell MU-MISO downlink.

    Parameters
    ----------
    M : int
        Number of base station antennas.
    K : int
        Number of single-antenna users.
    T_dl : int
        Number of downlink pilots.
    P_dl : float
        Downlink transmit power (linear). Training and data noise variance
        of every user is ``1 / P_dl``.
    alpha_c : float
        Common-stream fraction used by the precoder initialization.
    seed : int
    tol : float
        Threshold on the absolute objective change that stops the iterations.
    max_iter : int
    """

    M: int = 16
    K: int = 5
    T_dl: int = 3
    P_dl: float = 100.0
    alpha_c: float = 0.5
    seed: int = 0
    tol: float = 1e-5
    max_iter: int = 200

    def __post_init__(self):
        for name in ("M", "K", "T_dl"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.T_dl > self.M:
            raise ValueError("T_dl must not exceed M")
        if not self.P_dl > 0:
            raise ValueError("P_dl must be positive")
        if not 0.0 <= self.alpha_c <= 1.0:
            raise ValueError("alpha_c must lie in [0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")

    @property
    def sigma2(self) -> np.ndarray:
        """Per-user noise variances, all equal to ``1 / P_dl``."""
        return np.full(self.K, 1.0 / self.P_dl)


@dataclass(frozen=True)
class CovarianceModel:
    """Descriptor of a synthetic channel covariance family.

    ``kind`` is one of ``"exponential"`` (uses ``rho``), ``"rank-limited"``
    (uses ``rank`` and ``decay``) or ``"identity"``.
    """

    kind: str = "exponential"
    rho: float = 0.7
    rank: int = 2
    decay: float = 0.5

    def __post_init__(self):
        if self.kind not in ("exponential", "rank-limited", "identity"):
            raise ValueError(f"unknown covariance model {self.kind!r}")
        if self.kind == "exponential" and not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.kind == "rank-limited":
            if self.rank < 1:
                raise ValueError("rank must be positive")
            if not 0.0 < self.decay <= 1.0:
                raise ValueError("decay must lie in (0, 1]")

    def to_dict(self) -> dict:
        if self.kind == "exponential":
            return {"kind": self.kind, "rho": self.rho}
        if self.kind == "rank-limited":
            return {"kind": self.kind, "rank": self.rank, "decay": self.decay}
        return {"kind": self.kind}


@dataclass(frozen=True)
class PilotMatrix:
    Phi: np.ndarray

    @property
    def T_dl(self) -> int:
        return self.Phi.shape[1]


@dataclass(frozen=True)
class UserChannelModel:
    C: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class ChannelEstimate:
    h_hat: np.ndarray
    C_err: np.ndarray


@dataclass(frozen=True)
class EstimateSet:
    """Stacked estimates of all users.

    Attributes
    ----------
    H_hat : ndarray, shape (M, K)
        Column ``k`` is the LMMSE estimate of user ``k``.
    C_err : ndarray, shape (K, M, M)
        Error covariance of every user.
    sigma2 : ndarray, shape (K,)
        Noise variance of every user.
    """

    H_hat: np.ndarray
    C_err: np.ndarray
    sigma2: np.ndarray
    _R: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        H = np.asarray(self.H_hat, dtype=complex)
        if H.ndim != 2:
            raise ValueError("H_hat must be an M x K matrix")
        M, K = H.shape
        C = np.asarray(self.C_err, dtype=complex).reshape(K, M, M)
        s2 = np.broadcast_to(np.asarray(self.sigma2, dtype=float), (K,)).copy()
        object.__setattr__(self, "H_hat", H)
        object.__setattr__(self, "C_err", C)
        object.__setattr__(self, "sigma2", s2)
        # R_k = h_k h_k^H + C_err,k, the second moment seen through the estimate
        R = C + np.einsum("mk,nk->kmn", H, H.conj())
        object.__setattr__(self, "_R", R)

    @property
    def M(self) -> int:
        return self.H_hat.shape[0]

    @property
    def K(self) -> int:
        return self.H_hat.shape[1]

    @property
    def R(self) -> np.ndarray:
        """Per-user matrices ``h_k h_k^H + C_err,k``, shape (K, M, M)."""
        return self._R

    @classmethod
    def from_estimates(cls, estimates, sigma2) -> "EstimateSet":
        H = np.stack([e.h_hat for e in estimates], axis=1)
        C = np.stack([e.C_err for e in estimates], axis=0)
        return cls(H, C, sigma2)

    def user(self, k: int) -> ChannelEstimate:
        return ChannelEstimate(self.H_hat[:, k].copy(), self.C_err[k].copy())


def crandn(rng: np.random.Generator, *shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synth_covariance(M: int, model: CovarianceModel, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw a Hermitian PSD covariance with trace ``M``.

    The exponential and identity models are deterministic; the rank-limited
    model spans ``rank`` random orthonormal directions with eigenvalues
    ``decay**i``.
    """
    if M < 1:
        raise ValueError("M must be positive")
    if model.kind == "identity":
        return np.eye(M, dtype=complex)
    if model.kind == "exponential":
        if not 0.0 <= model.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        idx = np.arange(M)
        C = model.rho ** np.abs(idx[:, None] - idx[None, :])
        return C.astype(complex) * (M / np.trace(C))
    if model.rank > M:
        raise ValueError(f"rank {model.rank} exceeds M={M}")
    if rng is None:
        raise ValueError("rank-limited covariances need a random generator")
    U, _ = np.linalg.qr(crandn(rng, M, model.rank))
    lam = model.decay ** np.arange(model.rank)
    lam *= M / lam.sum()
    C = (U * lam) @ U.conj().T
    return 0.5 * (C + C.conj().T)


def draw_channel(C: np.ndarray, rng: np.random.Generator) -> UserChannelModel:
    """Draw ``h ~ CN(0, C)`` using an eigendecomposition square root."""
    lam, V = np.linalg.eigh(C)
    root = V * np.sqrt(np.clip(lam, 0.0, None))
    h = root @ crandn(rng, C.shape[0])
    return UserChannelModel(C=C, h=h)


def make_pilot_matrix(M: int, T_dl: int, kind: str = "dft-truncated",
                      rng: np.random.Generator | None = None) -> PilotMatrix:
    """Pilot matrix with unit-norm columns.

    ``"dft-truncated"`` returns the first ``T_dl`` columns of the unitary
    ``M``-point DFT; ``"random-unitary"`` returns ``T_dl`` orthonormal
    columns of a Haar-distributed unitary matrix.
    """
    if not 1 <= T_dl <= M:
        raise ValueError(f"T_dl={T_dl} must lie in [1, M={M}]")
    if kind == "dft-truncated":
        n = np.arange(M)[:, None]
        t = np.arange(T_dl)[None, :]
        Phi = np.exp(-2j * np.pi * n * t / M) / np.sqrt(M)
    elif kind == "random-unitary":
        if rng is None:
            raise ValueError("random-unitary pilots need a random generator")
        Q, Rq = np.linalg.qr(crandn(rng, M, T_dl))
        # fix the phase ambiguity of QR so the draw is Haar distributed
        d = np.diag(Rq)
        Phi = Q * (d / np.abs(d))
    else:
        raise ValueError(f"unknown pilot kind {kind!r}")
    return PilotMatrix(Phi)


def observe(pilots: PilotMatrix, h: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Noisy training observation ``Phi^H h + z`` with ``z ~ CN(0, sigma2 I)``."""
    Phi = pilots.Phi
    if h.shape[0] != Phi.shape[0]:
        raise ValueError("channel length does not match the pilot matrix")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return Phi.conj().T @ h + crandn(rng, Phi.shape[1], var=sigma2)


def _hermitian_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    try:
        return linalg.cho_solve(linalg.cho_factor(A, lower=True), B)
    except linalg.LinAlgError:
        n = A.shape[0]
        jitter = 1e-12 * max(np.trace(A).real, np.finfo(float).tiny)
        return linalg.cho_solve(linalg.cho_factor(A + jitter * np.eye(n), lower=True), B)


def lmmse_estimate(C: np.ndarray, pilots: PilotMatrix, sigma2: float, y: np.ndarray) -> ChannelEstimate:
    """LMMSE estimate of ``h`` from ``y = Phi^H h + z`` and its error covariance."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    Phi = pilots.Phi
    CPhi = C @ Phi
    Cy = Phi.conj().T @ CPhi + sigma2 * np.eye(Phi.shape[1])
    # W = (Phi^H C Phi + sigma2 I)^{-1} Phi^H C, so that h_hat = W^H y
    W = _hermitian_solve(Cy, CPhi.conj().T)
    h_hat = W.conj().T @ y
    C_err = C - CPhi @ W
    C_err = 0.5 * (C_err + C_err.conj().T)
    return ChannelEstimate(h_hat=h_hat, C_err=C_err)


def estimate_users(covariances, channels, pilots: PilotMatrix, sigma2, noise) -> EstimateSet:
    """Estimate every user's channel from pre-drawn unit-variance training noise.

    ``noise`` has shape (K, T_dl) with ``CN(0, 1)`` entries; it is scaled by
    ``sqrt(sigma2_k)``. Keeping the raw draw fixed lets a power sweep reuse
    the same realization at every power level.
    """
    K = len(channels)
    s2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (K,))
    Phi_H = pilots.Phi.conj().T
    ests = []
    for k in range(K):
        y = Phi_H @ channels[k] + np.sqrt(s2[k]) * noise[k]
        ests.append(lmmse_estimate(covariances[k], pilots, s2[k], y))
    return EstimateSet.from_estimates(ests, s2)
