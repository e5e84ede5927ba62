import numpy as np
import pytest

from rsmiso.bounds import PrecoderSet
from rsmiso.channel import (
    CovarianceModel,
    EstimateSet,
    PilotMatrix,
    crandn,
    draw_channel,
    lmmse_estimate,
    synth_covariance,
)

_CRITERIA = {}


def make_instance(rng, M, K, T_dl=None, P_dl=None, rho=None):
    """Random LMMSE estimates (exponential covariance) and a unit-power precoder."""
    T_dl = T_dl or max(1, M // 2)
    P_dl = P_dl if P_dl is not None else 10 ** rng.uniform(0, 3)
    rho = rho if rho is not None else rng.uniform(0, 0.9)
    C = synth_covariance(M, CovarianceModel("exponential", rho))
    Phi = PilotMatrix(np.linalg.qr(crandn(rng, M, T_dl))[0])
    ests = []
    for _ in range(K):
        h = draw_channel(C, rng).h
        y = Phi.Phi.conj().T @ h + crandn(rng, T_dl, var=1 / P_dl)
        ests.append(lmmse_estimate(C, Phi, 1 / P_dl, y))
    est = EstimateSet.from_estimates(ests, np.full(K, 1 / P_dl))
    P = PrecoderSet(crandn(rng, M), crandn(rng, M, K)).normalized()
    return est, P


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scalar_est():
    """M = K = 1, h_hat = 1, C_err = 0.5, sigma2 = 1."""
    return EstimateSet(np.array([[1.0]]), np.array([[[0.5]]]), np.array([1.0]))


@pytest.fixture
def criterion(request):
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
