from __future__ import annotations

import numpy as np
import pytest

from xferfolio.core import Frequency, MomentEstimate, ReturnSeries
from xferfolio.data_io import Dataset, synthetic_timestamps

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def random_spd(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    b = rng.normal(size=(d, d)) * scale
    return b.T @ b + 0.01 * np.eye(d)


def random_moments(rng: np.random.Generator, d: int) -> MomentEstimate:
    return MomentEstimate(rng.normal(0.1, 0.2, size=d), random_spd(rng, d, 0.3))


def gaussian_dataset(rng, mu_annual, sigma_annual, n, frequency=Frequency.DAY_1, label="ds",
                     prefix="A") -> Dataset:
    """i.i.d. Gaussian returns whose annualized moments are the given ones."""
    a = frequency.periods_per_year
    mu_annual = np.asarray(mu_annual, dtype=float)
    chol = np.linalg.cholesky(np.asarray(sigma_annual, dtype=float) / a)
    x = mu_annual / a + rng.standard_normal((n, mu_annual.size)) @ chol.T
    ts, bounds = synthetic_timestamps(n, frequency)
    ids = tuple(f"{prefix}{i}" for i in range(mu_annual.size))
    return Dataset(ReturnSeries(ids, ts, x, frequency, bounds), label)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
