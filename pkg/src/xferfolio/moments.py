"""Annualized sample moments of a return series."""

from __future__ import annotations

import numpy as np

from .core import MomentEstimate, ReturnSeries
from .errors import InsufficientDataError, NonFiniteError
from .linalg import psd_repair

__all__ = ["estimate_moments", "psd_repair", "usable_returns"]


def usable_returns(series: ReturnSeries, exclude_overnight: bool) -> np.ndarray:
    """Rows of ``series.values`` that enter the estimate.

    With ``exclude_overnight`` on an intraday series, the first bar of every
    session (the bar spanning the previous close to the open) is dropped.
    Daily series are never filtered.
    """
    values = series.values
    if exclude_overnight and series.frequency.is_intraday and series.session_boundaries:
        keep = np.ones(values.shape[0], dtype=bool)
        keep[list(series.session_boundaries)] = False
        return values[keep]
    return values


def estimate_moments(series: ReturnSeries, exclude_overnight: bool = True) -> MomentEstimate:
    """Unbiased sample mean and covariance, annualized.

    Parameters
    ----------
    series : ReturnSeries
    exclude_overnight : bool, default True
        Drop session-opening bars of intraday data before estimating.

    Returns
    -------
    MomentEstimate
        ``mu = A * mean``, ``sigma = A * cov`` (divisor ``n - 1``) with
        ``A = 252 * bars_per_day``; ``sigma`` is PSD-repaired.

    Raises
    ------
    InsufficientDataError
        If fewer than ``d + 2`` rows remain after exclusion.
    """
    x = usable_returns(series, exclude_overnight)
    n, d = x.shape
    if n < d + 2:
        raise InsufficientDataError(f"need at least {d + 2} return rows for {d} assets, got {n}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("return series contains NaN or Inf")
    a = series.frequency.periods_per_year
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    sigma = psd_repair(0.5 * (cov + cov.T) * a)
    return MomentEstimate(mu=mean * a, sigma=sigma, sample_count=n)
