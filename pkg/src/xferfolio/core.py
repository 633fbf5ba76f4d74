"""Shared domain types: sampling frequency, return series, moments, portfolios.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be shared freely between threads and worker processes.

Conventions
-----------
- Returns are simple per-period returns ``p_t / p_{t-1} - 1``.
- Moments are annualized with ``252 * bars_per_day`` periods per year.
- The Sharpe ratio uses a zero risk-free rate: ``mu @ w / sqrt(w @ sigma @ w)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DimensionMismatchError,
    NegativeWeightError,
    NonFiniteError,
    NonMonotoneTimestampsError,
    NotNormalizedError,
    NotPSDError,
    UnknownFrequencyError,
    ZeroVarianceError,
    XferfolioError,
)
from .linalg import check_symmetric, psd_repair

TRADING_DAYS_PER_YEAR = 252
SESSION_MINUTES = 390

SIMPLEX_TOL = 1e-9
NEGATIVE_WEIGHT_TOL = 1e-12
VARIANCE_FLOOR = 1e-18
PSD_TOL = 1e-10


def _readonly(a: NDArray) -> NDArray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class Frequency(enum.Enum):
    """Bar length of a return series within a 390-minute trading session."""

    MIN_1 = "1-minute"
    MIN_5 = "5-minute"
    MIN_10 = "10-minute"
    MIN_30 = "30-minute"
    MIN_65 = "65-minute"
    MIN_130 = "130-minute"
    DAY_1 = "1-day"

    @property
    def minutes_per_bar(self) -> int:
        if self is Frequency.DAY_1:
            return SESSION_MINUTES
        return int(self.value.split("-")[0])

    @property
    def bars_per_day(self) -> int:
        return SESSION_MINUTES // self.minutes_per_bar

    @property
    def is_intraday(self) -> bool:
        return self is not Frequency.DAY_1

    @property
    def periods_per_year(self) -> int:
        return TRADING_DAYS_PER_YEAR * self.bars_per_day

    @classmethod
    def parse(cls, text: "str | Frequency") -> "Frequency":
        if isinstance(text, Frequency):
            return text
        key = str(text).strip().lower()
        aliases = {"daily": "1-day", "1d": "1-day", "day": "1-day"}
        key = aliases.get(key, key)
        if key.endswith("min") and key[:-3].isdigit():
            key = f"{key[:-3]}-minute"
        for member in cls:
            if member.value == key:
                return member
        raise UnknownFrequencyError(f"unknown frequency {text!r}; expected one of "
                                    + ", ".join(m.value for m in cls))


@dataclass(frozen=True)
class ReturnSeries:
    """A ``T x d`` matrix of simple per-period returns.

    Attributes
    ----------
    asset_ids : tuple of str
        Column identifiers, length ``d``.
    timestamps : (T,) datetime64[us] ndarray
        Strictly increasing UTC instants, one per row.
    values : (T, d) float ndarray
        Per-period simple returns.
    frequency : Frequency
    session_boundaries : tuple of int
        Row indices of the first bar of each trading session. Those rows carry
        the close-to-open move and are dropped when overnight holding is
        excluded. Empty for daily data.
    """

    asset_ids: tuple[str, ...]
    timestamps: NDArray[np.datetime64]
    values: NDArray[np.float64]
    frequency: Frequency
    session_boundaries: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        ids = tuple(str(a) for a in self.asset_ids)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionMismatchError(f"values must be 2-D, got shape {values.shape}")
        ts = np.asarray(self.timestamps, dtype="datetime64[us]")
        T, d = values.shape
        if len(ids) != d:
            raise DimensionMismatchError(f"{len(ids)} asset ids for {d} columns")
        if ts.shape != (T,):
            raise DimensionMismatchError(f"{ts.shape[0]} timestamps for {T} rows")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise NonFiniteError(f"non-finite return at row {r}, asset {ids[c]!r}")
        if T > 1 and not np.all(ts[1:] > ts[:-1]):
            raise NonMonotoneTimestampsError("timestamps are not strictly increasing")
        bounds = tuple(int(b) for b in self.session_boundaries)
        if any(b < 0 or b >= T for b in bounds):
            raise XferfolioError("session boundary index out of range")
        object.__setattr__(self, "asset_ids", ids)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "timestamps", _readonly(ts))
        object.__setattr__(self, "frequency", Frequency.parse(self.frequency))
        object.__setattr__(self, "session_boundaries", tuple(sorted(set(bounds))))

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    def select_assets(self, columns: Sequence[int]) -> "ReturnSeries":
        """Return a series restricted to the given column indices, in order."""
        cols = list(columns)
        return ReturnSeries(
            asset_ids=tuple(self.asset_ids[c] for c in cols),
            timestamps=self.timestamps,
            values=self.values[:, cols],
            frequency=self.frequency,
            session_boundaries=self.session_boundaries,
        )


@dataclass(frozen=True)
class MomentEstimate:
    """Annualized mean vector and covariance matrix of asset returns.

    ``sigma`` is symmetrized on construction and tiny negative eigenvalues
    (down to ``-1e-10``) are clamped to zero; anything more negative raises
    :class:`NotPSDError`.
    """

    mu: NDArray[np.float64]
    sigma: NDArray[np.float64]
    sample_count: int = 0

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(mu)):
            raise NonFiniteError("mu contains NaN or Inf")
        sigma = check_symmetric(self.sigma)
        if sigma.shape != (mu.size, mu.size):
            raise DimensionMismatchError(
                f"mu has length {mu.size} but sigma has shape {sigma.shape}")
        if mu.size == 0:
            raise DimensionMismatchError("empty asset universe")
        lo = float(np.linalg.eigvalsh(sigma)[0])
        if lo < -PSD_TOL:
            raise NotPSDError(f"covariance has eigenvalue {lo:.3e} < -{PSD_TOL:g}")
        if lo < 0.0:
            sigma = psd_repair(sigma)
        object.__setattr__(self, "mu", _readonly(mu))
        object.__setattr__(self, "sigma", _readonly(sigma))
        object.__setattr__(self, "sample_count", int(self.sample_count))

    @property
    def d(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class Portfolio:
    """Long-only, fully invested weight vector (a point of the unit simplex)."""

    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.size == 0:
            raise DimensionMismatchError("portfolio needs at least one asset")
        if not np.all(np.isfinite(w)):
            raise NonFiniteError("weights contain NaN or Inf")
        if np.any(w < -NEGATIVE_WEIGHT_TOL):
            i = int(np.argmin(w))
            raise NegativeWeightError(f"weight {i} is negative ({w[i]:.3e})")
        w = np.clip(w, 0.0, None)
        total = float(w.sum())
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise NotNormalizedError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def d(self) -> int:
        return self.weights.size

    def to_list(self) -> list[float]:
        return [float(x) for x in self.weights]


@dataclass(frozen=True)
class TransferRiskReport:
    """Transfer risk of a source portfolio against a target distribution.

    ``r_trans = r1 + r2_weight * r2``; with the default weight of one this is
    the plain sum of the source-quality and distribution-distance terms.
    """

    r1: float
    r2: float
    r_trans: float
    source_sharpe: float
    degenerate_source: bool
    r2_weight: float = field(default=1.0)

    def to_dict(self) -> dict:
        return {
            "r1": self.r1,
            "r2": self.r2,
            "r_trans": self.r_trans,
            "source_sharpe": self.source_sharpe,
            "degenerate_source": self.degenerate_source,
            "r2_weight": self.r2_weight,
        }


def make_portfolio(weights: ArrayLike) -> Portfolio:
    """Validate ``weights`` as a simplex point without renormalizing.

    >>> make_portfolio([0.5, 0.5]).to_list()
    [0.5, 0.5]
    """
    return Portfolio(np.asarray(weights, dtype=np.float64))


def portfolio_variance(phi: Portfolio, m: MomentEstimate) -> float:
    w = phi.weights
    return float(w @ m.sigma @ w)


def portfolio_sharpe(phi: Portfolio, m: MomentEstimate) -> float:
    """Annualized Sharpe ratio ``mu @ w / sqrt(w @ sigma @ w)`` (risk-free rate 0).

    Raises
    ------
    DimensionMismatchError
        If the portfolio and moments disagree on the number of assets.
    ZeroVarianceError
        If the portfolio variance is at or below ``1e-18``.
    """
    if phi.d != m.d:
        raise DimensionMismatchError(f"portfolio has {phi.d} assets, moments have {m.d}")
    var = portfolio_variance(phi, m)
    if var <= VARIANCE_FLOOR:
        raise ZeroVarianceError(f"portfolio variance {var:.3e} is zero")
    return float(m.mu @ phi.weights) / float(np.sqrt(var))
