"""Market-data ingestion, date splits, synthetic markets and dataset manifests.

File formats
------------
Returns CSV::

    timestamp,AAA,BBB
    2020-02-03T21:00:00Z,0.0012,-0.0034

Prices CSV has the same layout with strictly positive prices; returns are the
simple returns ``p_t / p_{t-1} - 1``. Timestamps are ISO-8601; values without
an offset are read as UTC. Missing or non-numeric cells are rejected, never
imputed (see :func:`clean_csv` for an explicit row filter).

Manifest JSON is a list of ``{"label", "frequency", "path", "role"}`` objects
(or an object with such a list under ``"datasets"``); ``role`` is one of
``source_train``, ``target_train``, ``target_test`` and relative paths are
resolved against the manifest's directory.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import Frequency, MomentEstimate, ReturnSeries
from .errors import (
    EmptySplitError,
    InvalidConfigError,
    InvalidSpecError,
    NonMonotoneTimestampsError,
    NonPositivePriceError,
    ParseError,
    RaggedRowError,
)

ROLES = ("source_train", "target_train", "target_test")
TRAIN_FRACTION = 0.8
# the unrelated regime has no common drift: nothing the source learned carries over
REDRAW_MEAN_DRIFT = 0.0

_SESSION_OPEN = np.timedelta64(14 * 60 + 30, "m")  # 09:30 New York in UTC, winter time
_FIRST_DAY = np.datetime64("2000-01-03", "D")


@dataclass(frozen=True)
class Dataset:
    """A return series with a free-form tag (market, sector or frequency)."""

    series: ReturnSeries
    label: str = ""

    @property
    def asset_ids(self) -> tuple[str, ...]:
        return self.series.asset_ids

    @property
    def frequency(self) -> Frequency:
        return self.series.frequency

    def select_assets(self, columns: Sequence[int]) -> "Dataset":
        return Dataset(self.series.select_assets(columns), self.label)


# --------------------------------------------------------------------------
# CSV parsing
# --------------------------------------------------------------------------


def parse_timestamp(text: str) -> tuple[np.datetime64, date]:
    """Parse an ISO-8601 instant into a UTC ``datetime64[us]`` and its local date.

    The local date is the calendar date as written, before conversion to UTC;
    it delimits trading sessions.
    """
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    local_day = dt.date()
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, "us"), local_day


def format_timestamp(ts: np.datetime64) -> str:
    ts = np.datetime64(ts, "us")
    unit = "s" if ts.astype(np.int64) % 1_000_000 == 0 else "us"
    return np.datetime_as_string(ts, unit=unit) + "Z"


def _read_table(path: str | os.PathLike) -> tuple[list[str], list[np.datetime64], list[date], NDArray]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=0) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "timestamp":
            raise ParseError(f"{path}: header must be 'timestamp' followed by asset ids", row=1)
        ids = header[1:]
        stamps: list[np.datetime64] = []
        days: list[date] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise RaggedRowError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}", row=lineno)
            try:
                ts, day = parse_timestamp(row[0])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad timestamp {row[0]!r}",
                                 row=lineno, column="timestamp") from None
            values = []
            for col, cell in zip(ids, row[1:]):
                try:
                    x = float(cell)
                except ValueError:
                    x = math.nan
                if not math.isfinite(x):
                    raise ParseError(f"{path}:{lineno}: column {col!r} has non-numeric value {cell!r}",
                                     row=lineno, column=col)
                values.append(x)
            stamps.append(ts)
            days.append(day)
            rows.append(values)
    for i in range(1, len(stamps)):
        if stamps[i] <= stamps[i - 1]:
            raise NonMonotoneTimestampsError(
                f"{path}: timestamp {np.datetime_as_string(stamps[i])} does not follow "
                f"{np.datetime_as_string(stamps[i - 1])} (data row {i + 1})")
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(ids))
    return ids, stamps, days, values


def _session_starts(days: Sequence[date]) -> tuple[int, ...]:
    return tuple(i for i, day in enumerate(days) if i == 0 or day != days[i - 1])


def load_returns_csv(path: str | os.PathLike, frequency: Frequency | str, label: str | None = None) -> Dataset:
    """Read a returns CSV.

    For intraday frequencies the first row of each calendar date is marked as
    a session boundary (the bar carrying the overnight move).

    Raises
    ------
    ParseError
        On a malformed header, timestamp or value; message names row and column.
    RaggedRowError
        If a row has the wrong number of fields.
    NonMonotoneTimestampsError
        If timestamps are not strictly increasing.
    """
    freq = Frequency.parse(frequency)
    ids, stamps, days, values = _read_table(path)
    bounds = _session_starts(days) if freq.is_intraday else ()
    series = ReturnSeries(tuple(ids), np.array(stamps, dtype="datetime64[us]"), values, freq, bounds)
    return Dataset(series, label if label is not None else Path(path).stem)


def load_prices_csv(path: str | os.PathLike, frequency: Frequency | str, label: str | None = None) -> Dataset:
    """Read a prices CSV and convert it to simple returns (one row shorter).

    A return is timestamped at the later of its two prices. For intraday data
    a return is a session boundary when its two prices fall on different
    calendar dates.
    """
    freq = Frequency.parse(frequency)
    ids, stamps, days, prices = _read_table(path)
    if prices.size and np.any(prices <= 0):
        r, c = np.argwhere(prices <= 0)[0]
        raise NonPositivePriceError(f"{path}: non-positive price {prices[r, c]!r} "
                                    f"in column {ids[c]!r} (data row {r + 1})")
    if prices.shape[0] < 2:
        raise ParseError(f"{path}: need at least two price rows", row=len(stamps) + 1)
    returns = prices[1:] / prices[:-1] - 1.0
    bounds = ()
    if freq.is_intraday:
        bounds = tuple(i - 1 for i in range(1, len(days)) if days[i] != days[i - 1])
    series = ReturnSeries(tuple(ids), np.array(stamps[1:], dtype="datetime64[us]"), returns, freq, bounds)
    return Dataset(series, label if label is not None else Path(path).stem)


def save_returns_csv(ds: Dataset, path: str | os.PathLike) -> None:
    """Write a returns CSV with 17 significant digits (exact float round trip)."""
    s = ds.series
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *s.asset_ids])
        for ts, row in zip(s.timestamps, s.values):
            w.writerow([format_timestamp(ts), *(f"{x:.17g}" for x in row)])


def clean_csv(src: str | os.PathLike, dst: str | os.PathLike) -> tuple[int, int]:
    """Copy ``src`` to ``dst`` keeping only complete, finite rows.

    Returns ``(kept, dropped)`` row counts. The header is copied verbatim.
    """
    kept = dropped = 0
    with Path(src).open(newline="") as fin, Path(dst).open("w", newline="") as fout:
        reader = csv.reader(fin)
        writer = csv.writer(fout, lineterminator="\n")
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{src}: empty file", row=0)
        writer.writerow(header)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            ok = len(row) == len(header)
            if ok:
                try:
                    parse_timestamp(row[0])
                    ok = all(math.isfinite(float(c)) for c in row[1:])
                except ValueError:
                    ok = False
            if ok:
                writer.writerow(row)
                kept += 1
            else:
                dropped += 1
    return kept, dropped


# --------------------------------------------------------------------------
# splits
# --------------------------------------------------------------------------


def _to_instant(b) -> np.datetime64:
    if isinstance(b, str):
        return parse_timestamp(b)[0]
    if isinstance(b, datetime) and b.tzinfo is not None:
        b = b.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(b, "us")


def slice_rows(ds: Dataset, start: int, stop: int, label: str | None = None) -> Dataset:
    """Rows ``[start, stop)`` of a dataset, session boundaries re-indexed."""
    s = ds.series
    bounds = tuple(b - start for b in s.session_boundaries if start <= b < stop)
    series = ReturnSeries(s.asset_ids, s.timestamps[start:stop], s.values[start:stop],
                          s.frequency, bounds)
    return Dataset(series, ds.label if label is None else label)


def split_by_dates(ds: Dataset, boundaries: Iterable) -> list[Dataset]:
    """Partition a dataset at the given instants.

    ``k`` increasing boundaries ``b_1 < ... < b_k`` give ``k + 1`` datasets
    covering ``(-inf, b_1), [b_1, b_2), ..., [b_k, +inf)``.

    Raises
    ------
    EmptySplitError
        If any interval contains no rows.
    """
    cuts = [_to_instant(b) for b in boundaries]
    if any(b2 <= b1 for b1, b2 in zip(cuts, cuts[1:])):
        raise InvalidConfigError("split boundaries must be strictly increasing")
    ts = ds.series.timestamps
    idx = [0, *(int(np.searchsorted(ts, c, side="left")) for c in cuts), ts.size]
    out = []
    for i, (a, b) in enumerate(zip(idx, idx[1:])):
        if b <= a:
            raise EmptySplitError(f"split interval {i} contains no rows")
        out.append(slice_rows(ds, a, b))
    return out


# --------------------------------------------------------------------------
# synthetic markets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticMarketSpec:
    """Parameters of a synthetic source/target market pair.

    ``mu0`` and ``sigma0`` are annualized. ``similarity`` interpolates the
    target regime between an independent redraw (0) and the source regime (1).
    """

    d: int
    mu0: NDArray[np.float64]
    sigma0: NDArray[np.float64]
    similarity: float
    horizon_periods: int
    frequency: Frequency = Frequency.DAY_1
    seed: int = 0

    def __post_init__(self) -> None:
        mu0 = np.asarray(self.mu0, dtype=np.float64).reshape(-1)
        sigma0 = np.asarray(self.sigma0, dtype=np.float64)
        if self.d < 1 or mu0.shape != (self.d,) or sigma0.shape != (self.d, self.d):
            raise InvalidSpecError("mu0/sigma0 shapes do not match d")
        if not (np.all(np.isfinite(mu0)) and np.all(np.isfinite(sigma0))):
            raise InvalidSpecError("regime contains NaN or Inf")
        if not np.allclose(sigma0, sigma0.T, atol=1e-12, rtol=0):
            raise InvalidSpecError("sigma0 must be symmetric")
        try:
            np.linalg.cholesky(sigma0)
        except np.linalg.LinAlgError:
            raise InvalidSpecError("sigma0 must be positive definite") from None
        if not (0.0 <= self.similarity <= 1.0):
            raise InvalidSpecError(f"similarity must be in [0, 1], got {self.similarity}")
        n_test = self.horizon_periods - int(round(TRAIN_FRACTION * self.horizon_periods))
        if n_test < self.d + 2:
            raise InvalidSpecError(f"horizon_periods={self.horizon_periods} leaves too few test rows")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidSpecError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "sigma0", 0.5 * (sigma0 + sigma0.T))
        object.__setattr__(self, "frequency", Frequency.parse(self.frequency))


def philox(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    """Counter-based generator keyed by a seed sequence."""
    return np.random.Generator(np.random.Philox(seed_seq))


def random_regime(
    rng: np.random.Generator,
    d: int,
    mean_drift: float = 0.08,
    drift_dispersion: float = 0.10,
    vol_range: tuple[float, float] = (0.15, 0.40),
    loading_range: tuple[float, float] = (0.3, 0.8),
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Draw annualized ``(mu, sigma)`` from a one-factor equity-like family.

    Drifts are ``N(mean_drift, drift_dispersion^2)``; volatilities are
    uniform on ``vol_range``; correlations come from a single market factor
    with loadings uniform on ``loading_range``.
    """
    mu = rng.normal(mean_drift, drift_dispersion, size=d)
    vols = rng.uniform(*vol_range, size=d)
    beta = rng.uniform(*loading_range, size=d)
    corr = np.outer(beta, beta)
    np.fill_diagonal(corr, 1.0)
    sigma = corr * np.outer(vols, vols)
    return mu, 0.5 * (sigma + sigma.T)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    regime, source, target = np.random.SeedSequence(int(seed)).spawn(3)
    return philox(regime), philox(source), philox(target)


def synthetic_regimes(spec: SyntheticMarketSpec) -> tuple[MomentEstimate, MomentEstimate]:
    """True annualized source and target regimes of a synthetic spec."""
    regime_rng, _, _ = _streams(spec.seed)
    mu_new, sigma_new = random_regime(regime_rng, spec.d, mean_drift=REDRAW_MEAN_DRIFT)
    s = float(spec.similarity)
    mu_t = (1.0 - s) * mu_new + s * spec.mu0
    sigma_t = (1.0 - s) * sigma_new + s * spec.sigma0
    return MomentEstimate(spec.mu0, spec.sigma0), MomentEstimate(mu_t, sigma_t)


def synthetic_timestamps(n: int, frequency: Frequency, start_day: np.datetime64 = _FIRST_DAY) -> tuple[NDArray, tuple[int, ...]]:
    """Bar-close timestamps on consecutive business days, plus session starts."""
    bpd = frequency.bars_per_day
    n_days = -(-n // bpd)
    days = np.busday_offset(start_day, np.arange(n_days), roll="forward").astype("datetime64[m]")
    bar = np.arange(n)
    minutes = _SESSION_OPEN + np.timedelta64(frequency.minutes_per_bar, "m") * (bar % bpd + 1)
    ts = (days[bar // bpd] + minutes).astype("datetime64[us]")
    bounds = tuple(range(0, n, bpd)) if frequency.is_intraday else ()
    return ts, bounds


def _sample(rng: np.random.Generator, m: MomentEstimate, n: int, frequency: Frequency) -> NDArray:
    a = frequency.periods_per_year
    chol = np.linalg.cholesky(m.sigma / a)
    z = rng.standard_normal((n, m.d))
    return m.mu / a + z @ chol.T


def generate_synthetic_pair(spec: SyntheticMarketSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Draw ``(source, target_train, target_test)`` Gaussian i.i.d. datasets.

    The source has ``horizon_periods`` rows from ``(mu0, sigma0)``. The
    target regime mixes in, with weight ``1 - similarity``, an unrelated
    regime drawn from :func:`random_regime` with zero mean drift; its
    ``horizon_periods`` rows are split 80/20 in time into training and
    testing sets. An equal SyntheticMarketSpec always yields bit-identical datasets.
    """
    source_m, target_m = synthetic_regimes(spec)
    _, source_rng, target_rng = _streams(spec.seed)
    n, freq = spec.horizon_periods, spec.frequency
    n_train = int(round(TRAIN_FRACTION * n))

    ts, bounds = synthetic_timestamps(n, freq)
    src = ReturnSeries(tuple(f"S{i:02d}" for i in range(spec.d)), ts,
                       _sample(source_rng, source_m, n, freq), freq, bounds)
    tgt = Dataset(ReturnSeries(tuple(f"T{i:02d}" for i in range(spec.d)), ts,
                               _sample(target_rng, target_m, n, freq), freq, bounds),
                  "synthetic-target")
    return (Dataset(src, "synthetic-source"),
            slice_rows(tgt, 0, n_train),
            slice_rows(tgt, n_train, n))


# --------------------------------------------------------------------------
# manifests
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    label: str
    frequency: Frequency
    path: Path
    role: str
    kind: str = "returns"

    def load(self) -> Dataset:
        loader = load_prices_csv if self.kind == "prices" else load_returns_csv
        return loader(self.path, self.frequency, label=self.label)

    def to_dict(self) -> dict:
        return {"label": self.label, "frequency": self.frequency.value,
                "path": str(self.path), "role": self.role, "kind": self.kind}


def read_manifest(path: str | os.PathLike) -> list[ManifestEntry]:
    """Parse a dataset manifest; paths are resolved relative to its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", row=exc.lineno) from None
    if isinstance(raw, dict):
        raw = raw.get("datasets")
    if not isinstance(raw, list) or not raw:
        raise InvalidConfigError(f"{path}: manifest must be a non-empty list of datasets")
    entries = []
    for i, item in enumerate(raw):
        missing = {"label", "frequency", "path", "role"} - set(item)
        if missing:
            raise InvalidConfigError(f"{path}: entry {i} lacks {sorted(missing)}")
        if item["role"] not in ROLES:
            raise InvalidConfigError(f"{path}: entry {i} has unknown role {item['role']!r}")
        kind = item.get("kind", "returns")
        if kind not in ("returns", "prices"):
            raise InvalidConfigError(f"{path}: entry {i} has unknown kind {kind!r}")
        p = Path(item["path"])
        entries.append(ManifestEntry(str(item["label"]), Frequency.parse(item["frequency"]),
                                     p if p.is_absolute() else path.parent / p,
                                     item["role"], kind))
    return entries


def write_manifest(entries: Sequence[ManifestEntry], path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps([e.to_dict() for e in entries], indent=2) + "\n")


def load_manifest(path: str | os.PathLike) -> dict[str, dict[str, Dataset]]:
    """Load every dataset of a manifest, grouped as ``{role: {label: Dataset}}``."""
    grouped: dict[str, dict[str, Dataset]] = {r: {} for r in ROLES}
    for e in read_manifest(path):
        if e.label in grouped[e.role]:
            raise InvalidConfigError(f"duplicate {e.role} dataset for label {e.label!r}")
        grouped[e.role][e.label] = e.load()
    return grouped

