"""Experiment harness: pretrain, fine-tune, evaluate and score transfers.

One repetition pretrains on a source dataset, fine-tunes on target training
data, evaluates the transferred and direct-learning portfolios by their
Sharpe ratios on target testing data, and records the transfer risk.
Repetitions differ only in the randomly drawn source assets; each repetition
draws from its own counter-based substream keyed by ``(seed, index)``, so the
output does not depend on how many worker processes run it.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import Frequency, TransferRiskReport, portfolio_sharpe
from .data_io import (
    Dataset,
    SyntheticMarketSpec,
    generate_synthetic_pair,
    philox,
    random_regime,
)
from .errors import (
    ConstantInputError,
    DimensionMismatchError,
    EmptyCellError,
    InvalidConfigError,
    LengthMismatchError,
    UniverseTooSmallError,
)
from .moments import estimate_moments
from .risk import transfer_risk
from .solver import SolverConfig, optimize_direct, optimize_source, optimize_transfer

RISK_MOMENT_SOURCES = ("target_test", "target_train")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by every repetition of an experiment.

    ``lam`` is the L2 pull toward the pretrained portfolio (0.2 by default).
    ``risk_moment_source`` picks which target moments enter the distance term
    of the transfer risk: the testing data (default) or the training data.
    """

    n_repetitions: int = 200
    n_assets: int = 10
    lam: float = 0.2
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    risk_moment_source: str = "target_test"
    r2_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.n_repetitions < 2:
            raise InvalidConfigError("need >= 2 repetitions for a correlation")
        if self.n_assets < 2:
            raise InvalidConfigError("need >= 2 assets per universe")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise InvalidConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.risk_moment_source not in RISK_MOMENT_SOURCES:
            raise InvalidConfigError(f"risk_moment_source must be one of {RISK_MOMENT_SOURCES}")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidConfigError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "n_repetitions": self.n_repetitions,
            "n_assets": self.n_assets,
            "lambda": self.lam,
            "seed": self.seed,
            "solver": self.solver.to_dict(),
            "risk_moment_source": self.risk_moment_source,
            "r2_weight": self.r2_weight,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        return cls(
            n_repetitions=int(raw["n_repetitions"]),
            n_assets=int(raw["n_assets"]),
            lam=float(raw["lambda"]),
            seed=int(raw["seed"]),
            solver=SolverConfig(**raw.get("solver", {})),
            risk_moment_source=raw.get("risk_moment_source", "target_test"),
            r2_weight=float(raw.get("r2_weight", 1.0)),
        )


@dataclass(frozen=True)
class ExperimentRecord:
    repetition_index: int
    source_asset_ids: tuple[str, ...]
    transfer_risk: TransferRiskReport
    sharpe_transfer: float
    sharpe_direct: float
    outperformed_direct: bool
    source_label: str = ""
    target_label: str = ""
    target_asset_ids: tuple[str, ...] = ()
    similarity: float | None = None

    def to_dict(self) -> dict:
        r = self.transfer_risk
        return {
            "repetition_index": self.repetition_index,
            "source_label": self.source_label,
            "target_label": self.target_label,
            "source_asset_ids": list(self.source_asset_ids),
            "target_asset_ids": list(self.target_asset_ids),
            "r1": r.r1,
            "r2": r.r2,
            "r_trans": r.r_trans,
            "source_sharpe": r.source_sharpe,
            "degenerate_source": r.degenerate_source,
            "sharpe_transfer": self.sharpe_transfer,
            "sharpe_direct": self.sharpe_direct,
            "outperformed_direct": self.outperformed_direct,
            "similarity": self.similarity,
        }


# --------------------------------------------------------------------------
# single and repeated transfers
# --------------------------------------------------------------------------


def run_single_transfer(
    source: Dataset,
    target_train: Dataset,
    target_test: Dataset,
    cfg: ExperimentConfig,
    repetition_index: int = 0,
) -> ExperimentRecord:
    """Pretrain on ``source``, fine-tune on ``target_train``, test on ``target_test``.

    Intraday datasets are estimated without their overnight bars. A source
    with a non-positive Sharpe ratio still produces a record, flagged as
    degenerate in its transfer risk.
    """
    if source.series.n_assets != target_train.series.n_assets:
        raise DimensionMismatchError(
            f"source has {source.series.n_assets} assets, target has {target_train.series.n_assets}")
    if target_train.asset_ids != target_test.asset_ids:
        raise DimensionMismatchError("target training and testing data hold different assets")

    source_m = estimate_moments(source.series, exclude_overnight=True)
    train_m = estimate_moments(target_train.series, exclude_overnight=True)
    test_m = estimate_moments(target_test.series, exclude_overnight=True)

    pretrained = optimize_source(source_m, cfg.solver).portfolio
    direct = optimize_direct(train_m, cfg.solver).portfolio
    transferred = optimize_transfer(train_m, pretrained, cfg.lam, cfg.solver).portfolio

    sharpe_transfer = portfolio_sharpe(transferred, test_m)
    sharpe_direct = portfolio_sharpe(direct, test_m)
    risk_m = test_m if cfg.risk_moment_source == "target_test" else train_m
    risk = transfer_risk(pretrained, source_m, risk_m, cfg.r2_weight)
    return ExperimentRecord(
        repetition_index=repetition_index,
        source_asset_ids=source.asset_ids,
        transfer_risk=risk,
        sharpe_transfer=sharpe_transfer,
        sharpe_direct=sharpe_direct,
        outperformed_direct=sharpe_transfer > sharpe_direct,
        source_label=source.label,
        target_label=target_train.label,
        target_asset_ids=target_train.asset_ids,
    )


def repetition_rng(seed: int, index: int) -> np.random.Generator:
    """Independent substream for repetition ``index`` of an experiment."""
    return philox(np.random.SeedSequence([int(seed), int(index)]))


def _draw_columns(rng: np.random.Generator, available: int, k: int) -> list[int]:
    return sorted(int(c) for c in rng.choice(available, size=k, replace=False))


def _repetition(args: tuple) -> ExperimentRecord:
    universe, target_train, target_test, cfg, index = args
    rng = repetition_rng(cfg.seed, index)
    source = universe.select_assets(_draw_columns(rng, universe.series.n_assets, cfg.n_assets))
    if target_train.series.n_assets > cfg.n_assets:
        cols = _draw_columns(rng, target_train.series.n_assets, cfg.n_assets)
        target_train, target_test = target_train.select_assets(cols), target_test.select_assets(cols)
    return run_single_transfer(source, target_train, target_test, cfg, index)


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map, over worker processes when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def run_repeated(
    universe_source: Dataset,
    target_train: Dataset,
    target_test: Dataset,
    cfg: ExperimentConfig,
    workers: int = 1,
) -> list[ExperimentRecord]:
    """Repeat :func:`run_single_transfer` over random source-asset draws.

    Each repetition draws ``cfg.n_assets`` distinct source columns uniformly.
    A target universe wider than ``n_assets`` is subsampled the same way
    (random target stocks per repetition); a narrower one is an error.

    Raises
    ------
    UniverseTooSmallError
        If either universe has fewer than ``cfg.n_assets`` assets.
    """
    for name, ds in (("source", universe_source), ("target", target_train)):
        if ds.series.n_assets < cfg.n_assets:
            raise UniverseTooSmallError(
                f"{name} universe has {ds.series.n_assets} assets, need {cfg.n_assets}")
    tasks = [(universe_source, target_train, target_test, cfg, i) for i in range(cfg.n_repetitions)]
    return parallel_map(_repetition, tasks, workers)


# --------------------------------------------------------------------------
# synthetic similarity sweep
# --------------------------------------------------------------------------

SWEEP_BINS = 5


def similarity_label(similarity: float, bins: int = SWEEP_BINS) -> str:
    k = min(int(similarity * bins), bins - 1)
    return f"similarity {k / bins:.1f}-{(k + 1) / bins:.1f}"


def _sweep_repetition(args: tuple) -> ExperimentRecord:
    cfg, index, horizon, frequency = args
    rng = repetition_rng(cfg.seed, index)
    similarity = float(rng.uniform())
    mu0, sigma0 = random_regime(rng, cfg.n_assets)
    spec = SyntheticMarketSpec(cfg.n_assets, mu0, sigma0, similarity, horizon, frequency,
                               seed=int(rng.integers(2**63)))
    source, train, test = generate_synthetic_pair(spec)
    rec = run_single_transfer(source, train, test, cfg, index)
    return replace(rec, similarity=similarity, source_label=similarity_label(similarity),
                   target_label="synthetic")


def run_synthetic_sweep(
    cfg: ExperimentConfig,
    horizon_periods: int = 25200,
    frequency: Frequency = Frequency.DAY_1,
    workers: int = 1,
) -> list[ExperimentRecord]:
    """Synthetic transfers with similarity drawn uniformly on [0, 1] per repetition.

    Every repetition draws a fresh source regime from :func:`random_regime`
    and a synthetic market pair at a random similarity, then runs one
    transfer. Records carry the similarity and a binned source label.
    """
    tasks = [(cfg, i, horizon_periods, frequency) for i in range(cfg.n_repetitions)]
    return parallel_map(_sweep_repetition, tasks, workers)


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation of two equal-length sequences.

    >>> pearson_correlation([1, 2, 3], [1, 3, 2])
    0.5
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatchError(f"lengths differ: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise LengthMismatchError("need at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInputError("correlation undefined for constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def rescale_columns(a: np.ndarray) -> np.ndarray:
    """Min-max rescale each column to [0, 1]; constant columns become 0.5.

    NaN cells are ignored when finding the range and stay NaN.
    """
    a = np.asarray(a, dtype=np.float64)
    out = np.full_like(a, np.nan)
    for j in range(a.shape[1]):
        col = a[:, j]
        ok = np.isfinite(col)
        if not ok.any():
            continue
        lo, hi = col[ok].min(), col[ok].max()
        out[ok, j] = 0.5 if hi == lo else (col[ok] - lo) / (hi - lo)
    return out


@dataclass(frozen=True)
class GridSummary:
    """Per (source, target) means, rescaled heat maps and correlations.

    Matrices are indexed ``[source, target]``. ``correlations_per_target``
    correlates mean risk with mean transferred Sharpe across source labels;
    ``record_correlations_per_target`` pools every non-degenerate record of
    the target. A ``None`` correlation comes with a reason in the matching
    ``*_flags`` entry.
    """

    labels_source: list[str]
    labels_target: list[str]
    mean_risk: np.ndarray
    mean_sharpe: np.ndarray
    mean_sharpe_direct: np.ndarray
    rescaled_risk: np.ndarray
    rescaled_sharpe: np.ndarray
    correlations_per_target: list[float | None]
    correlation_flags: list[str | None]
    record_correlations_per_target: list[float | None]
    record_correlation_flags: list[str | None]
    n_records: np.ndarray
    n_degenerate: np.ndarray
    outperform_rate: np.ndarray

    def to_dict(self) -> dict:
        def mat(a):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]

        return {
            "labels_source": self.labels_source,
            "labels_target": self.labels_target,
            "mean_risk": mat(self.mean_risk),
            "mean_sharpe": mat(self.mean_sharpe),
            "mean_sharpe_direct": mat(self.mean_sharpe_direct),
            "rescaled_risk": mat(self.rescaled_risk),
            "rescaled_sharpe": mat(self.rescaled_sharpe),
            "correlations_per_target": self.correlations_per_target,
            "correlation_flags": self.correlation_flags,
            "record_correlations_per_target": self.record_correlations_per_target,
            "record_correlation_flags": self.record_correlation_flags,
            "n_records": self.n_records.tolist(),
            "n_degenerate": self.n_degenerate.tolist(),
            "outperform_rate": mat(self.outperform_rate),
        }


def _safe_corr(xs, ys) -> tuple[float | None, str | None]:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    ok = np.isfinite(xs) & np.isfinite(ys)
    if ok.sum() < 2:
        return None, "fewer than two usable points"
    try:
        return pearson_correlation(xs[ok], ys[ok]), None
    except ConstantInputError:
        return None, "constant input"


def summarize_grid(records_by_pair: Mapping[tuple[str, str], Sequence[ExperimentRecord]]) -> GridSummary:
    """Aggregate records of a source x target grid.

    Degenerate-source records are excluded from the means (but counted).
    Labels keep their order of first appearance in ``records_by_pair``.

    Raises
    ------
    EmptyCellError
        If some (source, target) pair is missing or has no records.
    """
    sources: list[str] = []
    targets: list[str] = []
    for s, t in records_by_pair:
        if s not in sources:
            sources.append(s)
        if t not in targets:
            targets.append(t)
    shape = (len(sources), len(targets))
    mean_risk = np.full(shape, np.nan)
    mean_sharpe = np.full(shape, np.nan)
    mean_direct = np.full(shape, np.nan)
    outperform = np.full(shape, np.nan)
    n_records = np.zeros(shape, dtype=int)
    n_degenerate = np.zeros(shape, dtype=int)
    pooled: dict[str, list[ExperimentRecord]] = {t: [] for t in targets}

    for i, s in enumerate(sources):
        for j, t in enumerate(targets):
            recs = records_by_pair.get((s, t))
            if not recs:
                raise EmptyCellError(f"no records for source {s!r} -> target {t!r}")
            good = [r for r in recs if not r.transfer_risk.degenerate_source]
            n_records[i, j] = len(recs)
            n_degenerate[i, j] = len(recs) - len(good)
            pooled[t].extend(good)
            if good:
                mean_risk[i, j] = np.mean([r.transfer_risk.r_trans for r in good])
                mean_sharpe[i, j] = np.mean([r.sharpe_transfer for r in good])
                mean_direct[i, j] = np.mean([r.sharpe_direct for r in good])
                outperform[i, j] = np.mean([r.outperformed_direct for r in good])

    corr, flags, rcorr, rflags = [], [], [], []
    for j, t in enumerate(targets):
        c, f = _safe_corr(mean_risk[:, j], mean_sharpe[:, j])
        corr.append(c)
        flags.append(f)
        c, f = _safe_corr([r.transfer_risk.r_trans for r in pooled[t]],
                          [r.sharpe_transfer for r in pooled[t]])
        rcorr.append(c)
        rflags.append(f)

    return GridSummary(sources, targets, mean_risk, mean_sharpe, mean_direct,
                       rescale_columns(mean_risk), rescale_columns(mean_sharpe),
                       corr, flags, rcorr, rflags, n_records, n_degenerate, outperform)


def group_records(records: Iterable[ExperimentRecord]) -> dict[tuple[str, str], list[ExperimentRecord]]:
    out: dict[tuple[str, str], list[ExperimentRecord]] = {}
    for r in records:
        out.setdefault((r.source_label, r.target_label), []).append(r)
    return out


# --------------------------------------------------------------------------
# output files
# --------------------------------------------------------------------------

RECORD_COLUMNS = (
    "repetition_index", "source_label", "target_label", "source_asset_ids",
    "target_asset_ids", "r1", "r2", "r_trans", "source_sharpe", "degenerate_source",
    "sharpe_transfer", "sharpe_direct", "outperformed_direct", "similarity",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return str(v)


def records_csv(records: Iterable[ExperimentRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        d = r.to_dict()
        w.writerow([_cell(d[c]) for c in RECORD_COLUMNS])
    return buf.getvalue()


def records_jsonl(records: Iterable[ExperimentRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), allow_nan=False) + "\n" for r in records)


def heatmap_csv(summary: GridSummary, which: str) -> str:
    """Plot-ready matrix: rows are source labels, columns target labels."""
    mat = {"risk": summary.rescaled_risk, "sharpe": summary.rescaled_sharpe}[which]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", *summary.labels_target])
    for label, row in zip(summary.labels_source, mat):
        w.writerow([label, *("" if not np.isfinite(v) else repr(float(v)) for v in row)])
    return buf.getvalue()


def summary_json(summary: GridSummary) -> str:
    return json.dumps(summary.to_dict(), indent=2, allow_nan=False) + "\n"


def correlation_table(summary: GridSummary) -> str:
    """Text table of correlations between risk and Sharpe ratio per target."""
    def fmt(c):
        return "n/a" if c is None else f"{c:.2f}"

    width = max(12, *(len(t) for t in summary.labels_target)) + 2
    lines = [
        "Correlation between risk and Sharpe ratio",
        "target".ljust(width) + "across-sources".rjust(16) + "all-records".rjust(14),
    ]
    for t, c, rc in zip(summary.labels_target, summary.correlations_per_target,
                        summary.record_correlations_per_target):
        lines.append(t.ljust(width) + fmt(c).rjust(16) + fmt(rc).rjust(14))
    return "\n".join(lines) + "\n"


def write_outputs(out_dir: str | os.PathLike, records: Sequence[ExperimentRecord],
                  summary: GridSummary) -> list[Path]:
    """Write records (CSV, JSONL), summary JSON and the two heat-map CSVs."""
    out = Path(out_dir)
    files = {
        "records.csv": records_csv(records),
        "records.jsonl": records_jsonl(records),
        "grid_summary.json": summary_json(summary),
        "heatmap_risk.csv": heatmap_csv(summary, "risk"),
        "heatmap_sharpe.csv": heatmap_csv(summary, "sharpe"),
    }
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        written.append(path)
    return written
