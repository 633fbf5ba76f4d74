"""Transfer learning for long-only maximum-Sharpe portfolios.

Pretrain a portfolio on source-market returns, fine-tune it on target data
under an L2 pull toward the pretrained weights, and score the pair with a
transfer risk (inverse source Sharpe plus Gaussian Wasserstein-2 distance).
"""

__version__ = "0.1.0"

from .core import (
    Frequency,
    MomentEstimate,
    Portfolio,
    ReturnSeries,
    TransferRiskReport,
    make_portfolio,
    portfolio_sharpe,
)
from .data_io import (
    Dataset,
    SyntheticMarketSpec,
    generate_synthetic_pair,
    load_prices_csv,
    load_returns_csv,
    save_returns_csv,
    split_by_dates,
)
from .experiments import (
    ExperimentConfig,
    ExperimentRecord,
    GridSummary,
    pearson_correlation,
    run_repeated,
    run_single_transfer,
    run_synthetic_sweep,
    summarize_grid,
)
from .moments import estimate_moments, psd_repair
from .risk import gaussian_w2, r1_inverse_sharpe, transfer_risk
from .solver import (
    SolveResult,
    SolverConfig,
    brute_force_oracle,
    optimize_direct,
    optimize_source,
    optimize_transfer,
    project_to_simplex,
)
