"""
Does transfer risk predict the outcome?
=======================================

Run the synthetic similarity sweep: every repetition draws a source market
and a target that shares a random fraction of its return distribution.
The correlation between transfer risk and the out-of-sample Sharpe ratio
of the fine-tuned portfolio should be clearly negative.

This takes about 20 seconds.
"""

import numpy as np

from xferfolio.experiments import ExperimentConfig, pearson_correlation, run_synthetic_sweep

cfg = ExperimentConfig(n_repetitions=200, n_assets=10, seed=7)
records = [r for r in run_synthetic_sweep(cfg) if not r.transfer_risk.degenerate_source]

risk = np.array([r.transfer_risk.r_trans for r in records])
sharpe = np.array([r.sharpe_transfer for r in records])
sim = np.array([r.similarity for r in records])

print("records             ", len(records))
print("corr(risk, Sharpe)  ", round(pearson_correlation(risk, sharpe), 3))
print("corr(similarity, r2)", round(pearson_correlation(sim, [r.transfer_risk.r2 for r in records]), 3))

# mean outcome by similarity bin
for lo in np.arange(0, 1, 0.2):
    sel = (sim >= lo) & (sim < lo + 0.2)
    print(f"similarity {lo:.1f}-{lo + 0.2:.1f}: risk {risk[sel].mean():6.3f}  Sharpe {sharpe[sel].mean():6.3f}")
