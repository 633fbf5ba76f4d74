"""
Fine-tuning a pretrained portfolio
==================================

Pretrain on a source market, then re-optimize on a target market with a
penalty that keeps the new weights close to the pretrained ones. Sweeping
the penalty strength moves the answer from the target optimum to the
source optimum.
"""

import numpy as np

from xferfolio import MomentEstimate, optimize_source, optimize_transfer

source = MomentEstimate(mu=[0.15, 0.05, 0.02], sigma=np.diag([0.04, 0.02, 0.03]))
target = MomentEstimate(mu=[0.02, 0.10, 0.08], sigma=np.diag([0.05, 0.03, 0.02]))

pre = optimize_source(source).portfolio
print("pretrained", np.round(pre.weights, 4))

for lam in [0.0, 0.05, 0.2, 1.0, 10.0, 1e6]:
    phi = optimize_transfer(target, pre, lam).portfolio.weights
    gap = np.abs(phi - pre.weights).max()
    print(f"lambda={lam:>9g}  weights={np.round(phi, 4)}  max|phi - pretrained|={gap:.2e}")
