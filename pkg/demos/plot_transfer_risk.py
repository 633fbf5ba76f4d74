"""
Scoring a source market before transferring
===========================================

Transfer risk adds the reciprocal source Sharpe ratio to the Wasserstein-2
distance between the Gaussian models of source and target returns. Good
sources are profitable and look like the target.
"""

import numpy as np

from xferfolio import MomentEstimate, optimize_source, transfer_risk
from xferfolio.risk import gaussian_w2

target = MomentEstimate(mu=[0.08, 0.06], sigma=[[0.04, 0.01], [0.01, 0.03]])
candidates = {
    "close and profitable": MomentEstimate([0.09, 0.07], [[0.04, 0.01], [0.01, 0.03]]),
    "profitable, far away": MomentEstimate([0.30, -0.10], [[0.20, -0.05], [-0.05, 0.10]]),
    "close, unprofitable": MomentEstimate([0.01, 0.00], [[0.04, 0.01], [0.01, 0.03]]),
    "losing": MomentEstimate([-0.05, -0.02], [[0.04, 0.0], [0.0, 0.03]]),
}

for name, src in candidates.items():
    phi = optimize_source(src).portfolio
    rep = transfer_risk(phi, src, target)
    flag = " (degenerate source)" if rep.degenerate_source else ""
    print(f"{name:22s} r1={rep.r1:10.4g} r2={rep.r2:.4f} r_trans={rep.r_trans:10.4g}{flag}")

# the distance between two Gaussians with diagonal covariances reduces to
# the mean gap plus the gap between standard deviations
a = MomentEstimate([0.0, 0.0], np.diag([4.0, 4.0]))
b = MomentEstimate([0.0, 0.0], np.eye(2))
print("W2(N(0, 4I), N(0, I)) =", gaussian_w2(a, b), "vs sqrt(2) =", np.sqrt(2))
