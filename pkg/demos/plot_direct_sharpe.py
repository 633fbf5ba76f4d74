"""
Maximum-Sharpe portfolios on the simplex
========================================

Solve the long-only maximum-Sharpe problem for a small market and compare
it against an exhaustive grid search.
"""

import numpy as np

from xferfolio import MomentEstimate, optimize_direct, portfolio_sharpe
from xferfolio.solver import brute_force_oracle, sharpe_objective

# two uncorrelated assets, the first with twice the expected return
m = MomentEstimate(mu=[0.2, 0.1], sigma=np.eye(2))
res = optimize_direct(m)
print("weights", np.round(res.portfolio.weights, 6))
print("Sharpe ", round(portfolio_sharpe(res.portfolio, m), 6))

# the analytic optimum puts weights proportional to mu / variance: (2/3, 1/3)
phi, best = brute_force_oracle(lambda p: sharpe_objective(p, m), d=2, grid_step=1e-4)
print("grid   ", phi.weights, round(best, 6))

# a correlated three-asset market
rng = np.random.default_rng(0)
b = rng.normal(size=(3, 3)) * 0.3
m3 = MomentEstimate(mu=[0.12, 0.08, 0.05], sigma=b.T @ b + 0.01 * np.eye(3))
res3 = optimize_direct(m3)
phi3, best3 = brute_force_oracle(lambda p: sharpe_objective(p, m3), d=3, grid_step=1e-3)
print("solver", np.round(res3.portfolio.weights, 4), round(res3.objective_value, 6))
print("grid  ", np.round(phi3.weights, 4), round(best3, 6))
