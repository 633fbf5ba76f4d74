"""
Annualized moments from intraday bars
=====================================

Intraday returns are annualized with 252 trading days times the number of
bars per session. The first bar of every session (the overnight move) is
left out, as strategies here do not hold positions overnight.
"""

import numpy as np

from xferfolio import Frequency, estimate_moments
from xferfolio.core import ReturnSeries
from xferfolio.data_io import synthetic_timestamps

freq = Frequency.MIN_30
n = freq.bars_per_day * 252 * 4
ts, bounds = synthetic_timestamps(n, freq)
rng = np.random.default_rng(0)

# annual drift 10%, annual vol 20%, plus a large overnight gap on every open
a = freq.periods_per_year
x = 0.10 / a + 0.20 / np.sqrt(a) * rng.standard_normal((n, 1))
x[list(bounds)] += 0.02 * rng.standard_normal((len(bounds), 1))
series = ReturnSeries(("SPY",), ts, x, freq, bounds)

print("bars per day", freq.bars_per_day, " periods per year", a)
for exclude in (True, False):
    m = estimate_moments(series, exclude_overnight=exclude)
    print(f"exclude_overnight={exclude!s:5}  mu={m.mu[0]:+.3f}  vol={np.sqrt(m.sigma[0, 0]):.3f}")
