"""Transfer risk: source-quality term plus Gaussian Wasserstein-2 distance.

``r1`` is the reciprocal of the pretrained portfolio's Sharpe ratio under the
source moments. ``r2`` is the Wasserstein-2 distance between the Gaussians
``N(mu_S, Sigma_S)`` and ``N(mu_T, Sigma_T)``, in closed form::

    W2^2 = ||mu_S - mu_T||^2
           + tr(Sigma_S + Sigma_T - 2 (Sigma_T^1/2 Sigma_S Sigma_T^1/2)^1/2)

Lower transfer risk marks a more promising source.
"""

from __future__ import annotations

import numpy as np

from .core import (
    PSD_TOL,
    MomentEstimate,
    Portfolio,
    TransferRiskReport,
    portfolio_sharpe,
)
from .errors import DimensionMismatchError, NotPSDError
from .linalg import sqrtm_psd

SHARPE_FLOOR = 1e-6
R_CAP = 1e6


def r1_inverse_sharpe(source_phi: Portfolio, source_m: MomentEstimate) -> tuple[float, bool]:
    """Reciprocal source Sharpe ratio and a degenerate-source flag.

    Sharpe ratios at or below ``1e-6`` cannot be inverted meaningfully; they
    yield ``(1e6, True)`` so that sweeps keep running.
    """
    return _invert_sharpe(portfolio_sharpe(source_phi, source_m))


def _invert_sharpe(s: float) -> tuple[float, bool]:
    if s > SHARPE_FLOOR:
        return 1.0 / s, False
    return R_CAP, True


def _check_psd(sigma: np.ndarray, name: str) -> None:
    lo = float(np.linalg.eigvalsh(sigma)[0])
    if lo < -PSD_TOL:
        raise NotPSDError(f"{name} has eigenvalue {lo:.3e}")


def gaussian_w2(m_s: MomentEstimate, m_t: MomentEstimate) -> float:
    """Wasserstein-2 distance between two Gaussian return models.

    Parameters
    ----------
    m_s, m_t : MomentEstimate
        Source and target moments, same number of assets.

    Returns
    -------
    float
        Nonnegative distance in annualized-return units.
    """
    if m_s.d != m_t.d:
        raise DimensionMismatchError(f"source has {m_s.d} assets, target has {m_t.d}")
    _check_psd(m_s.sigma, "source covariance")
    _check_psd(m_t.sigma, "target covariance")
    # The Bures term equals min over orthogonal U of ||S^1/2 - T^1/2 U||_F^2,
    # attained at the polar factor of T^1/2 S^1/2. Evaluating the residual
    # directly avoids the cancellation in tr(S) + tr(T) - 2 tr(cross), which
    # would leave ~1e-8 of noise after the square root for identical inputs.
    root_s = sqrtm_psd(m_s.sigma)
    root_t = sqrtm_psd(m_t.sigma)
    left, _, right_t = np.linalg.svd(root_s @ root_t)
    resid = root_s - root_t @ (right_t.T @ left.T)
    dmu = m_s.mu - m_t.mu
    return float(np.sqrt(max(float(dmu @ dmu) + float(np.sum(resid * resid)), 0.0)))


def transfer_risk(
    source_phi: Portfolio,
    source_m: MomentEstimate,
    target_m: MomentEstimate,
    r2_weight: float = 1.0,
) -> TransferRiskReport:
    """Assemble ``r_trans = r1 + r2_weight * r2`` for a pretrained portfolio.

    ``r2_weight`` defaults to 1, the unweighted sum; other values are meant
    for sensitivity studies only.
    """
    s = portfolio_sharpe(source_phi, source_m)
    r1, degenerate = _invert_sharpe(s)
    r2 = gaussian_w2(source_m, target_m)
    r_trans = r1 + r2 if r2_weight == 1.0 else r1 + r2_weight * r2
    return TransferRiskReport(r1=r1, r2=r2, r_trans=r_trans, source_sharpe=s,
                              degenerate_source=degenerate, r2_weight=float(r2_weight))
