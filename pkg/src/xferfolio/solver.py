"""Long-only maximum-Sharpe and proximal transfer solvers.

Both problems are solved over the unit simplex by projected gradient ascent.
All restarts run together as rows of one ``(R, d)`` iterate matrix; each row
keeps its own step length, which starts at ``SolverConfig.step_size`` and is
halved whenever the sufficient-ascent test fails, then allowed to grow again.

Objectives (``s = sqrt(w' S w + 1e-12)``)::

    sharpe(w)   = mu' w / s
    transfer(w) = mu' w / s - lam * ||anchor - w||^2
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import MomentEstimate, Portfolio, make_portfolio
from .errors import (
    DimensionMismatchError,
    InvalidConfigError,
    NegativeLambdaError,
    NonFiniteError,
    UnsupportedDimensionError,
)

VARIANCE_EPS = 1e-12
_STEP_GROWTH = 1.5
_MAX_STEP = 1e6
_MIN_STEP = 1e-30


@dataclass(frozen=True)
class SolverConfig:
    """Projected-gradient settings.

    ``restarts`` counts random Dirichlet(1) starts; the uniform portfolio is
    always added as start 0 (and the anchor as start 1 for transfer solves).
    ``seed`` keys the restart generator so solves are reproducible.
    """

    max_iterations: int = 5000
    step_size: float = 0.05
    tolerance: float = 1e-8
    restarts: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("max_iterations", "step_size", "tolerance", "restarts"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidConfigError(f"SolverConfig.{name} must be > 0, got {value!r}")

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "step_size": self.step_size,
            "tolerance": self.tolerance,
            "restarts": self.restarts,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SolveResult:
    portfolio: Portfolio
    objective_value: float
    iterations_used: int
    converged: bool


# --------------------------------------------------------------------------
# simplex projection
# --------------------------------------------------------------------------


def project_rows_to_simplex(v: ArrayLike) -> NDArray[np.float64]:
    """Euclidean projection of each row of ``v`` onto the unit simplex.

    Sort-and-threshold: with ``u`` sorted descending, ``rho`` is the largest
    ``k`` such that ``u_k - (sum_{i<=k} u_i - 1) / k > 0`` and the projection
    is ``max(v - theta, 0)`` with ``theta = (sum_{i<=rho} u_i - 1) / rho``.
    """
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    n, d = v.shape
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, d + 1)
    cond = u - css / k > 0
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


def project_to_simplex(v: ArrayLike) -> Portfolio:
    """Project a single vector onto the unit simplex.

    >>> project_to_simplex([2.0, 0.0]).to_list()
    [1.0, 0.0]
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise DimensionMismatchError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("vector contains NaN or Inf")
    w = project_rows_to_simplex(v)[0]
    # exact renormalization absorbs the last-ulp drift of the threshold
    return make_portfolio(w / w.sum())


# --------------------------------------------------------------------------
# objectives and gradients (rows are portfolios)
# --------------------------------------------------------------------------


def _rows(phi: ArrayLike) -> NDArray[np.float64]:
    if isinstance(phi, Portfolio):
        phi = phi.weights
    return np.atleast_2d(np.asarray(phi, dtype=np.float64))


def sharpe_objective(phi: ArrayLike, m: MomentEstimate):
    """``mu' w / sqrt(w' S w + eps)`` for a vector or each row of a matrix."""
    x = _rows(phi)
    s = np.sqrt(np.einsum("ij,jk,ik->i", x, m.sigma, x) + VARIANCE_EPS)
    out = (x @ m.mu) / s
    return float(out[0]) if x.shape[0] == 1 and np.ndim(_weights(phi)) == 1 else out


def sharpe_gradient(phi: ArrayLike, m: MomentEstimate):
    """Gradient ``mu / s - (mu' w) S w / s^3``."""
    x = _rows(phi)
    sx = x @ m.sigma
    s = np.sqrt(np.einsum("ij,ij->i", sx, x) + VARIANCE_EPS)
    ret = x @ m.mu
    g = m.mu[None, :] / s[:, None] - (ret / s**3)[:, None] * sx
    return g[0] if np.ndim(_weights(phi)) == 1 else g


def transfer_objective(phi: ArrayLike, m: MomentEstimate, anchor: ArrayLike, lam: float):
    """Sharpe objective minus ``lam * ||anchor - w||^2``."""
    x = _rows(phi)
    a = _weights(anchor)
    pen = lam * np.sum((x - a[None, :]) ** 2, axis=1)
    out = np.atleast_1d(sharpe_objective(x, m)) - pen
    return float(out[0]) if np.ndim(_weights(phi)) == 1 else out


def transfer_gradient(phi: ArrayLike, m: MomentEstimate, anchor: ArrayLike, lam: float):
    x = _rows(phi)
    a = _weights(anchor)
    g = np.atleast_2d(sharpe_gradient(x, m)) + 2.0 * lam * (a[None, :] - x)
    return g[0] if np.ndim(_weights(phi)) == 1 else g


def _weights(phi: ArrayLike) -> NDArray[np.float64]:
    if isinstance(phi, Portfolio):
        return phi.weights
    return np.asarray(phi, dtype=np.float64)


# --------------------------------------------------------------------------
# projected gradient ascent
# --------------------------------------------------------------------------


def _initial_points(d: int, cfg: SolverConfig, extra: list[NDArray] | None = None) -> NDArray:
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    starts = [np.full(d, 1.0 / d)]
    starts.extend(extra or [])
    starts.extend(rng.dirichlet(np.ones(d), size=cfg.restarts))
    return project_rows_to_simplex(np.vstack(starts))


def _ascend(
    f: Callable[[NDArray], NDArray],
    grad: Callable[[NDArray], NDArray],
    x0: NDArray,
    cfg: SolverConfig,
) -> tuple[NDArray, NDArray, NDArray, NDArray]:
    """Run projected gradient ascent from every row of ``x0``.

    Returns final iterates, objective values, iteration counts and
    convergence flags, one entry per row.
    """
    x = x0.copy()
    n_rows = x.shape[0]
    fx = f(x)
    step = np.full(n_rows, float(cfg.step_size))
    iters = np.zeros(n_rows, dtype=int)
    converged = np.zeros(n_rows, dtype=bool)
    active = np.arange(n_rows)

    for _ in range(cfg.max_iterations):
        if active.size == 0:
            break
        xa, fa, ta = x[active], fx[active], step[active]
        ga = grad(xa)
        pending = np.ones(active.size, dtype=bool)
        cand = np.empty_like(xa)
        fc = np.empty_like(fa)
        while True:
            idx = np.flatnonzero(pending)
            cand[idx] = project_rows_to_simplex(xa[idx] + ta[idx, None] * ga[idx])
            fc[idx] = f(cand[idx])
            delta = cand[idx] - xa[idx]
            model = (fa[idx] + np.einsum("ij,ij->i", ga[idx], delta)
                     - np.einsum("ij,ij->i", delta, delta) / (2.0 * ta[idx]))
            slack = 1e-14 * np.maximum(1.0, np.abs(fa[idx]))
            ok = (fc[idx] >= model - slack) | (ta[idx] <= _MIN_STEP)
            pending[idx[ok]] = False
            if not pending.any():
                break
            ta[idx[~ok]] *= 0.5

        assert np.all(cand >= 0.0) and np.allclose(cand.sum(axis=1), 1.0, atol=1e-9, rtol=0)
        change = np.max(np.abs(cand - xa), axis=1)
        x[active] = cand
        fx[active] = fc
        step[active] = np.minimum(ta * _STEP_GROWTH, _MAX_STEP)
        iters[active] += 1
        done = change < cfg.tolerance
        converged[active[done]] = True
        active = active[~done]

    return x, fx, iters, converged


def _best(x: NDArray, fx: NDArray, iters: NDArray, conv: NDArray,
          f: Callable[[NDArray], NDArray]) -> SolveResult:
    top = float(np.max(fx))
    # earliest restart within 1e-12 of the best value wins
    i = int(np.flatnonzero(fx >= top - 1e-12 * max(1.0, abs(top)))[0])
    w = x[i] / x[i].sum()
    phi = make_portfolio(w)
    value = float(f(phi.weights[None, :])[0])
    return SolveResult(portfolio=phi, objective_value=value,
                       iterations_used=int(iters[i]), converged=bool(conv[i]))


def optimize_direct(m: MomentEstimate, cfg: SolverConfig | None = None) -> SolveResult:
    """Maximize the Sharpe ratio over long-only, fully invested portfolios.

    Parameters
    ----------
    m : MomentEstimate
        Annualized moments of the universe.
    cfg : SolverConfig, optional

    Returns
    -------
    SolveResult
        The best iterate over all restarts.
    """
    cfg = cfg or SolverConfig()
    if m.d == 1:
        phi = make_portfolio([1.0])
        return SolveResult(phi, float(sharpe_objective(phi.weights, m)), 0, True)

    def f(x):
        return np.atleast_1d(sharpe_objective(x, m))

    def g(x):
        return np.atleast_2d(sharpe_gradient(x, m))

    x0 = _initial_points(m.d, cfg)
    return _best(*_ascend(f, g, x0, cfg), f)


def optimize_source(source_m: MomentEstimate, cfg: SolverConfig | None = None) -> SolveResult:
    """Pretrain on source moments; the same problem as :func:`optimize_direct`."""
    return optimize_direct(source_m, cfg)


def optimize_transfer(
    target_m: MomentEstimate,
    pretrained: Portfolio,
    lam: float,
    cfg: SolverConfig | None = None,
) -> SolveResult:
    """Fine-tune on target moments with an L2 pull toward ``pretrained``.

    Maximizes ``sharpe(w) - lam * ||pretrained - w||^2`` over the simplex. The
    pretrained portfolio is one of the starting points. With ``lam == 0`` the
    problem is exactly :func:`optimize_direct` and is delegated to it.

    Raises
    ------
    NegativeLambdaError
        If ``lam < 0``.
    DimensionMismatchError
        If ``pretrained`` and ``target_m`` have different sizes.
    """
    cfg = cfg or SolverConfig()
    if not np.isfinite(lam):
        raise NonFiniteError("lambda must be finite")
    if lam < 0:
        raise NegativeLambdaError(f"lambda must be >= 0, got {lam}")
    if pretrained.d != target_m.d:
        raise DimensionMismatchError(
            f"pretrained portfolio has {pretrained.d} assets, target moments have {target_m.d}")
    if lam == 0:
        return optimize_direct(target_m, cfg)
    anchor = pretrained.weights

    def f(x):
        return np.atleast_1d(transfer_objective(x, target_m, anchor, lam))

    def g(x):
        return np.atleast_2d(transfer_gradient(x, target_m, anchor, lam))

    if target_m.d == 1:
        phi = make_portfolio([1.0])
        return SolveResult(phi, float(f(phi.weights[None, :])[0]), 0, True)
    x0 = _initial_points(target_m.d, cfg, extra=[anchor])
    return _best(*_ascend(f, g, x0, cfg), f)


# --------------------------------------------------------------------------
# verification oracle
# --------------------------------------------------------------------------


def simplex_grid(d: int, grid_step: float) -> NDArray[np.float64]:
    """All lattice points ``k / n`` of the ``d``-simplex, ``n = round(1 / grid_step)``."""
    if d not in (1, 2, 3):
        raise UnsupportedDimensionError(f"grid enumeration supports d <= 3, got {d}")
    n = int(round(1.0 / grid_step))
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        t = np.arange(n + 1) / n
        return np.column_stack([t, 1.0 - t])
    i, j = np.triu_indices(n + 1)
    # (i, j) with i <= j  ->  a = i, b = j - i, c = n - j
    a, b = i, j - i
    return np.column_stack([a, b, n - a - b]) / n


def brute_force_oracle(
    objective: Callable,
    d: int,
    grid_step: float,
    vectorized: bool = True,
) -> tuple[Portfolio, float]:
    """Exhaustively maximize ``objective`` on a simplex lattice.

    Parameters
    ----------
    objective : callable
        With ``vectorized=True`` it maps an ``(N, d)`` array of portfolios to
        ``N`` values; otherwise it is called once per length-``d`` portfolio.
    d : {2, 3}
    grid_step : float
        Lattice spacing, at most ``1e-2``.

    Returns
    -------
    (Portfolio, float)
        Best lattice point (first one on ties) and its value.
    """
    if d not in (2, 3):
        raise UnsupportedDimensionError(f"brute-force oracle supports d in {{2, 3}}, got {d}")
    if not (0 < grid_step <= 1e-2):
        raise InvalidConfigError(f"grid_step must be in (0, 1e-2], got {grid_step}")
    pts = simplex_grid(d, grid_step)
    if vectorized:
        vals = np.asarray(objective(pts), dtype=np.float64).reshape(-1)
        if vals.size == 1 and pts.shape[0] > 1:
            vals = np.full(pts.shape[0], vals[0])
    else:
        vals = np.array([float(objective(p)) for p in pts])
    i = int(np.argmax(vals))
    w = pts[i]
    return make_portfolio(w / w.sum()), float(vals[i])
