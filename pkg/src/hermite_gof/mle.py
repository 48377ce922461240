"""Maximum likelihood fitting of the bivariate Hermite distribution.

The pgf depends on theta only through ``mu*lambda`` and ``sigma2*lambda**2``,
so fits are carried out in the sigma2 = 1 gauge over unconstrained
coordinates::

    lambda3 = softplus(u3)                  (or pinned to 0)
    lambda_i = lambda3 + softplus(u_i)
    mu = min(L + softplus(u_mu), max(50, L)), L = lambda1 + lambda2 + lambda3

``mu >= L`` keeps every Poisson packet rate nonnegative, so each point the
optimiser visits is a genuine distribution and can be sampled from.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .hermite import BHParams, gauge_normalize, pmf_table, poisson_decomposition
from .samples import BivariateSample, SampleError

__all__ = [
    "FitOptions",
    "FitResult",
    "FitError",
    "UnderflowWarning",
    "log_likelihood",
    "initial_estimate",
    "fit_mle",
    "to_free",
    "from_free",
]

EPS = 1e-3
MIN_N = 5


class FitError(RuntimeError):
    """The likelihood could not be maximised (no finite value found)."""


class UnderflowWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FitOptions:
    """Optimiser settings.

    fix_lambda3
        Pin lambda3 to 0 (3 free coordinates instead of 4).
    xatol
        Simplex size (sup-norm distance of every vertex to the best one) at
        which a run counts as converged.
    maxfev
        Evaluation budget per run.
    restarts
        Extra runs started from the incumbent optimum plus N(0, restart_scale**2)
        noise drawn from ``np.random.default_rng(seed)``.
    """

    fix_lambda3: bool = False
    xatol: float = 1e-6
    maxfev: int = 2000
    restarts: int = 2
    restart_scale: float = 0.5
    initial_step: float = 0.5
    seed: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class FitResult:
    theta_hat: BHParams
    loglik: float
    iterations: int
    converged: bool
    init_theta: BHParams
    init_loglik: float
    runs: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.as_dict(),
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "init_theta": self.init_theta.as_dict(),
            "init_loglik": self.init_loglik,
        }


def log_likelihood(p: BHParams, sample: BivariateSample) -> float:
    """Sum of log f(x_i, y_i; p).

    Returns ``-inf`` (with an :class:`UnderflowWarning` naming the cell) when
    an observed cell has probability below 1e-300, and ``-inf`` for points
    whose packet decomposition has a negative rate, which are not
    distributions.
    """
    if not poisson_decomposition(p).representable:
        warnings.warn("parameter point is not a distribution (negative packet rate)", UnderflowWarning, stacklevel=2)
        return -math.inf
    xs, ys, cnt = sample.distinct
    tbl = pmf_table(p, int(xs.max()), int(ys.max()))
    probs = tbl.probs[xs, ys]
    low = probs < _kernels.LOG_FLOOR
    if np.any(low):
        i = int(np.argmax(low))
        warnings.warn(
            f"cell ({xs[i]}, {ys[i]}) has probability {probs[i]:.3e} below the log floor",
            UnderflowWarning,
            stacklevel=2,
        )
        return -math.inf
    return float(cnt @ np.log(probs))


def _softplus_inv(x: float) -> float:
    x = max(x, 2 * _kernels.RATE_FLOOR)
    return x + math.log(-math.expm1(-x))


def to_free(p: BHParams, fix_lambda3: bool = False) -> np.ndarray:
    """Inverse of :func:`from_free` for a point already in the sigma2 = 1 gauge."""
    if p.sigma2 != 1.0:
        p = gauge_normalize(p)
    L = p.lambda1 + p.lambda2 + p.lambda3
    um = _softplus_inv(p.mu - L)
    if fix_lambda3:
        return np.array([_softplus_inv(p.lambda1), _softplus_inv(p.lambda2), um])
    return np.array(
        [
            _softplus_inv(p.lambda3),
            _softplus_inv(p.lambda1 - p.lambda3),
            _softplus_inv(p.lambda2 - p.lambda3),
            um,
        ]
    )


def from_free(u, fix_lambda3: bool = False) -> BHParams:
    mu, l1, l2, l3 = _kernels.from_free(np.asarray(u, dtype=float), fix_lambda3)
    return BHParams(mu, 1.0, l1, l2, l3)


def initial_estimate(sample: BivariateSample, fix_lambda3: bool = False) -> BHParams:
    """Moment-matched starting point in the sigma2 = 1 gauge.

    In that gauge ``var_i - mean_i = (lambda_i + lambda3)**2`` and
    ``mean_i = mu * (lambda_i + lambda3)``. Underdispersed margins get
    lambda_i = 1e-3 (near-Poisson). lambda3 solves the covariance equation
    and is clipped to ``[0, 0.9 * min(lambda1, lambda2)]``; the point is then
    pushed inside the region the optimiser works in (mu >= 1.05 L, mu < 50).
    """
    if sample.n < MIN_N:
        raise SampleError(f"need at least {MIN_N} observations, got {sample.n}")
    if sample.is_degenerate():
        raise SampleError("degenerate sample: all pairs identical")
    x = sample.x.astype(float)
    y = sample.y.astype(float)
    m = np.array([x.mean(), y.mean()])
    v = np.array([x.var(ddof=1), y.var(ddof=1)])
    cov = float(np.cov(x, y)[0, 1])
    lam = np.maximum(np.sqrt(np.maximum(v - m, 0.0)), EPS)
    active = lam > EPS
    if np.any(active):
        mu = float(np.mean(m[active] / lam[active]))
    else:
        mu = float(max(m.max(), EPS) / EPS)
    l1, l2 = lam
    l3 = 0.0
    if not fix_lambda3:
        b = l1 + l2 + mu
        c = l1 * l2 - cov
        if c < 0:
            l3 = (-b + math.sqrt(b * b - 4 * c)) / 2
        l3 = min(max(l3, 0.0), 0.9 * min(l1, l2))
    l1 = max(l1, l3 + EPS)
    l2 = max(l2, l3 + EPS)
    L = l1 + l2 + l3
    mu = min(max(mu, 1.05 * L + EPS), 0.99 * _kernels.MU_CAP)
    # round-trip through the free coordinates so init_theta is exactly a simplex vertex
    return from_free(to_free(BHParams(mu, 1.0, l1, l2, l3), fix_lambda3), fix_lambda3)


def fit_mle(sample: BivariateSample, opts: FitOptions | None = None) -> FitResult:
    """Maximise the likelihood with restarted Nelder-Mead in the free coordinates.

    Deterministic given ``(sample, opts)``. The returned optimum is the best
    over all runs; ``converged`` reports whether that run met ``xatol``.
    """
    opts = opts or FitOptions()
    init = initial_estimate(sample, opts.fix_lambda3)
    xs, ys, cnt = sample.distinct
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    cnt = np.ascontiguousarray(cnt, dtype=np.float64)
    rmax, smax = int(xs.max()), int(ys.max())
    fix3 = bool(opts.fix_lambda3)
    u0 = to_free(init, fix3)
    init_ll = -_kernels.negloglik_free(u0, fix3, xs, ys, cnt, rmax, smax)

    rng = np.random.default_rng(opts.seed)
    runs = []
    best_u, best_f, best_conv = None, math.inf, False
    total = 0
    start = u0
    for k in range(opts.restarts + 1):
        if k > 0:
            start = best_u + rng.normal(0.0, opts.restart_scale, size=best_u.shape)
        u, f, nfev, conv = _kernels.nelder_mead(
            start, opts.initial_step, fix3, xs, ys, cnt, rmax, smax, opts.xatol, opts.maxfev
        )
        total += nfev
        runs.append((float(-f), int(nfev), bool(conv)))
        if f < best_f or best_u is None:
            best_u, best_f, best_conv = u, f, conv
    if not math.isfinite(best_f):
        raise FitError("no parameter point with finite likelihood was found")
    return FitResult(
        theta_hat=from_free(best_u, fix3),
        loglik=float(-best_f),
        iterations=total,
        converged=bool(best_conv),
        init_theta=init,
        init_loglik=float(init_ll),
        runs=runs,
    )
