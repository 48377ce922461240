"""Parametric bootstrap goodness-of-fit test.

Fit theta on the data, compute V_obs, then for b = 1..B draw n pairs from
BH(theta_hat), refit, and recompute the statistic. The p-value uses the
add-one rule ``(1 + #{V*_b >= V_obs}) / (B_eff + 1)``.

Each replicate b gets its own generator seeded by
``derive_replicate_seed(seed, b)``, so the replicate statistics do not
depend on how replicates are spread over worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hermite import BHParams, NotRepresentableError, sample_bhd
from .mle import FitError, FitOptions, FitResult, fit_mle
from .samples import BivariateSample, SampleError
from .statistic import DEFAULT_RTOL, QuadratureError, WeightSpec, statistic_vnw

__all__ = [
    "TestReport",
    "BootstrapError",
    "derive_replicate_seed",
    "derive_seed",
    "bootstrap_p_value",
    "critical_value",
    "run_bootstrap_test",
    "run_bootstrap_multi",
    "DEFAULT_ALPHAS",
]

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
DEFAULT_ALPHAS = (0.01, 0.05, 0.10)
FAILURE_CEILING = 0.05
MIN_B = 99
BOUNDARY = "boundary"


class BootstrapError(RuntimeError):
    pass


def _splitmix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def derive_replicate_seed(master: int, replicate_index: int) -> int:
    """64-bit child seed for one replicate.

    ``master + (index + 1) * GOLDEN`` is injective in the index modulo 2**64
    (GOLDEN is odd) and the splitmix64 finaliser is a bijection, so distinct
    indices under one master never collide.
    """
    return _splitmix64((int(master) + (int(replicate_index) + 1) * GOLDEN) & MASK64)


def derive_seed(master: int, *path: int) -> int:
    """Apply :func:`derive_replicate_seed` along a path, e.g. (cell, dataset)."""
    seed = int(master) & MASK64
    for idx in path:
        seed = derive_replicate_seed(seed, idx)
    return seed


def bootstrap_p_value(v_obs: float, replicate_stats) -> float:
    stats = np.asarray(replicate_stats, dtype=float)
    return (1 + int(np.count_nonzero(stats >= v_obs))) / (stats.size + 1)


def critical_value(replicate_stats, alpha: float) -> float:
    """Order statistic c such that ``p_value <= alpha`` iff ``v_obs > c``.

    With B sorted replicates this is the ``(B - m)``-th smallest, m being the
    largest count with ``(1 + m) / (B + 1) <= alpha``; i.e. the
    ``ceil((1 - alpha)(B + 1))``-th order statistic up to float rounding.
    Returns +inf when no count qualifies.
    """
    stats = np.sort(np.asarray(replicate_stats, dtype=float))
    B = stats.size
    m = -1
    for c in range(B + 1):
        if (1 + c) / (B + 1) <= alpha:
            m = c
        else:
            break
    if m < 0:
        return math.inf
    k = B - m
    return -math.inf if k == 0 else float(stats[k - 1])


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    v_obs: float
    p_value: float
    theta_hat: BHParams
    B: int
    replicate_stats: np.ndarray
    critical_values: dict
    seed: int
    failures: int
    weight: WeightSpec
    fit: FitResult | None = None
    replicate_index: np.ndarray | None = None
    refit: bool = True
    metadata: dict = field(default_factory=dict)

    @property
    def B_effective(self) -> int:
        return int(self.replicate_stats.size)

    def reject(self, alpha: float) -> bool:
        return self.p_value <= alpha

    def as_dict(self) -> dict:
        return {
            "v_obs": self.v_obs,
            "p_value": self.p_value,
            "theta_hat": self.theta_hat.as_dict(),
            "weight": {"a1": self.weight.a1, "a2": self.weight.a2, "quad_order": self.weight.quad_order},
            "B": self.B,
            "B_effective": self.B_effective,
            "failures": self.failures,
            "seed": self.seed,
            "refit": self.refit,
            "critical_values": {f"{a:g}": v for a, v in self.critical_values.items()},
            "fit": self.fit.as_dict() if self.fit is not None else None,
            "replicate_stats": [float(v) for v in self.replicate_stats],
            "metadata": self.metadata,
        }


def _is_origin_sample(sample: BivariateSample) -> bool:
    return not sample.x.any() and not sample.y.any()


def _replicate(theta: BHParams, n: int, seed: int, weights, fit_opts: FitOptions, refit: bool, rtol):
    """Statistics for one replicate; ``None`` if the refit failed, ``BOUNDARY`` + zeros for an all-zero draw."""
    rng = np.random.default_rng(seed)
    try:
        boot = sample_bhd(theta, n, rng)
        if refit and _is_origin_sample(boot):
            # The likelihood supremum is the point mass at (0, 0) (all rates -> 0),
            # whose pgf is identically 1, equal to the epgf: the statistic is 0.
            return BOUNDARY, [0.0] * len(weights)
        theta_b = fit_mle(boot, fit_opts).theta_hat if refit else theta
        return None, [statistic_vnw(boot, theta_b, w, rtol=rtol) for w in weights]
    except (SampleError, FitError, QuadratureError, NotRepresentableError):
        return None


def _replicate_batch(args):
    theta, n, seeds, weights, fit_opts, refit, rtol = args
    return [_replicate(theta, n, s, weights, fit_opts, refit, rtol) for s in seeds]


def _run_replicates(theta, n, seed, B, weights, fit_opts, refit, rtol, workers):
    seeds = [derive_replicate_seed(seed, b) for b in range(B)]
    if workers <= 1:
        return _replicate_batch((theta, n, seeds, weights, fit_opts, refit, rtol))
    nchunks = min(B, 4 * workers)
    bounds = np.linspace(0, B, nchunks + 1).astype(int)
    jobs = [
        (theta, n, seeds[lo:hi], weights, fit_opts, refit, rtol)
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = []
        for chunk in pool.map(_replicate_batch, jobs):
            results.extend(chunk)
    return results


def run_bootstrap_multi(
    sample: BivariateSample,
    weights,
    B: int = 500,
    seed: int = 0,
    fit_opts: FitOptions | None = None,
    *,
    workers: int = 1,
    alphas=DEFAULT_ALPHAS,
    refit: bool = True,
    rtol: float | None = DEFAULT_RTOL,
) -> dict:
    """Bootstrap test for several weights at once, sharing samples and refits.

    For any single weight the result is identical to
    :func:`run_bootstrap_test` with the same arguments. Returns a dict keyed
    by the ``WeightSpec`` objects.
    """
    weights = list(weights)
    if B < MIN_B:
        raise ValueError(f"B must be at least {MIN_B}")
    fit_opts = fit_opts or FitOptions()
    try:
        fit = fit_mle(sample, fit_opts)
    except (SampleError, FitError) as exc:
        raise BootstrapError(f"fit on the observed data failed: {exc}") from exc
    theta = fit.theta_hat
    v_obs = [statistic_vnw(sample, theta, w, rtol=rtol) for w in weights]

    results = _run_replicates(theta, sample.n, seed, B, weights, fit_opts, refit, rtol, workers)
    ok = np.array([r is not None for r in results])
    failures = int(B - ok.sum())
    if failures > FAILURE_CEILING * B:
        raise BootstrapError(f"{failures} of {B} bootstrap refits failed")
    index = np.flatnonzero(ok)
    boundary = sum(1 for r in results if r is not None and r[0] == BOUNDARY)
    table = np.array([r[1] for r in results if r is not None], dtype=float).reshape(-1, len(weights))

    meta = {
        "p_value_rule": "add-one: (1 + #{V* >= V_obs}) / (B_eff + 1)",
        "critical_value_rule": "reject iff V_obs > critical value (equivalent to p <= alpha)",
        "quadrature": "tensor Gauss-Legendre, order and 2*order refinement",
        "quadrature_rtol": rtol,
        "fit_options": fit_opts.as_dict(),
        "gauge": "sigma2 = 1",
        "boundary_replicates": boundary,
        "boundary_rule": "all-zero bootstrap samples are fitted by the point mass at (0, 0): V* = 0",
    }
    out = {}
    for j, w in enumerate(weights):
        stats = table[:, j].copy()
        out[w] = TestReport(
            v_obs=float(v_obs[j]),
            p_value=bootstrap_p_value(v_obs[j], stats),
            theta_hat=theta,
            B=B,
            replicate_stats=stats,
            critical_values={a: critical_value(stats, a) for a in alphas},
            seed=int(seed),
            failures=failures,
            weight=w,
            fit=fit,
            replicate_index=index,
            refit=refit,
            metadata=dict(meta),
        )
    return out


def run_bootstrap_test(
    sample: BivariateSample,
    w: WeightSpec,
    B: int = 500,
    seed: int = 0,
    fit_opts: FitOptions | None = None,
    *,
    workers: int = 1,
    alphas=DEFAULT_ALPHAS,
    refit: bool = True,
    rtol: float | None = DEFAULT_RTOL,
) -> TestReport:
    """Parametric bootstrap test of H0: the data follow some BH(theta).

    ``refit=False`` skips the per-replicate refit and evaluates each bootstrap
    sample against theta_hat; it is cheaper but not the test defined above.
    Raises :class:`BootstrapError` if the original fit fails or more than 5%
    of the refits fail. A bootstrap sample consisting only of (0, 0) pairs is
    not a failure: its likelihood supremum is the point mass at the origin,
    whose pgf equals the epgf, so it contributes V* = 0 (counted in
    ``metadata["boundary_replicates"]``).
    """
    return run_bootstrap_multi(
        sample, [w], B, seed, fit_opts, workers=workers, alphas=alphas, refit=refit, rtol=rtol
    )[w]
