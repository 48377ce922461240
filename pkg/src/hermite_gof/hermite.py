"""The bivariate Hermite distribution.

The pgf is ``exp(mu*L(t) + sigma2*L(t)**2 / 2)`` with
``L(t) = l1*(t1-1) + l2*(t2-1) + l3*(t1*t2-1)``. Expanding the exponent in
the basis ``t1**j * t2**k - 1`` writes the distribution as a sum of
independent Poisson "packets", each event of packet (j, k) adding j to the
first coordinate and k to the second. That representation drives both the
pmf recurrence and the exact sampler.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, astuple

import numpy as np

from . import _kernels
from .samples import BivariateSample
from .series import series_exp

__all__ = [
    "BHParams",
    "ParameterError",
    "NotRepresentableError",
    "TruncationWarning",
    "PoissonDecomposition",
    "PmfTable",
    "validate_params",
    "gauge_normalize",
    "pgf_eval",
    "poisson_decomposition",
    "pmf_table",
    "pmf_table_auto",
    "sample_bhd",
    "moments",
]

PACKETS = _kernels.PACKETS
DEFAULT_TAIL_TOL = 1e-10
MAX_AXIS = 200


class ParameterError(ValueError):
    """Raised when a parameter vector is outside the parameter space."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid parameters: " + "; ".join(self.violations) + " fails")


class NotRepresentableError(ValueError):
    """The parameter point has a negative Poisson packet rate."""


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BHParams:
    """theta = (mu, sigma2, lambda1, lambda2, lambda3), validated on construction.

    Constraints: mu > sigma2*(lambda_i + lambda3) and lambda_i > lambda3 >= 0
    for i = 1, 2; sigma2 >= 0. ``sigma2 == 0`` is the bivariate Poisson
    boundary and is admitted.
    """

    mu: float
    sigma2: float
    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        vals = [float(v) for v in astuple(self)]
        for name, v in zip(("mu", "sigma2", "lambda1", "lambda2", "lambda3"), vals):
            object.__setattr__(self, name, v)
        mu, s2, l1, l2, l3 = vals
        bad = []
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError(["all parameters finite"])
        if not s2 >= 0:
            bad.append("sigma2 >= 0")
        if not mu > s2 * (l1 + l3):
            bad.append("mu > sigma2*(lambda1+lambda3)")
        if not mu > s2 * (l2 + l3):
            bad.append("mu > sigma2*(lambda2+lambda3)")
        if not l1 > l3:
            bad.append("lambda1 > lambda3")
        if not l2 > l3:
            bad.append("lambda2 > lambda3")
        if not l3 >= 0:
            bad.append("lambda3 >= 0")
        if bad:
            raise ParameterError(bad)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "sigma2": self.sigma2,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
        }

    def exponent(self, t1, t2):
        lam = (
            self.lambda1 * (np.asarray(t1) - 1)
            + self.lambda2 * (np.asarray(t2) - 1)
            + self.lambda3 * (np.asarray(t1) * np.asarray(t2) - 1)
        )
        return self.mu * lam + 0.5 * self.sigma2 * lam * lam


def validate_params(mu, sigma2, lambda1, lambda2, lambda3) -> BHParams:
    """Return ``BHParams`` or raise :class:`ParameterError` naming every violated constraint."""
    return BHParams(mu, sigma2, lambda1, lambda2, lambda3)


def gauge_normalize(p: BHParams) -> BHParams:
    """Rescale to the sigma2 = 1 representative.

    ``(mu, sigma2, lambda) -> (mu/c, sigma2/c**2, c*lambda)`` leaves the pgf
    unchanged for any c > 0; c = sqrt(sigma2) gives sigma2 = 1.
    """
    if p.sigma2 <= 0:
        raise ParameterError(["sigma2 > 0 (gauge unreachable at the Poisson boundary)"])
    if p.sigma2 == 1.0:
        return p
    c = math.sqrt(p.sigma2)
    return BHParams(p.mu / c, 1.0, p.lambda1 * c, p.lambda2 * c, p.lambda3 * c)


def pgf_eval(p: BHParams, t1, t2):
    """Probability generating function at ``(t1, t2)``; broadcasts over arrays."""
    return np.exp(p.exponent(t1, t2))


@dataclass(frozen=True)
class PoissonDecomposition:
    """Packet rates ``coeff[(j, k)]`` with exponent(t) = sum coeff_jk (t1^j t2^k - 1)."""

    coeff: dict

    @property
    def representable(self) -> bool:
        return all(v >= 0 for v in self.coeff.values())

    @property
    def total(self) -> float:
        return float(sum(self.coeff.values()))

    def rates(self) -> np.ndarray:
        return np.array([self.coeff[jk] for jk in PACKETS])

    def exponent_series(self) -> np.ndarray:
        """3x3 coefficient array of the exponent polynomial (constant term included)."""
        E = np.zeros((3, 3))
        for (j, k), c in self.coeff.items():
            E[j, k] += c
        E[0, 0] = -self.total
        return E


def poisson_decomposition(p: BHParams) -> PoissonDecomposition:
    rates = _kernels.packet_rates(p.mu, p.sigma2, p.lambda1, p.lambda2, p.lambda3)
    return PoissonDecomposition(dict(zip(PACKETS, (float(r) for r in rates))))


@dataclass(frozen=True)
class PmfTable:
    """``probs[r, s] = P(X1 = r, X2 = s)`` for r <= rmax, s <= smax."""

    probs: np.ndarray
    tail_mass: float

    @property
    def rmax(self) -> int:
        return self.probs.shape[0] - 1

    @property
    def smax(self) -> int:
        return self.probs.shape[1] - 1

    def __getitem__(self, idx):
        return self.probs[idx]


def pmf_table(p: BHParams, rmax: int, smax: int, tail_tol: float | None = None) -> PmfTable:
    """Exact pmf on ``{0..rmax} x {0..smax}`` from the Taylor coefficients of the pgf.

    Non-representable points (see :func:`poisson_decomposition`) are not
    distributions; their table has negative entries and is returned as is.
    A :class:`TruncationWarning` is issued when ``tail_tol`` is given and the
    omitted mass exceeds it.
    """
    if rmax < 0 or smax < 0:
        raise ValueError("rmax and smax must be >= 0")
    E = poisson_decomposition(p).exponent_series()
    probs = series_exp(E, rmax, smax)
    tail = 1.0 - probs.sum()
    if tail_tol is not None and tail > tail_tol:
        warnings.warn(
            f"pmf table {rmax}x{smax} leaves tail mass {tail:.3e} > {tail_tol:.1e}",
            TruncationWarning,
            stacklevel=2,
        )
    return PmfTable(probs, float(tail))


def pmf_table_auto(p: BHParams, tail_tol: float = DEFAULT_TAIL_TOL, start: int = 16) -> PmfTable:
    """Grow the table geometrically until the tail is below ``tail_tol`` (cap 200 per axis)."""
    size = start
    while True:
        tbl = pmf_table(p, size, size)
        if tbl.tail_mass <= tail_tol or size >= MAX_AXIS:
            break
        size = min(2 * size, MAX_AXIS)
    if tbl.tail_mass > tail_tol:
        warnings.warn(
            f"tail mass {tbl.tail_mass:.3e} still above {tail_tol:.1e} at the {MAX_AXIS} cap",
            TruncationWarning,
            stacklevel=2,
        )
    return tbl


def sample_bhd(p: BHParams, n: int, rng: np.random.Generator) -> BivariateSample:
    """Draw ``n`` iid pairs from BH(p) by summing independent Poisson packets.

    Stream consumption: for each packet in the fixed order (1,0), (0,1),
    (2,0), (0,2), (1,1), (2,1), (1,2), (2,2) one call
    ``rng.poisson(rate, n)`` is made, zero-rate packets included. numpy's
    Poisson generator uses inversion below rate 10 and transformed rejection
    above.
    """
    dec = poisson_decomposition(p)
    if not dec.representable:
        neg = {jk: c for jk, c in dec.coeff.items() if c < 0}
        raise NotRepresentableError(f"negative packet rates {neg}; BH(theta) has no sampler here")
    x = np.zeros(n, dtype=np.int64)
    y = np.zeros(n, dtype=np.int64)
    for (j, k), rate in zip(PACKETS, dec.rates()):
        draws = rng.poisson(rate, n)
        x += j * draws
        y += k * draws
    return BivariateSample(x, y)


def moments(p: BHParams) -> tuple[float, float, float, float, float]:
    """(mean1, mean2, var1, var2, cov)."""
    a1 = p.lambda1 + p.lambda3
    a2 = p.lambda2 + p.lambda3
    return (
        p.mu * a1,
        p.mu * a2,
        p.mu * a1 + p.sigma2 * a1 * a1,
        p.mu * a2 + p.sigma2 * a2 * a2,
        p.sigma2 * a1 * a2 + p.mu * p.lambda3,
    )
