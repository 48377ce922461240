"""Shared oracles and fixtures.

The oracles here deliberately avoid the package's own series and kernel code:
packet coefficients come from a symbolic expansion (sympy), pmfs from direct
convolution of Poisson packet laws (scipy.stats), and moments from central
finite differences of the pgf in extended precision.
"""

from __future__ import annotations

import functools

import numpy as np
import pytest
import sympy
from scipy import stats

from hermite_gof import BHParams

# The eleven null points of the type-I error grid.
NULL_GRID = [
    (1.0, 0.8, 0.10, 0.20, 0.0),
    (1.0, 0.8, 0.25, 0.25, 0.0),
    (1.0, 0.8, 0.50, 0.20, 0.0),
    (1.0, 0.8, 0.50, 0.50, 0.0),
    (1.5, 1.0, 0.50, 0.50, 0.0),
    (1.5, 1.0, 0.50, 0.75, 0.0),
    (1.5, 1.0, 0.75, 0.25, 0.0),
    (1.5, 1.0, 1.00, 0.25, 0.0),
    (2.0, 1.0, 0.25, 0.75, 0.0),
    (2.0, 1.0, 0.50, 0.25, 0.0),
    (2.0, 1.0, 0.75, 0.25, 0.0),
]

# Extra points with lambda3 > 0 and sigma2 != 1.
EXTRA_POINTS = [
    (2.0, 0.5, 0.4, 0.4, 0.1),
    (3.0, 1.3, 0.6, 0.7, 0.3),
    (1.2, 0.0, 0.5, 0.3, 0.2),
]

_t1, _t2 = sympy.symbols("t1 t2")


@functools.lru_cache(maxsize=None)
def symbolic_coefficients(theta: tuple) -> dict:
    """Coefficients c_jk of sum c_jk (t1^j t2^k - 1) from expanding mu*lam + s2*lam^2/2."""
    mu, s2, l1, l2, l3 = (sympy.Rational(str(v)) for v in theta)
    lam = l1 * (_t1 - 1) + l2 * (_t2 - 1) + l3 * (_t1 * _t2 - 1)
    poly = sympy.Poly(sympy.expand(mu * lam + s2 * lam**2 / 2), _t1, _t2)
    return {jk: float(c) for jk, c in zip(poly.monoms(), poly.coeffs()) if jk != (0, 0)}


def brute_force_pmf(theta: tuple, R: int, S: int) -> np.ndarray:
    """pmf on {0..R} x {0..S} by convolving the laws of the independent packets (j N, k N)."""
    f = np.zeros((R + 1, S + 1))
    f[0, 0] = 1.0
    for (j, k), c in symbolic_coefficients(tuple(theta)).items():
        if c == 0:
            continue
        assert c > 0, "brute force needs a representable point"
        mmax = max(R // j if j else 0, S // k if k else 0)
        w = stats.poisson.pmf(np.arange(mmax + 1), c)
        g = np.zeros_like(f)
        for m in range(mmax + 1):
            dr, ds = j * m, k * m
            if dr > R or ds > S:
                break
            g[dr:, ds:] += w[m] * f[: R + 1 - dr, : S + 1 - ds]
        f = g
    return f


def fd_moments(pgf, h: float = 1e-5):
    """(mean1, mean2, var1, var2, cov) from central differences of pgf at (1, 1).

    Evaluated in numpy's extended precision so that the 1/h**2 amplification
    of rounding stays far below the 1e-6 comparison tolerance.
    """
    one = np.longdouble(1)
    h = np.longdouble(h)

    def G(a, b):
        return pgf(one + a * h, one + b * h)

    g1 = (G(1, 0) - G(-1, 0)) / (2 * h)
    g2 = (G(0, 1) - G(0, -1)) / (2 * h)
    g11 = (G(1, 0) - 2 * G(0, 0) + G(-1, 0)) / h**2
    g22 = (G(0, 1) - 2 * G(0, 0) + G(0, -1)) / h**2
    g12 = (G(1, 1) - G(1, -1) - G(-1, 1) + G(-1, -1)) / (4 * h * h)
    return tuple(
        float(v) for v in (g1, g2, g11 + g1 - g1 * g1, g22 + g2 - g2 * g2, g12 - g1 * g2)
    )


def chi_square_pvalue(x, y, probs) -> float:
    """Chi-square p-value of sample (x, y) against a pmf table.

    Cells with expected count >= 5 are kept; everything else (including
    mass outside the table) is pooled, and the pool is merged into the
    smallest kept cell when its own expectation is below 5.
    """
    n = len(x)
    R, S = probs.shape
    obs = np.zeros_like(probs)
    inside = (x < R) & (y < S)
    np.add.at(obs, (x[inside], y[inside]), 1)
    exp = n * probs
    keep = exp >= 5
    o, e = list(obs[keep]), list(exp[keep])
    rest_o, rest_e = n - sum(o), n - sum(e)
    if rest_e >= 5:
        o.append(rest_o)
        e.append(rest_e)
    else:
        i = int(np.argmin(e))
        o[i] += rest_o
        e[i] += rest_e
    return float(stats.chisquare(o, e).pvalue)


@pytest.fixture
def theta_ref() -> BHParams:
    return BHParams(1.0, 0.8, 0.5, 0.5, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


# --- acceptance report collection

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
