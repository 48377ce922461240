import math

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import chi_square_pvalue
from hermite_gof import alternative_pgf, alternative_pmf, parse_alternative, sample_alternative
from hermite_gof.alternatives import (
    BLS_D,
    POWER_ALTERNATIVES,
    AlternativeError,
    AlternativeSpec,
    alternative_pmf_auto,
    validate_alternative,
)

N = 100_000


def bp_pmf(l1, l2, l3, R, S):
    """Bivariate Poisson pmf by summing over the common component."""
    f = np.zeros((R + 1, S + 1))
    for r in range(R + 1):
        for s in range(S + 1):
            k = np.arange(min(r, s) + 1)
            f[r, s] = np.sum(stats.poisson.pmf(r - k, l1) * stats.poisson.pmf(s - k, l2) * stats.poisson.pmf(k, l3))
    return f


def bb_pmf(m, p1, p2, p3, R, S):
    cells = {(1, 1): p3, (1, 0): p1 - p3, (0, 1): p2 - p3, (0, 0): 1 - p1 - p2 + p3}
    f = np.zeros((R + 1, S + 1))
    # enumerate multinomial counts (a, b, c, d) of cells 11, 10, 01, 00
    for a in range(m + 1):
        for b in range(m + 1 - a):
            for c in range(m + 1 - a - b):
                d = m - a - b - c
                coef = math.factorial(m) / (math.factorial(a) * math.factorial(b) * math.factorial(c) * math.factorial(d))
                pr = coef * cells[(1, 1)] ** a * cells[(1, 0)] ** b * cells[(0, 1)] ** c * cells[(0, 0)] ** d
                if a + b <= R and a + c <= S:
                    f[a + b, a + c] += pr
    return f


def bls_pmf(l1, l2, l3, R, S):
    """-log(1 - z)/-log(1 - L) with z = l1 t1 + l2 t2 + l3 t1 t2, expanded term by term."""
    f = np.zeros((R + 1, S + 1))
    norm = -math.log(1 - l1 - l2 - l3)
    for k in range(1, R + S + 1):
        for c in range(k + 1):  # c copies of t1 t2
            for a in range(k - c + 1):  # a copies of t1
                b = k - c - a
                r, s = a + c, b + c
                if r <= R and s <= S:
                    coef = math.factorial(k) / (math.factorial(a) * math.factorial(b) * math.factorial(c))
                    f[r, s] += coef * l1**a * l2**b * l3**c / k / norm
    return f


def bnb_pmf(nu, g0, g1, g2, R, S):
    """Gamma(nu, 1) mixture of BP(d g0, d g1, d g2), integrated numerically."""
    val, _ = integrate.quad_vec(
        lambda d: bp_pmf(d * g0, d * g1, d * g2, R, S) * stats.gamma.pdf(d, nu), 0, np.inf, epsabs=1e-13
    )
    return val


def bnta_pmf(lam, l1, l2, l3, R, S, kmax=40):
    f = np.zeros((R + 1, S + 1))
    f[0, 0] = math.exp(-lam)
    for k in range(1, kmax):
        f += stats.poisson.pmf(k, lam) * bp_pmf(k * l1, k * l2, k * l3, R, S)
    return f


ORACLES = {
    "BB(2;0.61,0.01,0.01)": lambda R, S: bb_pmf(2, 0.61, 0.01, 0.01, R, S),
    "BP(1.50,1.00,0.31)": lambda R, S: bp_pmf(1.5, 1.0, 0.31, R, S),
    "BLS(0.25,0.15,0.10)": lambda R, S: bls_pmf(0.25, 0.15, 0.10, R, S),
    "BLS(3d/4,d/8,d/8)": lambda R, S: bls_pmf(0.75 * BLS_D, BLS_D / 8, BLS_D / 8, R, S),
    "BNB(1;0.92,0.97,0.01)": lambda R, S: bnb_pmf(1, 0.92, 0.97, 0.01, R, S),
    "BNTA(0.26;0.01,0.01,0.97)": lambda R, S: bnta_pmf(0.26, 0.01, 0.01, 0.97, R, S),
    "BPP(0.31;(0.2,0.2,0.1),(1.0,1.2,0.9))": lambda R, S: 0.31 * bp_pmf(0.2, 0.2, 0.1, R, S)
    + 0.69 * bp_pmf(1.0, 1.2, 0.9, R, S),
}


class TestValidation:
    def test_bb_valid(self):
        spec = parse_alternative("BB(1; 0.41, 0.02, 0.01)")
        assert spec == AlternativeSpec("BB", (0.41, 0.02, 0.01), 1)

    def test_bb_rejected(self):
        with pytest.raises(AlternativeError, match="p1\\+p2-p3"):
            validate_alternative(AlternativeSpec("BB", (0.9, 0.9, 0.1), 1))

    def test_bls_boundary_rejected(self):
        with pytest.raises(AlternativeError):
            validate_alternative(AlternativeSpec("BLS", (0.5, 0.3, 0.2)))

    @pytest.mark.parametrize("text", ["BX(1,2,3)", "BP(1,1)", "BP(1,1,1)", "BNB(1.5;0.9,0.9,0.01)", "BPP(1.2;(1,1,0.5),(1,1,0.5))"])
    def test_other_rejections(self, text):
        with pytest.raises((AlternativeError, ValueError)):
            parse_alternative(text)

    @pytest.mark.parametrize("text", POWER_ALTERNATIVES)
    def test_table_rows_parse_and_roundtrip(self, text):
        spec = parse_alternative(text)
        assert parse_alternative(spec.label) == spec

    def test_d_expressions(self):
        spec = parse_alternative("BLS(5d/7,d/7,d/7)")
        np.testing.assert_allclose(spec.params, np.array([5, 1, 1]) * (1 - math.exp(-1)) / 7, rtol=1e-15)
        assert BLS_D == pytest.approx(0.63212, abs=1e-5)

    def test_bh_family(self):
        spec = parse_alternative("BH(1.0,0.8,0.5,0.5,0.0)")
        np.testing.assert_allclose(alternative_pmf(spec, 4, 4).probs[0, 0], math.exp(-0.6))


class TestPmf:
    def test_bls_reference(self):
        tbl = alternative_pmf(parse_alternative("BLS(0.25,0.15,0.10)"), 4, 4)
        assert tbl[0, 0] == 0
        assert tbl[1, 0] == pytest.approx(0.25 / -math.log(0.5), abs=1e-12)
        assert tbl[1, 0] == pytest.approx(0.360674, abs=1e-6)

    def test_bnb_reference(self):
        tbl = alternative_pmf(parse_alternative("BNB(1;0.92,0.97,0.01)"), 4, 4)
        assert tbl[0, 0] == pytest.approx(1 / 2.9, abs=1e-12)
        assert tbl[0, 0] == pytest.approx(0.344828, abs=1e-6)

    @pytest.mark.parametrize("text", list(ORACLES))
    def test_against_direct_construction(self, text):
        tbl = alternative_pmf(parse_alternative(text), 6, 6)
        np.testing.assert_allclose(tbl.probs, ORACLES[text](6, 6), atol=1e-9)

    @pytest.mark.parametrize("text", POWER_ALTERNATIVES)
    def test_normalization(self, text):
        tbl = alternative_pmf_auto(parse_alternative(text))
        assert np.all(tbl.probs >= -1e-15)
        assert abs(tbl.probs.sum() + tbl.tail_mass - 1) < 1e-8
        assert tbl.tail_mass < 1e-8

    @pytest.mark.parametrize("text", POWER_ALTERNATIVES)
    def test_generating_function_identity(self, text):
        spec = parse_alternative(text)
        tbl = alternative_pmf_auto(spec)
        r = 0.5 ** np.arange(tbl.rmax + 1)
        s = 0.7 ** np.arange(tbl.smax + 1)
        assert abs(r @ tbl.probs @ s - alternative_pgf(spec, 0.5, 0.7)) < 1e-8


class TestSamplers:
    def test_bb_cells(self):
        s = sample_alternative(parse_alternative("BB(1;0.41,0.02,0.01)"), N, np.random.default_rng(1))
        for (x, y), p in {(1, 1): 0.01, (1, 0): 0.40, (0, 1): 0.01, (0, 0): 0.58}.items():
            freq = np.mean((s.x == x) & (s.y == y))
            assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / N)

    def test_bp_covariance(self):
        s = sample_alternative(parse_alternative("BP(1.00,1.00,0.25)"), N, np.random.default_rng(2))
        # var of the product of centred margins: 1.25^2 + 0.25^2 for this BP
        se = math.sqrt((1.25 * 1.25 + 0.25**2) / N)
        assert abs(np.cov(s.x, s.y)[0, 1] - 0.25) < 3 * se

    def test_bpp_mean(self):
        s = sample_alternative(parse_alternative("BPP(0.31;(0.2,0.2,0.1),(1.0,1.0,0.9))"), N, np.random.default_rng(3))
        assert 0.31 * 0.3 + 0.69 * 1.9 == pytest.approx(1.404)
        assert abs(s.x.mean() - 1.404) < 3 * s.x.std() / math.sqrt(N)

    def test_bnta_pgf_identity(self):
        spec = parse_alternative("BNTA(0.26;0.01,0.01,0.97)")
        s = sample_alternative(spec, N, np.random.default_rng(4))
        vals = 0.5 ** (s.x + s.y).astype(float)
        g_bp = math.exp(0.01 * -0.5 + 0.01 * -0.5 + 0.97 * -0.75)
        assert abs(vals.mean() - math.exp(0.26 * (g_bp - 1))) < 3 * vals.std() / math.sqrt(N)

    @pytest.mark.parametrize(
        "text",
        [
            "BB(2;0.71,0.01,0.01)",
            "BP(1.50,1.00,0.92)",
            "BLS(0.25,0.15,0.10)",
            "BLS(7d/9,d/9,d/9)",
            "BNB(1;0.92,0.97,0.01)",
            "BNTA(0.21;0.01,0.01,0.98)",
            "BPP(0.33;(0.2,0.2,0.1),(1.0,1.1,0.9))",
            "BH(1.5,1.0,0.75,0.25,0.0)",
        ],
    )
    def test_chi_square(self, text):
        spec = parse_alternative(text)
        s = sample_alternative(spec, N, np.random.default_rng(2025))
        assert chi_square_pvalue(s.x, s.y, alternative_pmf_auto(spec).probs) > 0.001

    @pytest.mark.parametrize("text", POWER_ALTERNATIVES[::5])
    def test_deterministic(self, text):
        spec = parse_alternative(text)
        a = sample_alternative(spec, 300, np.random.default_rng(8))
        b = sample_alternative(spec, 300, np.random.default_rng(8))
        assert a == b
