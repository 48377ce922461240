"""Alternative bivariate count families for power studies.

Conventions (pgf in terms of u = t1 - 1, v = t2 - 1, w = t1*t2 - 1):

=====  ==================================  ==========================================
BB     (p00 + p10 t1 + p01 t2 + p11 t1 t2)^m   cells p11=p3, p10=p1-p3, p01=p2-p3
BP     exp(l1 u + l2 v + l3 w)                   (N1+N3, N2+N3), independent Poissons
BLS    log(1 - l1 t1 - l2 t2 - l3 t1 t2) / log(1 - l1 - l2 - l3)
BNB    (1 - g0 u - g1 v - g2 w)^(-nu)           Gamma(nu, 1)-mixed BP(d g0, d g1, d g2)
BNTA   exp(lam (g_BP(t) - 1))                    Poisson(lam) sum of iid BP pairs
BPP    p g_BP(theta) + (1 - p) g_BP(lambda)
BH     the Hermite null itself (for calibration checks)
=====  ==================================  ==========================================
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hermite import BHParams, PmfTable, pmf_table, pgf_eval, sample_bhd
from .samples import BivariateSample
from .series import series_exp, series_log, series_multiply, series_power

__all__ = [
    "FAMILIES",
    "AlternativeSpec",
    "AlternativeError",
    "PgfSeries",
    "validate_alternative",
    "parse_alternative",
    "pmf_from_pgf_series",
    "alternative_pmf",
    "alternative_pgf",
    "sample_alternative",
    "BLS_D",
    "POWER_ALTERNATIVES",
    "CONVENTIONS",
]

FAMILIES = ("BB", "BP", "BLS", "BNB", "BNTA", "BPP", "BH")
BLS_D = 1.0 - math.exp(-1.0)
BLS_TAIL_TOL = 1e-9
MAX_AXIS = 400

CONVENTIONS = {
    "BB": "(p00 + p10 t1 + p01 t2 + p11 t1 t2)^m with p11=p3, p10=p1-p3, p01=p2-p3",
    "BP": "exp(l1 (t1-1) + l2 (t2-1) + l3 (t1 t2-1))",
    "BLS": "log(1 - l1 t1 - l2 t2 - l3 t1 t2) / log(1 - l1 - l2 - l3); d = 1 - exp(-1)",
    "BNB": "(1 - g0 (t1-1) - g1 (t2-1) - g2 (t1 t2-1))^(-nu), gamma-mixed bivariate Poisson",
    "BNTA": "exp(lam (g_BP(t) - 1))",
    "BPP": "p g_BP(theta) + (1 - p) g_BP(lambda)",
}


class AlternativeError(ValueError):
    pass


@dataclass(frozen=True)
class AlternativeSpec:
    """A family name, an optional leading parameter and the rate/probability vector.

    ``lead`` is m (BB), nu (BNB), lambda (BNTA) or p (BPP); ``None`` otherwise.
    For BPP ``params`` holds the six rates theta + lambda; for BH the five
    Hermite parameters.
    """

    family: str
    params: tuple
    lead: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", self.family.upper())
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))

    @property
    def label(self) -> str:
        """Compact text form; ``parse_alternative(spec.label) == spec``."""
        body = ",".join(_fmt(v) for v in self.params)
        if self.family == "BPP":
            a, b = self.params[:3], self.params[3:]
            body = "(" + ",".join(_fmt(v) for v in a) + "),(" + ",".join(_fmt(v) for v in b) + ")"
        if self.lead is None:
            return f"{self.family}({body})"
        return f"{self.family}({_fmt(self.lead)};{body})"


def _fmt(v: float) -> str:
    short = f"{v:g}"
    return short if float(short) == v else repr(float(v))


def _check(ok: bool, what: str, spec: AlternativeSpec):
    if not ok:
        raise AlternativeError(f"{spec.label}: constraint {what} fails")


def validate_alternative(spec: AlternativeSpec) -> AlternativeSpec:
    fam, p, lead = spec.family, spec.params, spec.lead
    if fam not in FAMILIES:
        raise AlternativeError(f"unknown family {fam!r}")
    nparams = {"BPP": 6, "BH": 5}.get(fam, 3)
    if len(p) != nparams:
        raise AlternativeError(f"{fam} takes {nparams} parameters, got {len(p)}")
    if not all(math.isfinite(v) for v in p):
        raise AlternativeError(f"{spec.label}: parameters must be finite")
    if fam == "BB":
        p1, p2, p3 = p
        _check(lead is not None and float(lead).is_integer() and lead >= 1, "m a positive integer", spec)
        _check(p1 + p2 - p3 <= 1, "p1+p2-p3 <= 1", spec)
        _check(p1 >= p3, "p1 >= p3", spec)
        _check(p2 >= p3, "p2 >= p3", spec)
        _check(p3 > 0, "p3 > 0", spec)
    elif fam == "BP":
        l1, l2, l3 = p
        _check(l1 > l3, "lambda1 > lambda3", spec)
        _check(l2 > l3, "lambda2 > lambda3", spec)
        _check(l3 > 0, "lambda3 > 0", spec)
    elif fam == "BLS":
        _check(all(v >= 0 for v in p), "lambda_i >= 0", spec)
        _check(0 < sum(p) < 1, "0 < lambda1+lambda2+lambda3 < 1", spec)
    elif fam == "BNB":
        g0, g1, g2 = p
        _check(lead is not None and float(lead).is_integer() and lead >= 1, "nu a positive integer", spec)
        _check(g0 > g2, "gamma0 > gamma2", spec)
        _check(g1 > g2, "gamma1 > gamma2", spec)
        _check(g2 > 0, "gamma2 > 0", spec)
    elif fam == "BNTA":
        _check(lead is not None and lead > 0, "lambda > 0", spec)
        _check(all(v >= 0 for v in p), "lambda_i >= 0", spec)
        _check(0 < sum(p) <= 1, "0 < lambda1+lambda2+lambda3 <= 1", spec)
    elif fam == "BPP":
        _check(lead is not None and 0 < lead < 1, "0 < p < 1", spec)
        _check(all(v >= 0 for v in p), "component rates >= 0", spec)
    elif fam == "BH":
        BHParams(*p)
    return spec


# --- parsing "BB(1;0.41,0.02,0.01)", "BLS(5d/7,d/7,d/7)", "BPP(0.31;(0.2,0.2,0.1),(1,1,0.9))"

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_number(text: str) -> float:
    text = re.sub(r"(\d)\s*d\b", r"\1*d", text.strip())

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "d":
            return BLS_D
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        raise AlternativeError(f"cannot parse number {text!r}")

    try:
        return ev(ast.parse(text, mode="eval"))
    except SyntaxError as exc:
        raise AlternativeError(f"cannot parse number {text!r}") from exc


def parse_alternative(text: str) -> AlternativeSpec:
    """Parse the notation used in power tables, e.g. ``BNB(1;0.92,0.97,0.01)``."""
    m = re.fullmatch(r"\s*([A-Za-z]+)\s*\((.*)\)\s*", text)
    if not m:
        raise AlternativeError(f"cannot parse alternative {text!r}")
    fam, body = m.group(1).upper(), m.group(2)
    lead = None
    if ";" in body:
        head, body = body.split(";", 1)
        lead = _eval_number(head)
    body = body.replace("(", "").replace(")", "")
    params = tuple(_eval_number(tok) for tok in body.split(",") if tok.strip())
    return validate_alternative(AlternativeSpec(fam, params, lead))


# --- pmf tables


@dataclass(frozen=True)
class PgfSeries:
    """pgf = scale * F(poly), F one of exp / log / power(alpha), poly a small 2-d array."""

    kind: str
    poly: np.ndarray
    alpha: float = 1.0
    scale: float = 1.0


def _bp_exponent(l1, l2, l3) -> np.ndarray:
    E = np.zeros((2, 2))
    E[1, 0], E[0, 1], E[1, 1] = l1, l2, l3
    E[0, 0] = -(l1 + l2 + l3)
    return E


def pgf_series(spec: AlternativeSpec) -> PgfSeries:
    fam, p = spec.family, spec.params
    if fam == "BP":
        return PgfSeries("exp", _bp_exponent(*p))
    if fam == "BLS":
        l1, l2, l3 = p
        H = np.array([[1.0, -l2], [-l1, -l3]])
        return PgfSeries("log", H, scale=1.0 / math.log(1.0 - sum(p)))
    if fam == "BNB":
        g0, g1, g2 = p
        H = np.array([[1.0 + g0 + g1 + g2, -g1], [-g0, -g2]])
        return PgfSeries("power", H, alpha=-float(spec.lead))
    raise AlternativeError(f"{fam} has no single-composition pgf series")


def pmf_from_pgf_series(desc: PgfSeries, rmax: int, smax: int) -> PmfTable:
    """Taylor coefficients of an exp / log / power composite of a bivariate polynomial."""
    if desc.kind == "exp":
        F = series_exp(desc.poly, rmax, smax)
    elif desc.kind == "log":
        F = series_log(desc.poly, rmax, smax)
    elif desc.kind == "power":
        F = series_power(desc.poly, desc.alpha, rmax, smax)
    else:
        raise ValueError(f"unknown series kind {desc.kind!r}")
    F = desc.scale * F
    return PmfTable(F, float(1.0 - F.sum()))


def _bb_cells(spec):
    p1, p2, p3 = spec.params
    return np.array([[1.0 - p1 - p2 + p3, p2 - p3], [p1 - p3, p3]])


def alternative_pmf(spec: AlternativeSpec, rmax: int, smax: int) -> PmfTable:
    fam, p = spec.family, spec.params
    if fam in ("BP", "BLS", "BNB"):
        return pmf_from_pgf_series(pgf_series(spec), rmax, smax)
    if fam == "BB":
        cells = _bb_cells(spec)
        F = np.zeros((rmax + 1, smax + 1))
        F[0, 0] = 1.0
        for _ in range(int(spec.lead)):
            F = series_multiply(F, cells, rmax, smax)
    elif fam == "BNTA":
        g = series_exp(_bp_exponent(*p), rmax, smax)
        g[0, 0] -= 1.0
        F = series_exp(spec.lead * g, rmax, smax)
    elif fam == "BPP":
        w = spec.lead
        F = w * series_exp(_bp_exponent(*p[:3]), rmax, smax) + (1 - w) * series_exp(
            _bp_exponent(*p[3:]), rmax, smax
        )
    elif fam == "BH":
        return pmf_table(BHParams(*p), rmax, smax)
    else:
        raise AlternativeError(f"unknown family {fam!r}")
    return PmfTable(F, float(1.0 - F.sum()))


@lru_cache(maxsize=64)
def alternative_pmf_auto(spec: AlternativeSpec, tail_tol: float = BLS_TAIL_TOL, start: int = 16) -> PmfTable:
    size = start
    while True:
        tbl = alternative_pmf(spec, size, size)
        if tbl.tail_mass <= tail_tol or size >= MAX_AXIS:
            break
        size = min(2 * size, MAX_AXIS)
    if tbl.tail_mass > tail_tol:
        raise AlternativeError(f"{spec.label}: tail {tbl.tail_mass:.2e} above {tail_tol:g} at {MAX_AXIS} cap")
    return tbl


def alternative_pgf(spec: AlternativeSpec, t1, t2):
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    fam, p = spec.family, spec.params

    def bp(l1, l2, l3):
        return np.exp(l1 * (t1 - 1) + l2 * (t2 - 1) + l3 * (t1 * t2 - 1))

    if fam == "BB":
        c = _bb_cells(spec)
        return (c[0, 0] + c[1, 0] * t1 + c[0, 1] * t2 + c[1, 1] * t1 * t2) ** spec.lead
    if fam == "BP":
        return bp(*p)
    if fam == "BLS":
        l1, l2, l3 = p
        return np.log1p(-(l1 * t1 + l2 * t2 + l3 * t1 * t2)) / math.log(1.0 - sum(p))
    if fam == "BNB":
        g0, g1, g2 = p
        return (1 - g0 * (t1 - 1) - g1 * (t2 - 1) - g2 * (t1 * t2 - 1)) ** (-spec.lead)
    if fam == "BNTA":
        return np.exp(spec.lead * (bp(*p) - 1))
    if fam == "BPP":
        return spec.lead * bp(*p[:3]) + (1 - spec.lead) * bp(*p[3:])
    if fam == "BH":
        return pgf_eval(BHParams(*p), t1, t2)
    raise AlternativeError(f"unknown family {fam!r}")


# --- samplers


def _bp_draw(rng, l1, l2, l3, n):
    n1 = rng.poisson(l1, n)
    n2 = rng.poisson(l2, n)
    n3 = rng.poisson(l3, n)
    return n1 + n3, n2 + n3


def sample_alternative(spec: AlternativeSpec, n: int, rng: np.random.Generator) -> BivariateSample:
    """n iid pairs from the family's constructive representation (see module table)."""
    fam, p = spec.family, spec.params
    if fam == "BB":
        c = _bb_cells(spec)
        draws = rng.multinomial(int(spec.lead), [c[1, 1], c[1, 0], c[0, 1], max(c[0, 0], 0.0)], size=n)
        x = draws[:, 0] + draws[:, 1]
        y = draws[:, 0] + draws[:, 2]
    elif fam == "BP":
        x, y = _bp_draw(rng, *p, n)
    elif fam == "BNTA":
        k = rng.poisson(spec.lead, n)
        x, y = _bp_draw(rng, k * p[0], k * p[1], k * p[2], n)
    elif fam == "BNB":
        d = rng.gamma(float(spec.lead), 1.0, n)
        x, y = _bp_draw(rng, d * p[0], d * p[1], d * p[2], n)
    elif fam == "BPP":
        pick = rng.random(n) < spec.lead
        xa, ya = _bp_draw(rng, *p[:3], n)
        xb, yb = _bp_draw(rng, *p[3:], n)
        x = np.where(pick, xa, xb)
        y = np.where(pick, ya, yb)
    elif fam == "BLS":
        tbl = alternative_pmf_auto(spec)
        probs = np.clip(tbl.probs, 0.0, None).ravel()
        cdf = np.cumsum(probs)
        idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
        idx = np.minimum(idx, probs.size - 1)
        x, y = np.divmod(idx, tbl.probs.shape[1])
    elif fam == "BH":
        return sample_bhd(BHParams(*p), n, rng)
    else:
        raise AlternativeError(f"unknown family {fam!r}")
    return BivariateSample(np.asarray(x), np.asarray(y))


POWER_ALTERNATIVES = (
    "BB(1;0.41,0.02,0.01)",
    "BB(1;0.41,0.03,0.02)",
    "BB(2;0.61,0.01,0.01)",
    "BB(1;0.61,0.03,0.02)",
    "BB(2;0.71,0.01,0.01)",
    "BP(1.00,1.00,0.25)",
    "BP(1.00,1.00,0.50)",
    "BP(1.00,1.00,0.75)",
    "BP(1.50,1.00,0.31)",
    "BP(1.50,1.00,0.92)",
    "BLS(0.25,0.15,0.10)",
    "BLS(5d/7,d/7,d/7)",
    "BLS(3d/4,d/8,d/8)",
    "BLS(7d/9,d/9,d/9)",
    "BLS(0.51,0.01,0.02)",
    "BNB(1;0.92,0.97,0.01)",
    "BNB(1;0.97,0.97,0.01)",
    "BNB(1;0.97,0.97,0.02)",
    "BNB(1;0.98,0.98,0.01)",
    "BNB(1;0.99,0.99,0.01)",
    "BNTA(0.21;0.01,0.01,0.98)",
    "BNTA(0.24;0.01,0.01,0.98)",
    "BNTA(0.26;0.01,0.01,0.97)",
    "BNTA(0.26;0.01,0.01,0.98)",
    "BNTA(0.28;0.01,0.01,0.97)",
    "BPP(0.31;(0.2,0.2,0.1),(1.0,1.0,0.9))",
    "BPP(0.31;(0.2,0.2,0.1),(1.0,1.2,0.9))",
    "BPP(0.32;(0.2,0.2,0.1),(1.0,1.0,0.9))",
    "BPP(0.33;(0.2,0.2,0.1),(1.0,1.0,0.9))",
    "BPP(0.33;(0.2,0.2,0.1),(1.0,1.1,0.9))",
)
