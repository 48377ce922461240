"""Truncated bivariate power series: exp, log and real powers.

A series is a dense array ``F`` with ``F[r, s]`` the coefficient of
``t1**r * t2**s``. All three compositions use the derivative recurrence
obtained from the Euler operator ``D1 = t1 d/dt1``:

    exp:    D1 F = F * D1 E
    power:  H * D1 F = alpha * F * D1 H          (F = H**alpha)
    log:    H * D1 G = D1 H                      (G = log H)

Matching coefficients of ``t1**r t2**s`` expresses ``F[r, s]`` through
entries with smaller ``r`` (and, for power/log, smaller ``s`` in the same
row). Row ``r = 0`` has no ``t1`` content, so it is filled with the same
recurrences in ``t2`` instead.
"""

from __future__ import annotations

import numpy as np


def _pad(coeffs, rmax: int, smax: int) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 2:
        raise ValueError("series coefficients must be a 2-d array")
    out = np.zeros((rmax + 1, smax + 1))
    r = min(rmax + 1, coeffs.shape[0])
    s = min(smax + 1, coeffs.shape[1])
    out[:r, :s] = coeffs[:r, :s]
    return out


def _row0_exp(e0: np.ndarray, smax: int, f00: float) -> np.ndarray:
    f = np.zeros(smax + 1)
    f[0] = f00
    ke = np.arange(smax + 1) * e0
    for s in range(1, smax + 1):
        f[s] = np.dot(ke[1 : s + 1], f[s - 1 :: -1][:s]) / s
    return f


def series_exp(exponent, rmax: int, smax: int) -> np.ndarray:
    """Coefficients of ``exp(E(t1, t2))`` up to degree ``(rmax, smax)``."""
    E = _pad(exponent, rmax, smax)
    F = np.zeros_like(E)
    F[0] = _row0_exp(E[0], smax, np.exp(E[0, 0]))
    jE = np.arange(rmax + 1)[:, None] * E
    for r in range(1, rmax + 1):
        # F[r, s] = (1/r) sum_{j=1..r} sum_{k=0..s} j E[j,k] F[r-j, s-k]
        acc = np.zeros(smax + 1)
        for j in range(1, r + 1):
            if np.any(jE[j]):
                acc += np.convolve(jE[j], F[r - j])[: smax + 1]
        F[r] = acc / r
    return F


def series_power(base, alpha: float, rmax: int, smax: int) -> np.ndarray:
    """Coefficients of ``H(t1, t2) ** alpha``; requires ``H[0, 0] > 0``."""
    H = _pad(base, rmax, smax)
    h00 = H[0, 0]
    if not h00 > 0:
        raise ValueError("series_power needs a positive constant term")
    F = np.zeros_like(H)
    F[0, 0] = h00**alpha
    # row 0, recurrence in t2: h00 s F[0,s] = sum_{k>=1} ((alpha+1)k - s) H[0,k] F[0,s-k]
    for s in range(1, smax + 1):
        k = np.arange(1, s + 1)
        F[0, s] = np.dot(((alpha + 1) * k - s) * H[0, 1 : s + 1], F[0, s - 1 :: -1][:s]) / (h00 * s)
    for r in range(1, rmax + 1):
        j = np.arange(r + 1)
        for s in range(smax + 1):
            k = np.arange(s + 1)
            coef = ((alpha + 1) * j[:, None] - r) * H[: r + 1, : s + 1]
            coef[0, 0] = 0.0
            window = F[r::-1, s::-1][: r + 1, : s + 1]
            F[r, s] = np.sum(coef * window) / (h00 * r)
    return F


def series_log(base, rmax: int, smax: int) -> np.ndarray:
    """Coefficients of ``log H(t1, t2)``; requires ``H[0, 0] > 0``."""
    H = _pad(base, rmax, smax)
    h00 = H[0, 0]
    if not h00 > 0:
        raise ValueError("series_log needs a positive constant term")
    G = np.zeros_like(H)
    G[0, 0] = np.log(h00)
    for s in range(1, smax + 1):
        k = np.arange(1, s)
        # h00 s G[0,s] = s H[0,s] - sum_{k=1..s-1} H[0,k] (s-k) G[0,s-k]
        G[0, s] = (s * H[0, s] - np.dot(H[0, 1:s] * (s - k), G[0, s - 1 : 0 : -1])) / (h00 * s)
    for r in range(1, rmax + 1):
        j = np.arange(r + 1)
        for s in range(smax + 1):
            coef = H[: r + 1, : s + 1] * (r - j)[:, None]
            coef[0, 0] = 0.0
            window = G[r::-1, s::-1][: r + 1, : s + 1]
            G[r, s] = (r * H[r, s] - np.sum(coef * window)) / (h00 * r)
    return G


def series_multiply(a, b, rmax: int, smax: int) -> np.ndarray:
    """Truncated product of two bivariate series."""
    A = _pad(a, rmax, smax)
    B = _pad(b, rmax, smax)
    out = np.zeros_like(A)
    for r in range(rmax + 1):
        for j in range(r + 1):
            out[r] += np.convolve(A[j], B[r - j])[: smax + 1]
    return out


def series_eval(coeffs, t1, t2):
    """Evaluate a (truncated) series at points ``(t1, t2)``."""
    C = np.asarray(coeffs, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    p1 = t1[..., None] ** np.arange(C.shape[0])
    p2 = t2[..., None] ** np.arange(C.shape[1])
    return np.einsum("...r,rs,...s->...", p1, C, p2)
