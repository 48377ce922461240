"""Compiled inner loops for the likelihood fit.

The bootstrap refits the model thousands of times, so the pmf recurrence,
the cell log-likelihood and the simplex iteration all live here under numba.
Everything works in the sigma^2 = 1 gauge.

Packet order for the 8 Poisson rates is fixed throughout the package:
(1,0), (0,1), (2,0), (0,2), (1,1), (2,1), (1,2), (2,2).
"""

import numpy as np
from numba import njit

PACKETS = ((1, 0), (0, 1), (2, 0), (0, 2), (1, 1), (2, 1), (1, 2), (2, 2))
LOG_FLOOR = 1e-300
MU_CAP = 50.0
RATE_FLOOR = 1e-10


@njit(cache=True)
def packet_rates(mu, sigma2, l1, l2, l3):
    L = l1 + l2 + l3
    d = mu - sigma2 * L
    out = np.empty(8)
    out[0] = l1 * d
    out[1] = l2 * d
    out[2] = 0.5 * sigma2 * l1 * l1
    out[3] = 0.5 * sigma2 * l2 * l2
    out[4] = l3 * d + sigma2 * l1 * l2
    out[5] = sigma2 * l1 * l3
    out[6] = sigma2 * l2 * l3
    out[7] = 0.5 * sigma2 * l3 * l3
    return out


@njit(cache=True)
def bhd_pmf(rates, rmax, smax):
    """pmf table of the packet representation, via r f[r,s] = sum j c_jk f[r-j,s-k]."""
    c10, c01, c20, c02, c11, c21, c12, c22 = rates
    f = np.zeros((rmax + 1, smax + 1))
    f[0, 0] = np.exp(-np.sum(rates))
    for s in range(1, smax + 1):
        acc = c01 * f[0, s - 1]
        if s >= 2:
            acc += 2.0 * c02 * f[0, s - 2]
        f[0, s] = acc / s
    for r in range(1, rmax + 1):
        for s in range(smax + 1):
            acc = c10 * f[r - 1, s]
            if s >= 1:
                acc += c11 * f[r - 1, s - 1]
            if s >= 2:
                acc += c12 * f[r - 1, s - 2]
            if r >= 2:
                acc += 2.0 * c20 * f[r - 2, s]
                if s >= 1:
                    acc += 2.0 * c21 * f[r - 2, s - 1]
                if s >= 2:
                    acc += 2.0 * c22 * f[r - 2, s - 2]
            f[r, s] = acc / r
    return f


@njit(cache=True)
def cell_loglik(rates, xs, ys, counts, rmax, smax):
    f = bhd_pmf(rates, rmax, smax)
    total = 0.0
    for i in range(xs.shape[0]):
        p = f[xs[i], ys[i]]
        if not p >= LOG_FLOOR:
            return -np.inf
        total += counts[i] * np.log(p)
    return total


@njit(cache=True)
def softplus(u):
    # floored so that l_i > l3 holds strictly after rounding
    if u > 0:
        return u + np.log1p(np.exp(-u))
    return max(np.log1p(np.exp(u)), RATE_FLOOR)


@njit(cache=True)
def from_free(u, fix3):
    """Map unconstrained coordinates to (mu, l1, l2, l3) with sigma^2 = 1.

    fix3: u = (u1, u2, u_mu) and l3 = 0; otherwise u = (u3, u1, u2, u_mu).
    mu = min(L + softplus(u_mu), max(MU_CAP, L)) keeps the packet rates >= 0.
    """
    if fix3:
        l3 = 0.0
        l1 = softplus(u[0])
        l2 = softplus(u[1])
        um = u[2]
    else:
        l3 = softplus(u[0])
        l1 = l3 + softplus(u[1])
        l2 = l3 + softplus(u[2])
        um = u[3]
    L = l1 + l2 + l3
    mu = L + softplus(um)
    cap = max(MU_CAP, L)
    if mu > cap:
        mu = cap
    return mu, l1, l2, l3


@njit(cache=True)
def negloglik_free(u, fix3, xs, ys, counts, rmax, smax):
    mu, l1, l2, l3 = from_free(u, fix3)
    ll = cell_loglik(packet_rates(mu, 1.0, l1, l2, l3), xs, ys, counts, rmax, smax)
    return -ll


@njit(cache=True)
def _sort_simplex(sim, fsim):
    order = np.argsort(fsim)
    return sim[order].copy(), fsim[order].copy()


@njit(cache=True)
def nelder_mead(u0, step, fix3, xs, ys, counts, rmax, smax, xatol, maxfev):
    """Standard Nelder-Mead (rho=1, chi=2, psi=0.5, sigma=0.5).

    Stops when every vertex is within ``xatol`` (sup norm) of the best one, or
    after ``maxfev`` evaluations. Returns (u_best, f_best, nfev, converged).
    """
    n = u0.shape[0]
    sim = np.empty((n + 1, n))
    fsim = np.empty(n + 1)
    sim[0] = u0
    for k in range(n):
        sim[k + 1] = u0
        sim[k + 1, k] += step
    for k in range(n + 1):
        fsim[k] = negloglik_free(sim[k], fix3, xs, ys, counts, rmax, smax)
    nfev = n + 1
    sim, fsim = _sort_simplex(sim, fsim)
    converged = False
    while nfev < maxfev:
        diam = 0.0
        for k in range(1, n + 1):
            for d in range(n):
                diam = max(diam, abs(sim[k, d] - sim[0, d]))
        if diam <= xatol:
            converged = True
            break
        xbar = np.zeros(n)
        for k in range(n):
            xbar += sim[k]
        xbar /= n
        xr = 2.0 * xbar - sim[n]
        fxr = negloglik_free(xr, fix3, xs, ys, counts, rmax, smax)
        nfev += 1
        shrink = False
        if fxr < fsim[0]:
            xe = 3.0 * xbar - 2.0 * sim[n]
            fxe = negloglik_free(xe, fix3, xs, ys, counts, rmax, smax)
            nfev += 1
            if fxe < fxr:
                sim[n] = xe
                fsim[n] = fxe
            else:
                sim[n] = xr
                fsim[n] = fxr
        elif fxr < fsim[n - 1]:
            sim[n] = xr
            fsim[n] = fxr
        elif fxr < fsim[n]:
            xc = 1.5 * xbar - 0.5 * sim[n]
            fxc = negloglik_free(xc, fix3, xs, ys, counts, rmax, smax)
            nfev += 1
            if fxc <= fxr:
                sim[n] = xc
                fsim[n] = fxc
            else:
                shrink = True
        else:
            xcc = 0.5 * xbar + 0.5 * sim[n]
            fxcc = negloglik_free(xcc, fix3, xs, ys, counts, rmax, smax)
            nfev += 1
            if fxcc < fsim[n]:
                sim[n] = xcc
                fsim[n] = fxcc
            else:
                shrink = True
        if shrink:
            for k in range(1, n + 1):
                sim[k] = sim[0] + 0.5 * (sim[k] - sim[0])
                fsim[k] = negloglik_free(sim[k], fix3, xs, ys, counts, rmax, smax)
            nfev += n
        sim, fsim = _sort_simplex(sim, fsim)
    return sim[0].copy(), fsim[0], nfev, converged
