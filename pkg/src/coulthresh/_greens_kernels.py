"""Radial Riccati sweeps for -u'' + [l(l+1)/r^2 + A eta_{-1}(r) + k^2] u = 0.

In t = ln r the log-derivative psi = r u'/u obeys

    dpsi/dt = psi - psi^2 + P(t),
    P = l(l+1) + r^2 (A + k^2)        r <= 1
    P = l(l+1) + A r + k^2 r^2        r >  1

and L = ln u obeys dL/dt = psi.  The regular solution is swept outward
(stable for the growing branch), the decaying one inward.
"""
import math

import numpy as np

from ._backend import njit, pick


@njit
def _P(t, A, k2, ll):
    r = math.exp(t)
    if r <= 1.0:
        return ll + r * r * (A + k2)
    return ll + A * r + k2 * r * r


@njit
def _sweep_numba(t, psi0, A, k2, ll, forward):
    n = t.shape[0]
    psi = np.empty(n)
    L = np.empty(n)
    if forward:
        i0, i1, di = 0, n, 1
    else:
        i0, i1, di = n - 1, -1, -1
    y = psi0
    l_acc = 0.0
    psi[i0] = y
    L[i0] = 0.0
    i = i0
    while i + di != i1:
        j = i + di
        h = t[j] - t[i]
        tm = t[i] + 0.5 * h
        Pi = _P(t[i], A, k2, ll)
        Pm = _P(tm, A, k2, ll)
        Pj = _P(t[j], A, k2, ll)
        k1 = y - y * y + Pi
        y2 = y + 0.5 * h * k1
        k2_ = y2 - y2 * y2 + Pm
        y3 = y + 0.5 * h * k2_
        k3 = y3 - y3 * y3 + Pm
        y4 = y + h * k3
        k4 = y4 - y4 * y4 + Pj
        l_acc += h / 6.0 * (y + 2.0 * y2 + 2.0 * y3 + y4)
        y = y + h / 6.0 * (k1 + 2.0 * k2_ + 2.0 * k3 + k4)
        psi[j] = y
        L[j] = l_acc
        i = j
    return psi, L


def _sweep_numpy(t, psi0, A, k2, ll, forward):
    # same scheme; the recursion is inherently serial, so this is a plain loop
    n = t.shape[0]
    r = np.exp(t)
    tm = 0.5 * (t[1:] + t[:-1])
    rm = np.exp(tm)

    def P(r):
        return np.where(r <= 1.0, ll + r * r * (A + k2), ll + A * r + k2 * r * r)

    Pn = P(r)
    Pm = P(rm)
    psi = np.empty(n)
    L = np.empty(n)
    order = range(n - 1) if forward else range(n - 1, 0, -1)
    y = psi0
    l_acc = 0.0
    first = 0 if forward else n - 1
    psi[first] = y
    L[first] = 0.0
    for i in order:
        j = i + 1 if forward else i - 1
        h = t[j] - t[i]
        m = min(i, j)
        k1 = y - y * y + Pn[i]
        y2 = y + 0.5 * h * k1
        k2_ = y2 - y2 * y2 + Pm[m]
        y3 = y + 0.5 * h * k2_
        k3 = y3 - y3 * y3 + Pm[m]
        y4 = y + h * k3
        k4 = y4 - y4 * y4 + Pn[j]
        l_acc += h / 6.0 * (y + 2.0 * y2 + 2.0 * y3 + y4)
        y = y + h / 6.0 * (k1 + 2.0 * k2_ + 2.0 * k3 + k4)
        psi[j] = y
        L[j] = l_acc
    return psi, L


def sweep(t, psi0, A, k, l, forward, impl=None):
    fn = impl or pick(_sweep_numba, _sweep_numpy)
    return fn(np.ascontiguousarray(t, dtype=float), float(psi0), float(A), float(k) ** 2,
              float(l * (l + 1)), bool(forward))


numba_sweep = _sweep_numba
numpy_sweep = _sweep_numpy


@njit
def _fd_weights(z, x):
    """First-derivative weights at z for nodes x (Fornberg's recursion)."""
    n = x.shape[0]
    c = np.zeros((n, 2))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, 1)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for kk in range(mn, 0, -1):
                    c[i, kk] = c1 * (kk * c[i - 1, kk - 1] - c5 * c[i - 1, kk]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for kk in range(mn, 0, -1):
                c[j, kk] = (c4 * c[j, kk] - kk * c[j, kk - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, 1].copy()


@njit
def riccati_residual(t, psi, A, k2, ll, half):
    """Relative residual of the Riccati equation from a (2 half + 1)-point stencil.

    Stencils straddling t = 0 (where P has a kink) are skipped and reported as 0.
    """
    n = t.shape[0]
    out = np.zeros(n)
    for i in range(half, n - half):
        a = t[i - half]
        b = t[i + half]
        if a < 0.0 < b:
            continue
        w = _fd_weights(t[i], t[i - half:i + half + 1])
        d = 0.0
        for j in range(2 * half + 1):
            d += w[j] * psi[i - half + j]
        y = psi[i]
        p = _P(t[i], A, k2, ll)
        rhs = y - y * y + p
        scale = abs(y) + y * y + abs(p)
        out[i] = abs(d - rhs) / scale
    return out


@njit
def bessel_ratio(l, x):
    """i_{l+1}(x) / i_l(x) for modified spherical Bessel functions, x >= 0.

    Backward continued fraction r_n = x / (2n + 3 + x r_{n+1}).
    """
    if x == 0.0:
        return 0.0
    top = l + 60 + int(2.0 * x)
    r = 0.0
    for n in range(top, l - 1, -1):
        r = x / (2.0 * n + 3.0 + x * r)
    return r
