"""Closed-form correlated-Gaussian matrix elements, numba and numpy flavours.

For phi_A(x) = exp(-x^T A x / 2) over n_vec three-vectors and B = Ai + Aj:

    S = (2 pi)^(3 n/2) det(B)^(-3/2)
    T = 3 tr(Ai Lam Aj B^-1) S                 <phi_i| -grad^T Lam grad |phi_j>
    V = S sum_k g_k sqrt(2 / (pi c_k)),  c_k = w_k^T B^-1 w_k

All functions take stacks ``Ai[p], Aj[p]`` (shape (P, d, d)) and return
per-pair arrays.
"""
import functools
import math

import numpy as np

from ._backend import njit, pick

TWO_PI = 2.0 * math.pi


@njit
def _elements_numba(Ai, Aj, lam, W, g):
    P = Ai.shape[0]
    d = Ai.shape[1]
    m = W.shape[0]
    S = np.empty(P)
    T = np.empty(P)
    V = np.empty(P)
    pref = TWO_PI ** (1.5 * d)
    B = np.empty((d, d))
    Binv = np.empty((d, d))
    for p in range(P):
        for a in range(d):
            for b in range(d):
                B[a, b] = Ai[p, a, b] + Aj[p, a, b]
        if d == 1:
            det = B[0, 0]
            Binv[0, 0] = 1.0 / det
        elif d == 2:
            det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
            Binv[0, 0] = B[1, 1] / det
            Binv[1, 1] = B[0, 0] / det
            Binv[0, 1] = -B[0, 1] / det
            Binv[1, 0] = -B[1, 0] / det
        else:
            det = np.linalg.det(B)
            Binv[:, :] = np.linalg.inv(B)
        s = pref * det ** -1.5
        # tr(Ai Lam Aj Binv)
        tr = 0.0
        for a in range(d):
            for b in range(d):
                # (Ai Lam Aj)[a, b]
                acc = 0.0
                for c in range(d):
                    for e in range(d):
                        acc += Ai[p, a, c] * lam[c, e] * Aj[p, e, b]
                tr += acc * Binv[b, a]
        v = 0.0
        for k in range(m):
            c = 0.0
            for a in range(d):
                for b in range(d):
                    c += W[k, a] * Binv[a, b] * W[k, b]
            v += g[k] * math.sqrt(2.0 / (math.pi * c))
        S[p] = s
        T[p] = 3.0 * tr * s
        V[p] = v * s
    return S, T, V


def _elements_numpy(Ai, Aj, lam, W, g):
    d = Ai.shape[1]
    B = Ai + Aj
    det = np.linalg.det(B)
    Binv = np.linalg.inv(B)
    S = TWO_PI ** (1.5 * d) * det ** -1.5
    tr = np.einsum("pac,ce,peb,pba->p", Ai, lam, Aj, Binv)
    c = np.einsum("ka,pab,kb->pk", W, Binv, W)
    V = S * (np.sqrt(2.0 / (np.pi * c)) @ g)
    return S, 3.0 * tr * S, V


def _as_stack(A):
    A = np.ascontiguousarray(A, dtype=float)
    if A.ndim == 2:
        A = A[None]
    return A


def elements(Ai, Aj, lam, W, g, impl=None):
    """Overlap, kinetic and potential elements for stacked width matrices."""
    Ai = _as_stack(Ai)
    Aj = _as_stack(Aj)
    lam = np.ascontiguousarray(lam, dtype=float)
    W = np.ascontiguousarray(W, dtype=float).reshape(-1, Ai.shape[1])
    g = np.ascontiguousarray(g, dtype=float).reshape(-1)
    fn = impl or pick(_elements_numba, _elements_numpy)
    return fn(Ai, Aj, lam, W, g)


numba_elements = _elements_numba
numpy_elements = _elements_numpy


# ---------------------------------------------------------------------------
# radial moments (|r1| + |r2|)^n for two-vector Gaussian densities


@njit
def _pair_moments_numba(b11, b22, b12, nmax, xg, wg):
    """M[p, k, m] = int |x1|^k |x2|^m exp(-x^T B x / 2) d^3x1 d^3x2 for k+m <= nmax."""
    P = b11.shape[0]
    ng = xg.shape[0]
    out = np.zeros((P, nmax + 1, nmax + 1))
    cp = np.empty((nmax + 2, ng))  # c^j
    sp = np.empty((nmax + 2, ng))
    diff = np.empty((nmax + 1, ng))
    pref = np.empty(nmax + 1)
    for n in range(nmax + 1):
        pw = 0.5 * (n + 4)
        pref[n] = 16.0 * math.pi ** 2 * math.exp(math.lgamma(pw) + (pw - 1.0) * math.log(2.0))
    for i in range(ng):
        phi = 0.25 * math.pi * (xg[i] + 1.0)
        c = math.cos(phi)
        s = math.sin(phi)
        cp[0, i] = 1.0
        sp[0, i] = 1.0
        for j in range(1, nmax + 2):
            cp[j, i] = cp[j - 1, i] * c
            sp[j, i] = sp[j - 1, i] * s
    for p in range(P):
        rho = b12[p] / math.sqrt(b11[p] * b22[p])
        for i in range(ng):
            cs2 = 2.0 * cp[1, i] * sp[1, i]
            x = rho * cs2
            if abs(rho) < 1e-300:
                for n in range(nmax + 1):
                    diff[n, i] = 0.5 * (n + 4) * cs2
            else:
                # [(1 - x)^-pw - (1 + x)^-pw] / (2 rho), stable near rho = 0
                # x = tanh(a); pw steps by 1/2, so the hyperbolic functions
                # follow from x algebraically and then by addition formulas
                q = 1.0 - x * x
                sq = math.sqrt(q)
                sh, ch = 2.0 * x / q, (1.0 + x * x) / q  # sinh 2a, cosh 2a
                dch = math.sqrt(0.5 * (1.0 / sq + 1.0))  # cosh a/2
                dsh = x / sq / (2.0 * dch)  # sinh a/2
                e = 1.0 / q  # (1 - x^2)^(-pw/2) at pw = 2
                de = 1.0 / math.sqrt(sq)
                for n in range(nmax + 1):
                    diff[n, i] = e * sh / rho
                    sh, ch = sh * dch + ch * dsh, ch * dch + sh * dsh
                    e *= de
        ib = 1.0 / b11[p]
        jb = 1.0 / b22[p]
        for k in range(nmax + 1):
            fk = ib ** (0.5 * (k + 3))
            for m in range(nmax + 1 - k):
                n = k + m
                acc = 0.0
                for i in range(ng):
                    acc += wg[i] * cp[k + 1, i] * sp[m + 1, i] * diff[n, i]
                out[p, k, m] = 0.25 * math.pi * acc * pref[n] * fk * jb ** (0.5 * (m + 3))
    return out


def _pair_moments_numpy(b11, b22, b12, nmax, xg, wg):
    from scipy.special import gammaln

    rho = b12 / np.sqrt(b11 * b22)
    phi = 0.25 * np.pi * (xg + 1.0)
    c, s = np.cos(phi), np.sin(phi)
    x = rho[:, None] * 2.0 * c * s
    out = np.zeros((b11.size, nmax + 1, nmax + 1))
    small = np.abs(rho) < 1e-300
    safe_rho = np.where(small, 1.0, rho)
    a = np.arctanh(x)
    L = np.log1p(-x * x)
    for n in range(nmax + 1):
        pw = 0.5 * (n + 4)
        diff = np.exp(-0.5 * pw * L) * np.sinh(pw * a) / safe_rho[:, None]
        diff = np.where(small[:, None], pw * 2.0 * c * s, diff) * wg
        pref = 16.0 * np.pi ** 2 * np.exp(gammaln(pw) + (pw - 1.0) * np.log(2.0))
        for k in range(n + 1):
            m = n - k
            acc = 0.25 * np.pi * diff @ (c ** (k + 1) * s ** (m + 1))
            out[:, k, m] = pref * acc * b11 ** (-0.5 * (k + 3)) * b22 ** (-0.5 * (m + 3))
    return out


@functools.lru_cache(maxsize=32)
def gauss_legendre(npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def pair_moments(B, nmax, npts=None, impl=None):
    """Cross moments of |x1|^k |x2|^m for stacked 2x2 matrices ``B``.

    The angular integral over phi = atan(|x2|/|x1|) is done by Gauss-Legendre;
    the node count grows with the correlation |b12|/sqrt(b11 b22), since the
    integrand peaks at phi = pi/4 with width ~ sqrt(1 - |rho|).
    """
    B = _as_stack(B)
    b11 = np.ascontiguousarray(B[:, 0, 0])
    b22 = np.ascontiguousarray(B[:, 1, 1])
    b12 = np.ascontiguousarray(B[:, 0, 1])
    if npts is None:
        rho = np.max(np.abs(b12) / np.sqrt(b11 * b22)) if b11.size else 0.0
        npts = int(min(2000, 64 + 40.0 / math.sqrt(max(1.0 - rho, 1e-6))))
    xg, wg = gauss_legendre(npts)
    fn = impl or pick(_pair_moments_numba, _pair_moments_numpy)
    return fn(b11, b22, b12, int(nmax), xg, wg)


numba_pair_moments = _pair_moments_numba
numpy_pair_moments = _pair_moments_numpy
