"""Tail-mass diagnostics for sequences of functions and finite spreading proxies.

A sequence f_n spreads when there is a > 0 with

    limsup_n || chi_{|x| > R} f_n || > a     for every R > 0.

On a finite sequence the limsup is replaced by the maximum over the trailing
half, and "every R" by a finite grid.  Tail masses are computed by quadrature
in spherical coordinates about the centre of each function, splitting the
radial integral exactly at the sphere |x| = R so that no discontinuity falls
inside a quadrature panel.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .greens import BoundReport, ResolutionError, _report


@dataclass(frozen=True)
class SampledFunction:
    """A function on R^d given by a vectorized callback.

    ``func`` maps an (N, d) array to N values.  ``center`` and ``extent``
    describe where the function lives: |f| is negligible beyond ``extent``
    from ``center``.  If ``radial`` is given the function is f(x) = radial(|x|)
    about the origin and one-dimensional quadrature is used.  ``scale`` is
    the smallest feature length, used to size the radial panels.
    """
    func: Callable | None
    dim: int
    center: tuple = None
    extent: float = 10.0
    radial: Callable | None = None
    label: str = ""
    scale: float | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.func is None and self.radial is None:
            raise ValueError("need func or radial")
        c = (0.0,) * self.dim if self.center is None else tuple(float(x) for x in self.center)
        if len(c) != self.dim:
            raise ValueError("center has the wrong dimension")
        object.__setattr__(self, "center", c)
        if not self.extent > 0:
            raise ValueError("extent must be positive")

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        if self.radial is not None:
            return self.radial(np.linalg.norm(x, axis=1))
        return self.func(x)

    @property
    def norm(self):
        return tail_mass(self, 0.0)[0]

    def scaled(self, a):
        """The function a * f."""
        if self.radial is not None:
            rad = self.radial
            return SampledFunction(None, self.dim, self.center, self.extent,
                                   lambda r: a * rad(r), self.label, self.scale)
        fn = self.func
        return SampledFunction(lambda x: a * fn(x), self.dim, self.center, self.extent, None,
                               self.label, self.scale)


def gaussian(dim, width=1.0, center=None, normalized=True):
    """exp(-|x - c|^2 / (2 width^2)), optionally L2-normalized."""
    c = np.zeros(dim) if center is None else np.asarray(center, float)
    amp = (math.pi * width * width) ** (-dim / 4.0) if normalized else 1.0
    ext = 9.0 * width
    if not c.any():
        return SampledFunction(None, dim, None, ext, lambda r: amp * np.exp(-0.5 * (r / width) ** 2))
    return SampledFunction(
        lambda x: amp * np.exp(-0.5 * np.sum((x - c) ** 2, axis=1) / width ** 2),
        dim, tuple(c), ext)


def translated(f: SampledFunction, shift):
    """x -> f(x - shift)."""
    shift = np.asarray(shift, float)
    if f.radial is not None:
        rad = f.radial
        fn = lambda x: rad(np.linalg.norm(x - shift, axis=1))
    else:
        g = f.func
        fn = lambda x: g(x - shift)
    c = tuple(np.asarray(f.center) + shift)
    return SampledFunction(fn, f.dim, c, f.extent, None, f.label, f.scale)


# ---------------------------------------------------------------------------
# quadrature


def _gl_panels(a, b, panels, order):
    """Composite Gauss-Legendre nodes and weights on [a, b], broadcast over a, b."""
    x, w = leggauss(order)
    a = np.asarray(a, float)[..., None]
    b = np.asarray(b, float)[..., None]
    edges = np.linspace(0.0, 1.0, panels + 1)
    u = (0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * np.diff(edges)[:, None] * x).ravel()
    wu = (0.5 * np.diff(edges)[:, None] * w).ravel()
    return a + (b - a) * u, (b - a) * wu


def _graded(a, b, toward, order, levels=6, ratio=0.3):
    """Gauss-Legendre panels on [a, b] refined geometrically toward one end."""
    L = b - a
    fr = np.concatenate([[0.0], ratio ** np.arange(levels - 1, -1, -1.0)])
    if toward == a:
        edges = a + L * fr
    else:
        edges = b - L * fr[::-1]
    edges = np.sort(edges)
    x, w = leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _angle_rule(lo, hi, split, order):
    """Nodes on [lo, hi], graded toward ``split`` when it lies inside."""
    if split is None or not lo < split < hi:
        return _gl_panels(lo, hi, 2, order)
    x1, w1 = _graded(lo, split, split, order)
    x2, w2 = _graded(split, hi, split, order)
    return np.concatenate([x1, x2]), np.concatenate([w1, w2])


def _directions(dim, axis, cos_split, n_ang):
    """Unit directions and solid-angle weights about ``axis``.

    Panels are graded toward the polar angle ``cos_split`` (the tangency
    cone of the sphere |x| = R seen from the centre), where the radial cut
    stops being smooth in the direction.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        th0 = None if cos_split is None else math.acos(min(1.0, max(-1.0, cos_split)))
        t, w = _angle_rule(0.0, math.pi, th0, n_ang)
        th = np.concatenate([t, -t])
        w = np.concatenate([w, w])
        perp = np.array([-axis[1], axis[0]])
        d = np.cos(th)[:, None] * axis + np.sin(th)[:, None] * perp
        return d, w
    if dim == 3:
        u, wu = _angle_rule(-1.0, 1.0, cos_split, n_ang)
        nphi = 2 * n_ang
        phi = 2 * math.pi * np.arange(nphi) / nphi
        e1 = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = e1 - axis * (e1 @ axis)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(axis, e1)
        s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
        d = (u[:, None, None] * axis
             + (s[:, None] * np.cos(phi))[:, :, None] * e1
             + (s[:, None] * np.sin(phi))[:, :, None] * e2).reshape(-1, 3)
        w = (wu[:, None] * np.full(nphi, 2 * math.pi / nphi)).ravel()
        return d, w
    raise ValueError("deterministic quadrature implemented for d <= 3")


def _sphere_area(dim):
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def _radial_tail(f: SampledFunction, R, panels, order):
    # |f|^2 r^{d-1} over (R, R + extent)
    hi = max(R, 0.0) + f.extent
    lo = max(R, 0.0)
    r, w = _gl_panels(lo, hi, panels, order)
    v = np.abs(f.radial(r)) ** 2
    return _sphere_area(f.dim) * float(np.sum(w * v * r ** (f.dim - 1)))


def _shell_tail(f: SampledFunction, R, panels, order, n_ang):
    c = np.asarray(f.center)
    cn = float(np.linalg.norm(c))
    axis = -c / cn if cn > 0 else np.eye(f.dim)[-1]
    cos_split = None
    if R > 0 and cn > 0:
        # tangency cone; for a centre inside the sphere the exit distance
        # bends fastest across the equator, so split there
        cos_split = math.sqrt(max(0.0, 1.0 - (R / cn) ** 2))
    dirs, wd = _directions(f.dim, axis, cos_split, n_ang)
    ext = f.extent
    # |c + rho w|^2 = R^2  ->  rho = -b +- sqrt(b^2 - (|c|^2 - R^2))
    b = dirs @ c
    disc = b * b - (cn * cn - R * R)
    sq = np.sqrt(np.clip(disc, 0.0, None))
    lo_in = np.clip(-b - sq, 0.0, ext)
    hi_in = np.clip(-b + sq, 0.0, ext)
    hit = (disc > 0) & (R > 0)
    lo_in = np.where(hit, lo_in, 0.0)
    hi_in = np.where(hit, hi_in, 0.0)
    total = 0.0
    # outside pieces: [0, lo_in] and [hi_in, ext]
    for a, bnd in ((np.zeros_like(lo_in), lo_in), (hi_in, np.full_like(hi_in, ext))):
        rho, wr = _gl_panels(a, bnd, panels, order)
        pts = c + rho[..., None] * dirs[:, None, :]
        v = np.abs(f(pts.reshape(-1, f.dim)).reshape(rho.shape)) ** 2
        total += float(np.sum(wd[:, None] * wr * v * rho ** (f.dim - 1)))
    return total


def _mc_tail(f: SampledFunction, R, n, seed):
    # importance sampling from an isotropic Gaussian about the centre
    rng = np.random.default_rng(seed)
    c = np.asarray(f.center)
    s = f.extent / 4.0
    x = c + s * rng.standard_normal((n, f.dim))
    logq = -0.5 * np.sum((x - c) ** 2, axis=1) / s ** 2 - 0.5 * f.dim * math.log(2 * math.pi * s * s)
    v = np.abs(f(x)) ** 2 * np.exp(-logq) * (np.linalg.norm(x, axis=1) > R)
    return float(v.mean()), float(v.std() / math.sqrt(n))


def tail_mass(f: SampledFunction, R, panels=4, order=16, n_ang=10, rtol=1e-6, atol=1e-10,
              mc_samples=200000, seed=0):
    """||chi_{|x| > R} f|| and an error estimate.

    The estimate is the difference to a slightly coarser rule, which for
    these spectrally convergent rules bounds the error of the finer one.
    Raises ResolutionError when the squared-mass estimate exceeds both
    ``rtol`` relative and ``atol`` absolute.
    """
    if R < 0:
        raise ValueError("R must be non-negative")
    if f.scale is not None:
        panels = max(panels, int(math.ceil(f.extent / (2.0 * f.scale))))
    if f.radial is not None:
        I = _radial_tail(f, R, panels, order)
        Ic = _radial_tail(f, R, max(1, panels - 1), order - 2)
        err2 = abs(I - Ic)
    elif f.dim <= 3:
        I = _shell_tail(f, R, panels, order, n_ang)
        Ic = _shell_tail(f, R, max(1, panels - 1), order - 2, max(2, n_ang - 2))
        err2 = abs(I - Ic)
    else:
        I, err2 = _mc_tail(f, R, mc_samples, seed)
        return math.sqrt(max(I, 0.0)), err2 / (2 * math.sqrt(I)) if I > 0 else math.sqrt(err2)
    if err2 > rtol * I and err2 > atol:
        raise ResolutionError(f"tail quadrature not converged: {err2:.3g} vs {I:.3g}")
    val = math.sqrt(max(I, 0.0))
    err = err2 / (2 * val) if val > 0 else math.sqrt(err2)
    return val, err


# ---------------------------------------------------------------------------
# spreading probe


@dataclass
class SpreadProbe:
    R_grid: np.ndarray
    masses: np.ndarray  # (n, len(R_grid))
    a: float
    spreads: bool
    trailing_max: np.ndarray = field(default=None)
    labels: list = field(default_factory=list)

    @property
    def verdict(self):
        return "spread-proxy" if self.spreads else "non-spread-proxy"

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "R", "mass"])
        for i in range(self.masses.shape[0]):
            for j, R in enumerate(self.R_grid):
                wr.writerow([i + 1, repr(float(R)), repr(float(self.masses[i, j]))])
        return buf.getvalue()


def tail_table(seq: Sequence[SampledFunction], R_grid, **kw):
    R_grid = np.asarray(R_grid, float)
    return np.array([[tail_mass(f, R, **kw)[0] for R in R_grid] for f in seq])


def probe_sequence(seq: Sequence[SampledFunction], R_grid, a, **kw):
    """Finite spreading proxy: max over the trailing half of the tail mass exceeds a at every R."""
    if len(seq) < 8:
        raise ValueError("need at least 8 sequence members")
    dims = {f.dim for f in seq}
    if len(dims) != 1:
        raise ValueError("inconsistent dimensions in sequence")
    R_grid = np.asarray(R_grid, float)
    M = tail_table(seq, R_grid, **kw)
    half = len(seq) // 2
    tmax = M[half:].max(axis=0)
    return SpreadProbe(R_grid, M, float(a), bool(np.all(tmax > a)), tmax,
                       [f.label for f in seq])


# ---------------------------------------------------------------------------
# monotone domination


def sample_points(seq: Sequence[SampledFunction], n=4000, seed=0):
    """Deterministic test points covering the support of every member."""
    rng = np.random.default_rng(seed)
    d = seq[0].dim
    out = []
    per = max(1, n // len(seq))
    for f in seq:
        c = np.asarray(f.center)
        dirs = rng.standard_normal((per, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        r = f.extent * rng.random(per) ** (1.0 / d)
        out.append(c + r[:, None] * dirs)
    return np.concatenate(out)


def _abs_values(seq, points):
    return np.array([np.abs(f(points)) for f in seq])


def check_monotone_domination(seq: Sequence[SampledFunction], points=None, norm_bound=None,
                              rtol=1e-12):
    """True iff |f_n| <= |f_{n+1}| at every sample point and the norms stay bounded."""
    if points is None:
        points = sample_points(seq)
    V = _abs_values(seq, points)
    mono = bool(np.all(V[:-1] <= V[1:] * (1 + rtol) + 1e-300))
    norms = np.array([f.norm for f in seq])
    bounded = bool(np.all(np.isfinite(norms)))
    if norm_bound is not None:
        bounded = bounded and bool(np.all(norms <= norm_bound))
    return mono and bounded


def extract_monotone_subsequence(seq: Sequence[SampledFunction], points=None, rtol=1e-12):
    """Indices of a longest chain with |f_i| <= |f_j| pointwise (i < j)."""
    if points is None:
        points = sample_points(seq)
    V = _abs_values(seq, points)
    n = len(seq)
    best = [1] * n
    prev = [-1] * n
    for j in range(n):
        for i in range(j):
            if best[i] + 1 > best[j] and np.all(V[i] <= V[j] * (1 + rtol) + 1e-300):
                best[j] = best[i] + 1
                prev[j] = i
    j = int(np.argmax(best))
    out = []
    while j >= 0:
        out.append(j)
        j = prev[j]
    return out[::-1]



def _profile(width, power, amp, center):
    c = None if center is None else np.asarray(center, float)

    def rad(r):
        return amp * r ** power * np.exp(-0.5 * (r / width) ** 2)

    if c is None:
        return rad
    return lambda x: rad(np.linalg.norm(x - c, axis=1))


def random_monotone_family(rng, length=12, dim=3, max_terms=3, off_center_prob=0.0):
    """A family |f_1| <= |f_2| <= ... of nonnegative bump sums with bounded norms.

    f_n = sum_j a_j s_j(n) r_j^{p_j} exp(-r_j^2 / (2 w_j^2)) with r_j the
    distance to a common centre and each schedule s_j nondecreasing in n
    with values in [0, 1].  Returns (members, radius beyond which every
    member is negligible).
    """
    m = int(rng.integers(1, max_terms + 1))
    widths = rng.uniform(0.3, 2.0, m)
    powers = rng.integers(0, 3, m)
    amps = rng.uniform(0.2, 1.0, m)
    n = np.arange(1, length + 1)
    sched = []
    for _ in range(m):
        kind = int(rng.integers(4))
        if kind == 0:
            s = 1.0 - np.exp(-rng.uniform(0.1, 2.0) * n)
        elif kind == 1:
            s = n / (n + rng.uniform(0.5, 10.0))
        elif kind == 2:
            s = (n >= rng.integers(1, length + 1)).astype(float)
        else:
            s = np.sort(rng.random(length))
        sched.append(s)
    center = None
    if rng.random() < off_center_prob:
        center = rng.uniform(-3.0, 3.0, dim)
    ext = 9.0 * float(widths.max())
    scale = float(widths.min())
    members = []
    for i in range(length):
        parts = [_profile(widths[j], powers[j], amps[j] * sched[j][i], center) for j in range(m)]
        if center is None:
            members.append(SampledFunction(None, dim, None, ext,
                                           lambda r, ps=parts: sum(p(r) for p in ps),
                                           f"monotone[{i + 1}]", scale))
        else:
            members.append(SampledFunction(lambda x, ps=parts: sum(p(x) for p in ps), dim,
                                           tuple(center), ext, None, f"monotone[{i + 1}]",
                                           scale))
    reach = (0.0 if center is None else float(np.linalg.norm(center))) + 6.0 * float(widths.max())
    return members, reach


# ---------------------------------------------------------------------------
# product split over (x^a, R_a) with |x| = |x^a| + |R_a|


def split_indicator_violations(xa, Ra, R):
    """Count of samples with chi(|x| >= 2R) > chi(|x^a| >= R) + chi(|R_a| >= R)."""
    s = np.linalg.norm(np.atleast_2d(xa), axis=1)
    t = np.linalg.norm(np.atleast_2d(Ra), axis=1)
    lhs = (s + t >= 2 * R).astype(int)
    rhs = (s >= R).astype(int) + (t >= R).astype(int)
    return lhs - rhs


@dataclass(frozen=True)
class ProductRadial:
    """f(x^a, R_a) = u(|x^a|) v(|R_a|) on R^{d1} x R^3."""
    u: Callable
    v: Callable
    d1: int = 3
    ext_u: float = 12.0
    ext_v: float = 12.0

    def times(self, w: Callable):
        """Multiply by a weight w(|x^a|) acting on the first factor."""
        u = self.u
        return ProductRadial(lambda s: w(s) * u(s), self.v, self.d1, self.ext_u, self.ext_v)


def product_tail(f: ProductRadial, R, which="sum", panels=8, order=16):
    """||chi f|| for chi = chi(|x^a|+|R_a| >= R), chi(|x^a| >= R) or chi(|R_a| >= R)."""
    Su, Sv = _sphere_area(f.d1), _sphere_area(3)

    def vmass(lo):
        t, wt = _gl_panels(lo, lo + f.ext_v, panels, order)
        return Sv * np.sum(wt * t ** 2 * np.abs(f.v(t)) ** 2, axis=-1)

    def umass(lo):
        s, ws = _gl_panels(lo, lo + f.ext_u, panels, order)
        return Su * float(np.sum(ws * s ** (f.d1 - 1) * np.abs(f.u(s)) ** 2))

    if which == "xa":
        return math.sqrt(max(umass(R) * float(vmass(0.0)), 0.0))
    if which == "Ra":
        return math.sqrt(max(umass(0.0) * float(vmass(R)), 0.0))
    if which != "sum":
        raise ValueError(which)
    # for each s the R_a integral starts at max(R - s, 0)
    # the kink of max(R - s, 0) at s = R: split the s integral there
    total = 0.0
    for a, b in ((0.0, min(R, f.ext_u + R)), (R, f.ext_u + R)):
        if b <= a:
            continue
        sp, wsp = _gl_panels(a, b, panels, order)
        Vs = vmass(np.maximum(R - sp, 0.0))
        total += float(np.sum(Su * wsp * sp ** (f.d1 - 1) * np.abs(f.u(sp)) ** 2 * Vs))
    return math.sqrt(max(total, 0.0))


def product_norm(f: ProductRadial):
    return product_tail(f, 0.0, "Ra")


def exp_weight(alpha):
    return lambda s: np.exp(-2.0 * alpha * s), (lambda R: math.exp(-alpha * R))


def power_weight(alpha):
    return lambda s: (1.0 + s) ** (-2.0 * alpha), (lambda R: (1.0 + R) ** (-alpha))


def check_product_split(seq: Sequence[ProductRadial], K, alpha, weight="exp", R_grid=None,
                        samples=100000, seed=0, a=None, tol=1e-9):
    """Tail split for (A_n x 1) f_n with A_n multiplication by a decaying weight of |x^a|.

    ``weight`` selects w(s) = exp(-2 alpha s) or (1 + s)^{-2 alpha}, for which
    ||e^{alpha s} A_n|| (resp. ||(1 + s)^alpha A_n||) is at most 1 < K.  Checked:

    * the indicator inequality on random (x^a, R_a) samples;
    * ||chi_{|x|>=2R} g_n|| <= ||chi_{|x^a|>=R} g_n|| + ||chi_{|R_a|>=R} g_n||;
    * ||chi_{|x^a|>=R} g_n|| <= K decay(R) ||f_n||;
    * ||chi_{|R_a|>=R} g_n|| <= K ||chi_{|R_a|>=R} f_n||;

    with g_n = (A_n x 1) f_n, plus the finite spreading proxy of g_n.
    """
    if not (K > 0 and alpha > 0):
        raise ValueError("K and alpha must be positive")
    w, decay = {"exp": exp_weight, "power": power_weight}[weight](alpha)
    if R_grid is None:
        R_grid = np.linspace(0.5, 20.0, 12)
    R_grid = np.asarray(R_grid, float)
    rng = np.random.default_rng(seed)
    d1 = seq[0].d1
    scale = 10.0 ** rng.uniform(-2, 2, size=(samples, 1))
    xa = scale * rng.standard_normal((samples, d1))
    Ra = 10.0 ** rng.uniform(-2, 2, size=(samples, 1)) * rng.standard_normal((samples, 3))
    Rs = 10.0 ** rng.uniform(-2, 2, size=samples)
    ind = split_indicator_violations(xa, Ra, Rs)
    n_ind = int(np.count_nonzero(ind > 0))

    rows = []
    viol = []
    where_n, where_R = [], []
    for i, f in enumerate(seq):
        g = f.times(w)
        nf = product_norm(f)
        for R in R_grid:
            lhs = product_tail(g, 2 * R, "sum")
            r1 = product_tail(g, R, "xa")
            r2 = product_tail(g, R, "Ra")
            b1 = K * decay(R) * nf
            b2 = K * product_tail(f, R, "Ra")
            v = max(lhs - (r1 + r2), r1 - b1, r2 - b2)
            viol.append(v)
            where_n.append(i + 1)
            where_R.append(R)
            rows.append((i + 1, float(R), lhs, r1, r2))
    viol = np.array(viol)
    viol = np.append(viol, float(n_ind))
    where_n.append(0)
    where_R.append(0.0)
    masses = np.array([[product_tail(f.times(w), R, "sum") for R in R_grid] for f in seq])
    half = len(seq) // 2
    tmax = masses[half:].max(axis=0)
    a_level = a if a is not None else 0.1 * max(product_norm(f) for f in seq)
    spreads = bool(np.all(tmax > a_level))
    rep = _report("product_split", {"K": K, "alpha": alpha, "weight": weight, "samples": samples,
                                    "seed": seed},
                  viol, (np.array(where_n, float), np.array(where_R)), tol,
                  {"indicator_violations": n_ind, "composed_spreads": spreads,
                   "a": a_level})
    rep.passed = rep.passed and n_ind == 0 and not spreads
    return rep
