"""Resolvent of -Lap + A eta_{-1}(r) + k^2 and numerical checks of its bounds.

The operator is rotation invariant, so everything reduces to radial channels

    g_l(r, r') = u_reg(r_<) u_dec(r_>) / W

with u the regular and decaying solutions of the channel equation.  Both are
carried through their log-derivatives psi = r u'/u on a t = ln r grid, which
keeps the kernel free of overflow even where u_dec ~ exp(-200):

    g_l(r, r') = r_< exp(L_dec(t_>) - L_dec(t_<)) / (psi_reg(t_<) - psi_dec(t_<)).

The full kernel is sum_l (2l + 1)/(4 pi) g_l(r, r') / (r r') P_l(cos theta).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import eval_legendre, roots_legendre, spherical_in, spherical_kn, zeta

from . import _greens_kernels as gk
from .kinematics import InvalidInput, eta_radial

R_MIN = 1e-4
H_MAX = 3e-3
C_STAB = 0.07
SEED_DECAY = 20.0  # integral of sqrt(q) between r_max and the seeding point
RESIDUAL_TOL = 1e-8
WRONSKIAN_TOL = 1e-8
OUTPUT_DECAY = 40.0


class ResolutionError(RuntimeError):
    """Channel residual or Wronskian drift above tolerance."""


class LmaxInsufficient(RuntimeError):
    """Partial-wave series not converged at the requested l_max."""


# ---------------------------------------------------------------------------
# radial channels


def default_r_max(k, n=1.0):
    return max(40.0 / k, 8.0 * n)


def _P_np(t, A, k, l):
    r = np.exp(t)
    ll = l * (l + 1)
    return np.where(r <= 1.0, ll + r * r * (A + k * k), ll + A * r + k * k * r * r)


def make_grid(A, k, l, r_min=R_MIN, r_max=None, h_max=H_MAX, c_stab=C_STAB):
    """t-nodes with a node at t = 0 (r = 1) and at ln r_max, extended past r_max.

    Steps obey h <= min(h_max, c_stab / sqrt(P + 1/4)), which keeps RK4 inside
    its stability region for the stiff Riccati linearization (rate ~ 2 sqrt P).
    Returns ``(t, i_max)`` where ``t[i_max] = ln r_max``.
    """
    r_max = default_r_max(k) if r_max is None else r_max
    if not (0 < r_min < 1.0 < r_max):
        raise InvalidInput("grid needs r_min < 1 < r_max")
    ll = l * (l + 1)
    h_in = min(h_max, c_stab / math.sqrt(ll + A + k * k + 0.25))
    n_in = max(1, math.ceil(-math.log(r_min) / h_in))
    t_in = np.linspace(math.log(r_min), 0.0, n_in + 1)
    t_out = [0.0]
    t = 0.0
    t_max = math.log(r_max)
    acc = 0.0
    i_max = None
    while True:
        P = float(_P_np(t + h_max, A, k, l))
        h = min(h_max, c_stab / math.sqrt(P + 0.25))
        if i_max is None:
            rem = t_max - t
            # land on t_max without leaving a sliver step
            if rem <= h:
                h = rem
            elif rem <= 2 * h:
                h = 0.5 * rem
        t += h
        t_out.append(t)
        if i_max is None and t >= t_max:
            i_max = len(t_in) + len(t_out) - 2
            t = t_max
            t_out[-1] = t_max
        elif i_max is not None:
            acc += math.sqrt(P) * h
            if acc >= SEED_DECAY:
                break
    return np.concatenate([t_in, np.array(t_out[1:])]), i_max


def _hermite(tq, t, y, dy):
    i = np.clip(np.searchsorted(t, tq) - 1, 0, t.size - 2)
    h = t[i + 1] - t[i]
    s = (tq - t[i]) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y[i] + h10 * h * dy[i] + h01 * y[i + 1] + h11 * h * dy[i + 1]


@dataclass
class RadialChannel:
    A: float
    k: float
    l: int
    t: np.ndarray = field(repr=False)
    i_max: int
    psi_reg: np.ndarray = field(repr=False)
    L_reg: np.ndarray = field(repr=False)
    psi_dec: np.ndarray = field(repr=False)
    L_dec: np.ndarray = field(repr=False)
    residual: float = 0.0
    wronskian_drift: float = 0.0

    @property
    def r_min(self):
        return math.exp(self.t[0])

    @property
    def r_max(self):
        return math.exp(self.t[self.i_max])

    def _rhs(self, psi):
        return psi - psi * psi + _P_np(self.t, self.A, self.k, self.l)

    def interp(self, tq):
        """(psi_reg, psi_dec, L_dec) at log-radii ``tq``."""
        t = self.t
        pr = _hermite(tq, t, self.psi_reg, self._rhs(self.psi_reg))
        pd = _hermite(tq, t, self.psi_dec, self._rhs(self.psi_dec))
        Ld = _hermite(tq, t, self.L_dec, self.psi_dec)
        return pr, pd, Ld

    def g(self, r, rp):
        """Reduced kernel g_l(r, r') for radii inside [r_min, r_max]."""
        r = np.asarray(r, dtype=float)
        rp = np.asarray(rp, dtype=float)
        lo = np.minimum(r, rp)
        hi = np.maximum(r, rp)
        if np.any(lo < self.r_min * (1 - 1e-12)) or np.any(hi > self.r_max * (1 + 1e-12)):
            raise InvalidInput("radius outside the channel grid")
        tl, th = np.log(lo), np.log(hi)
        pr, pd, Ll = self.interp(tl)
        Lh = _hermite(th, self.t, self.L_dec, self.psi_dec)
        return lo * np.exp(Lh - Ll) / (pr - pd)

    def log_wronskian(self):
        s = slice(0, self.i_max + 1)
        return (self.L_reg[s] + self.L_dec[s] + np.log(self.psi_reg[s] - self.psi_dec[s])
                - self.t[s])


def _solve(A, k, l, r_min=R_MIN, r_max=None, h_max=H_MAX, check=True, impl=None):
    t, i_max = make_grid(A, k, l, r_min, r_max, h_max)
    kappa = math.sqrt(A + k * k)
    x = kappa * r_min
    psi0 = l + 1 + x * gk.bessel_ratio(l, x)
    psi_reg, L_reg = gk.sweep(t, psi0, A, k, l, True, impl)
    r = math.exp(t[-1])
    ll = l * (l + 1)
    q = ll / r ** 2 + A / r + k * k
    dq = -2.0 * ll / r ** 3 - A / r ** 2
    psi_end = r * (-math.sqrt(q) - dq / (4.0 * q))
    psi_dec, L_dec = gk.sweep(t, psi_end, A, k, l, False, impl)
    ch = RadialChannel(float(A), float(k), int(l), t, i_max, psi_reg, L_reg, psi_dec, L_dec)
    if check:
        half = 3
        k2, llf = k * k, float(ll)
        res_r = gk.riccati_residual(t, psi_reg, A, k2, llf, half)
        res_d = gk.riccati_residual(t, psi_dec, A, k2, llf, half)
        ch.residual = float(max(res_r[: i_max + 1].max(), res_d[: i_max + 1].max()))
        lw = ch.log_wronskian()
        ch.wronskian_drift = float(np.max(np.abs(lw - lw[0])))
        if ch.residual > RESIDUAL_TOL or ch.wronskian_drift > WRONSKIAN_TOL:
            raise ResolutionError(f"channel l={l} A={A} k={k}: residual {ch.residual:.2e}, "
                                  f"Wronskian drift {ch.wronskian_drift:.2e}")
    return ch


@lru_cache(maxsize=256)
def _solve_cached(A, k, l, r_min, r_max, h_max):
    return _solve(A, k, l, r_min, r_max, h_max)


def solve_channel(A, k, l, r_min=R_MIN, r_max=None, h_max=H_MAX):
    """Radial channel l of the resolvent; raises ResolutionError if unresolved."""
    if not A > 0:
        raise InvalidInput("A must be positive")
    if not k > 0:
        raise InvalidInput("k must be positive")
    if l < 0 or int(l) != l:
        raise InvalidInput("l must be a non-negative integer")
    r_max = default_r_max(k) if r_max is None else float(r_max)
    return _solve_cached(float(A), float(k), int(l), float(r_min), r_max, float(h_max))


def free_channel_kernel(k, l, r, rp):
    """Exact g_l for A = 0: (2k/pi) r r' i_l(k r_<) k_l(k r_>)."""
    r = np.asarray(r, float)
    rp = np.asarray(rp, float)
    lo, hi = np.minimum(r, rp), np.maximum(r, rp)
    return 2.0 * k / np.pi * r * rp * spherical_in(l, k * lo) * spherical_kn(l, k * hi)


def free_kernel(k, dist):
    dist = np.asarray(dist, float)
    return np.exp(-k * dist) / (4.0 * np.pi * dist)


# ---------------------------------------------------------------------------
# full kernel


def _channels(A, k, l_max, r_max, r_min=R_MIN):
    return [_solve_cached(float(A), float(k), l, float(r_min), float(r_max), H_MAX)
            for l in range(l_max + 1)]


def _series(terms_env, values):
    """Sum the partial-wave series and a ratio-test estimate of its tail."""
    total = values.sum(axis=0)
    a = terms_env
    L = a.shape[0]
    m = min(3, L - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = a[L - m:] / a[L - m - 1:L - 1]
    ratios = np.where(a[L - m - 1:L - 1] == 0, 0.0, ratios)
    rho = np.nanmax(ratios, axis=0)
    with np.errstate(divide="ignore"):
        tail = np.where(rho < 1.0, a[-1] * rho / (1.0 - np.minimum(rho, 1 - 1e-300)), np.inf)
    tail = np.where(a[-1] == 0, 0.0, tail)
    return total, tail


def kernel(A, k, r, rp, cos_theta, l_max=40, subtract_free=False, r_max=None, rtol=1e-8,
           strict=True):
    """G(r, r') by partial waves; returns ``(value, truncation_estimate)``.

    With ``subtract_free`` the free kernel exp(-k d)/(4 pi d) is added in
    closed form and only the channel differences g_l - g_l^(A=0) are summed,
    which converges much faster near the diagonal.
    """
    r = np.atleast_1d(np.asarray(r, float))
    rp = np.atleast_1d(np.asarray(rp, float))
    c = np.atleast_1d(np.asarray(cos_theta, float))
    r, rp, c = np.broadcast_arrays(r, rp, c)
    if np.any((r == rp) & (c >= 1.0)):
        raise InvalidInput("kernel is singular at r = r'")
    if r_max is None:
        r_max = max(default_r_max(k), float(np.max(np.maximum(r, rp))))
    chans = _channels(A, k, l_max, r_max)
    free = _channels(0.0, k, l_max, r_max) if subtract_free else None
    vals = np.empty((l_max + 1,) + r.shape)
    env = np.empty_like(vals)
    for l, ch in enumerate(chans):
        gl = ch.g(r, rp)
        if free is not None:
            gl = gl - free[l].g(r, rp)
        pref = (2 * l + 1) / (4 * np.pi) / (r * rp)
        env[l] = pref * np.abs(gl)
        vals[l] = pref * gl * eval_legendre(l, c)
    total, tail = _series(env, vals)
    if free is not None:
        d = np.sqrt(np.maximum(r * r + rp * rp - 2 * r * rp * c, 0.0))
        total = total + free_kernel(k, d)
    if strict and np.any(tail > rtol * np.abs(total) + 1e-300):
        raise LmaxInsufficient(f"truncation estimate {np.max(tail / np.abs(total)):.2e} "
                               f"relative at l_max={l_max}")
    return total, tail


# ---------------------------------------------------------------------------
# reports


@dataclass
class BoundReport:
    name: str
    params: dict
    max_violation: float
    location: tuple
    tolerance: float
    passed: bool
    n_samples: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["location"] = [float(x) for x in self.location]
        return d

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _report(name, params, violation, locations, tol, extra=None):
    i = int(np.argmax(violation))
    v = float(violation[i])
    loc = tuple(float(a[i]) for a in locations)
    return BoundReport(name, params, v, loc, tol, bool(v <= tol), int(violation.size),
                       extra or {})


# ---------------------------------------------------------------------------
# pointwise bounds


def repulsion_root(A):
    """Positive root a of a (a + 1) = 4 A."""
    return 0.5 * (-1.0 + math.sqrt(1.0 + 16.0 * A))


def far_field_bound(A, n, r):
    a = repulsion_root(A)
    r = np.asarray(r, float)
    return np.exp(0.5 * a * (math.sqrt(2.0 * n) - np.sqrt(r - n))) / (4.0 * np.pi * 3.0 * n)


def check_admissibility(A, n, rp_max=None):
    """Slack of R0 >= 1 + |r'| and a~ <= a R0^{3/2} (R0 + |r'|)^{-3/2} for R0 = 2n, a~ = a/2."""
    rp = n if rp_max is None else rp_max
    a = repulsion_root(A)
    R0 = 2.0 * n
    return R0 - (1.0 + rp), a * R0 ** 1.5 * (R0 + rp) ** -1.5 - 0.5 * a


def verify_far_field(A, k, n, samples=1000, seed=0, l_max=40, rel_tol=1e-6):
    """Far-field bound on {|r| >= 4n, |r'| <= n} against the partial-wave kernel.

    The reported violation is (G - bound) / bound.
    """
    if n < 1:
        raise InvalidInput("n must be >= 1")
    rng = np.random.default_rng(seed)
    r_hi = default_r_max(k, n)
    r = np.exp(rng.uniform(math.log(4 * n), math.log(r_hi), samples))
    rp = np.exp(rng.uniform(math.log(R_MIN), math.log(n), samples))
    c = rng.uniform(-1.0, 1.0, samples)
    # the extreme corners are the sharpest cases
    r[:4] = [4 * n, 4 * n, r_hi, r_hi]
    rp[:4] = [n, R_MIN, n, R_MIN]
    c[:4] = 1.0
    G, tail = kernel(A, k, r, rp, c, l_max=l_max, r_max=r_hi)
    B = far_field_bound(A, n, r)
    viol = (G + tail - B) / B
    slack12, slack13 = check_admissibility(A, n)
    extra = {"admissible_R0": slack12 >= 0, "admissible_a": slack13 >= 0,
             "slack_R0": slack12, "slack_a": slack13, "max_truncation": float(tail.max())}
    rep = _report("far_field", {"A": A, "k": k, "n": n}, viol, (r, rp, c), rel_tol, extra)
    rep.passed = rep.passed and slack12 >= 0 and slack13 >= 0
    return rep


def verify_near_diagonal(A, k, n, samples=1000, seed=0, l_max=80, rel_tol=1e-6):
    """G <= 1/(4 pi |r - r'|) for |r - r'| <= 2n, |r'| <= n.

    Uses the free-subtracted series; the truncation estimate enters the
    violation so an unconverged series cannot pass silently.
    """
    rng = np.random.default_rng(seed)
    rp = np.exp(rng.uniform(math.log(1e-2), math.log(n), samples))
    r = np.exp(rng.uniform(math.log(1e-2), math.log(3 * n), samples))
    c = rng.uniform(-1.0, 1.0, samples)
    d = np.sqrt(r * r + rp * rp - 2 * r * rp * c)
    keep = (d <= 2 * n) & (d > 1e-3)
    r, rp, c, d = r[keep], rp[keep], c[keep], d[keep]
    G, tail = kernel(A, k, r, rp, c, l_max=l_max, subtract_free=True, strict=False)
    B = 1.0 / (4 * np.pi * d)
    viol = (G + tail - B) / B
    return _report("near_diagonal", {"A": A, "k": k, "n": n}, viol, (r, rp, c), rel_tol,
                   {"max_truncation": float(tail.max())})


def comparison_slack(A, r):
    """A eta_{-1}(r) - (a^2/4 |r|^-1 + a/4 |r|^-3/2) chi_{|r| >= 1}."""
    a = repulsion_root(A)
    r = np.asarray(r, float)
    rhs = np.where(r >= 1.0, a * a / 4.0 / r + a / 4.0 * r ** -1.5, 0.0)
    return A * eta_radial(-1.0, r) - rhs


def verify_comparison_potential(A, samples=100000, r_hi=1e3, rel_tol=1e-12):
    if not A > 0:
        raise InvalidInput("A must be positive")
    r = np.geomspace(1.0, r_hi, samples)
    slack = comparison_slack(A, r)
    viol = -slack / (A / r)
    return _report("comparison_potential", {"A": A}, viol, (r,), rel_tol,
                   {"min_slack": float(slack.min())})


def two_point_sides(s, sp):
    """(lhs, rhs) of |chi_{|s-s'|>=1}/|s-s'| - eta_{-1}(s)| <= 2 eta_2(s') eta_{-2}(s)."""
    s = np.asarray(s, float)
    sp = np.asarray(sp, float)
    d = np.linalg.norm(s - sp, axis=-1)
    ns = np.linalg.norm(s, axis=-1)
    nsp = np.linalg.norm(sp, axis=-1)
    with np.errstate(divide="ignore"):
        first = np.where(d >= 1.0, 1.0 / np.where(d > 0, d, 1.0), 0.0)
    lhs = np.abs(first - eta_radial(-1.0, ns))
    rhs = 2.0 * eta_radial(2.0, nsp) * eta_radial(-2.0, ns)
    return lhs, rhs


def _random_directions(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def two_point_samples(samples, seed=0):
    """Mixed-scale pairs plus adversarial families near the tight configurations."""
    rng = np.random.default_rng(seed)
    m = samples // 2
    s = _random_directions(rng, m) * np.exp(rng.uniform(math.log(1e-3), math.log(1e3), m))[:, None]
    sp = _random_directions(rng, m) * np.exp(rng.uniform(math.log(1e-3), math.log(1e3), m))[:, None]
    # adversarial: s' near the unit sphere, s parallel with |s - s'| near 1
    a = samples - m
    u = _random_directions(rng, a)
    nsp = rng.uniform(0.0, 2.0, a)
    gap = 1.0 + rng.normal(scale=1e-3, size=a) * (rng.random(a) < 0.5) + rng.uniform(-1, 1, a) * (rng.random(a) < 0.5)
    s2 = u * (nsp + gap)[:, None]
    sp2 = u * nsp[:, None]
    return np.concatenate([s, s2]), np.concatenate([sp, sp2])


def verify_two_point_inequality(samples=100000, seed=0, rel_tol=1e-12):
    s, sp = two_point_samples(samples, seed)
    lhs, rhs = two_point_sides(s, sp)
    viol = (lhs - rhs) / rhs
    ns = np.linalg.norm(s, axis=1)
    nsp = np.linalg.norm(sp, axis=1)
    return _report("two_point", {"samples": samples, "seed": seed}, viol, (ns, nsp), rel_tol)


# ---------------------------------------------------------------------------
# operator norms (Nystrom on composite Gauss-Legendre panels in t = ln r)


_GL_NODES, _GL_WEIGHTS = roots_legendre(8)


def decay_radius(A, k, r0, target=OUTPUT_DECAY):
    """Smallest r with int_{r0}^r sqrt(A eta_{-1} + k^2) >= target (s-wave)."""
    r = max(r0, 1e-300)
    acc = 0.0
    while acc < target:
        q = (A if r <= 1 else A / r) + k * k
        h = min(0.05 * r + 0.01, 0.5 / math.sqrt(q))
        acc += math.sqrt(q) * h
        r += h
    return r


def panel_nodes(A, k, r_lo, r_hi, max_width=0.2, npts=None):
    """Quadrature nodes and weights (in dr) on [r_lo, r_hi] via panels in ln r."""
    if npts is not None and npts != len(_GL_NODES):
        x, w = roots_legendre(npts)
    else:
        x, w = _GL_NODES, _GL_WEIGHTS
    edges = [math.log(r_lo)]
    t_hi = math.log(r_hi)
    while edges[-1] < t_hi:
        t0 = edges[-1]
        r1 = math.exp(min(t0 + max_width, t_hi))
        rq = math.sqrt(A * r1 + k * k * r1 * r1) if r1 > 1 else r1 * math.sqrt(A + k * k)
        width = min(max_width, 2.0 / max(rq, 1e-300))
        edges.append(min(t0 + width, t_hi))
    edges = np.array(edges)
    a, b = edges[:-1, None], edges[1:, None]
    t = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    wt = 0.5 * (b - a) * w[None, :]
    r = np.exp(t).ravel()
    return r, (wt.ravel() * r)


def _largest_sv(M):
    if min(M.shape) <= 600:
        return float(np.linalg.norm(M, 2))
    from scipy.sparse.linalg import svds

    return float(svds(M, k=1, return_singular_vectors=False, random_state=0)[0])


def channel_norm(ch: RadialChannel, r_in, w_in, r_out, w_out, weight=None):
    """Largest singular value of sqrt(w_out) g(r_out, r_in) m(r_in) sqrt(w_in)."""
    G = ch.g(r_out[:, None], r_in[None, :])
    m = 1.0 if weight is None else weight[None, :]
    M = np.sqrt(w_out)[:, None] * G * m * np.sqrt(w_in)[None, :]
    return _largest_sv(M)


@dataclass
class NormResult:
    value: float
    channel_norms: list
    l_max: int


def op_norm_chi(A, k, n, l_max=3, out_radius=None, max_width=0.2):
    """||G chi_n|| (or ||chi_R G chi_n|| with ``out_radius`` = R).

    The operator commutes with rotations, so the norm is the largest over
    channels; channel norms must decrease in l up to ``l_max`` (positive,
    pointwise ordered kernels), which is checked and otherwise raises.
    """
    if not (A > 0 and k > 0 and n > 0):
        raise InvalidInput("need A, k, n > 0")
    r_out_max = decay_radius(A, k, n) if out_radius is None else out_radius
    r_max = max(default_r_max(k, n), r_out_max)
    r_in, w_in = panel_nodes(A, k, R_MIN, n, max_width)
    r_out, w_out = panel_nodes(A, k, R_MIN, r_out_max, max_width)
    norms = []
    for l in range(l_max + 1):
        ch = _solve_cached(float(A), float(k), l, R_MIN, float(r_max), H_MAX)
        norms.append(channel_norm(ch, r_in, w_in, r_out, w_out))
    if any(b > a * (1 + 1e-9) for a, b in zip(norms, norms[1:])):
        raise LmaxInsufficient(f"channel norms not decreasing up to l={l_max}: {norms}")
    return NormResult(max(norms), norms, l_max)


def eta_series(alpha):
    """1 + sum_{n>=2} n^2 (n-1)^{-2 alpha} = 1 + zeta(2a-2) + 2 zeta(2a-1) + zeta(2a)."""
    if not alpha > 1.5:
        raise InvalidInput("alpha must exceed 3/2")
    return 1.0 + zeta(2 * alpha - 2) + 2 * zeta(2 * alpha - 1) + zeta(2 * alpha)


def b_hat(A, k, n_max=32, max_width=0.2):
    """max_{1 <= n <= n_max} ||G chi_n|| / n (s-wave, the dominant channel)."""
    r_out_max = decay_radius(A, k, n_max)
    r_max = max(default_r_max(k, n_max), r_out_max)
    ch = _solve_cached(float(A), float(k), 0, R_MIN, float(r_max), H_MAX)
    best = 0.0
    per_n = []
    for n in range(1, n_max + 1):
        r_in, w_in = panel_nodes(A, k, R_MIN, n, max_width)
        r_out, w_out = panel_nodes(A, k, R_MIN, decay_radius(A, k, n), max_width)
        v = channel_norm(ch, r_in, w_in, r_out, w_out) / n
        per_n.append(v)
        best = max(best, v)
    return best, per_n


def op_norm_eta(A, k, alpha, rel_tail=1e-3, l_max=2, max_width=0.2, r_in=None):
    """||G eta_{-alpha}|| with inputs truncated at R_in; returns (norm, tail bound, R_in).

    The discarded inputs |r'| > R_in contribute at most ||G|| R_in^{-alpha}
    <= R_in^{-alpha} / k^2.
    """
    if r_in is None:
        r_in = max(8.0, (1.0 / (rel_tail * k * k)) ** (1.0 / alpha))
    r_out_max = decay_radius(A, k, r_in)
    r_max = max(default_r_max(k), r_out_max)
    ri, wi = panel_nodes(A, k, R_MIN, r_in, max_width)
    ro, wo = panel_nodes(A, k, R_MIN, r_out_max, max_width)
    weight = eta_radial(-alpha, ri)
    norms = []
    for l in range(l_max + 1):
        ch = _solve_cached(float(A), float(k), l, R_MIN, float(r_max), H_MAX)
        norms.append(channel_norm(ch, ri, wi, ro, wo, weight))
    if any(b > a * (1 + 1e-9) for a, b in zip(norms, norms[1:])):
        raise LmaxInsufficient(f"channel norms not decreasing: {norms}")
    tail = r_in ** (-alpha) / (k * k)
    return max(norms), tail, r_in


def verify_eta_corollary(A, alpha, k_list=(0.01, 0.1, 1.0), n_max=32):
    """||G eta_{-alpha}|| + tail <= b_hat(A) sqrt(series) uniformly over ``k_list``.

    b_hat is measured at the smallest k, where the norms are largest.
    """
    series = eta_series(alpha)
    bh, _ = b_hat(A, min(k_list), n_max)
    bound = bh * math.sqrt(series)
    measured = []
    for k in k_list:
        v, tail, R = op_norm_eta(A, k, alpha)
        measured.append((k, v, tail, R))
    viol = np.array([(v + tail - bound) / bound for _, v, tail, _ in measured])
    ks = np.array([m[0] for m in measured])
    extra = {"b_hat": bh, "series": series, "bound": bound,
             "norms": {repr(k): v for k, v, _, _ in measured},
             "tails": {repr(k): t for k, _, t, _ in measured}}
    return _report("eta_corollary", {"A": A, "alpha": alpha, "k_list": list(k_list),
                                     "n_max": n_max}, viol, (ks,), 0.0, extra)
