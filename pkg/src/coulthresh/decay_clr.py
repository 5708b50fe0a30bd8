"""Exponential decay moments of bound states and bound-state counting.

Moment bounds: for an N_e-electron state below the (N_e - 1)-electron
threshold by a gap |de|,

    (psi, |r|^n psi) <= (C N_e)^n n!,
    C = Z / (2 |de|) + sqrt(Z^2 + 2 |de|) / (2 |de|),

with |r| = sum_i |r_i|.  Hence ||exp(beta |r|) psi||^2 <= 2 for
beta = 1 / (4 C N_e).  Moments of correlated-Gaussian states are evaluated
through the multinomial expansion of (|r_1| + |r_2|)^n.

Counting: the number of negative eigenvalues of -Lap - 2T chi_{|x| <= R} in
three dimensions, exactly by partial waves, and the CLR-type upper bound.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb, gammaln, spherical_jn

from . import _cg_kernels
from . import cg_engine as cg
from .kinematics import InvalidInput

LIEB_CLR_3 = 0.1156  # Lieb's constant: N <= L_3 int |V_-|^{3/2} in three dimensions
C3_DEFAULT = LIEB_CLR_3 * 4.0 * math.pi / 3.0  # unit-ball volume folded in


class LemmaInapplicable(ValueError):
    """The state is not below threshold by the requested gap."""


class OutOfScope(ValueError):
    """Dimension below three."""


# ---------------------------------------------------------------------------
# constants


def ahlrichs_constant(Z, gap):
    if not gap > 0:
        raise InvalidInput("gap must be positive")
    if Z < 0:
        raise InvalidInput("Z must be non-negative")
    return Z / (2.0 * gap) + math.sqrt(Z * Z + 2.0 * gap) / (2.0 * gap)


def moment_ratio_bound(Z, gap, n):
    """Upper bound on (psi, |r_1|^{n+1} psi) / (psi, |r_1|^n psi)."""
    if not gap > 0:
        raise InvalidInput("gap must be positive")
    if n < 0:
        raise InvalidInput("n must be non-negative")
    return (Z + math.sqrt(Z * Z + 0.5 * gap * (n + 2) ** 2)) / (2.0 * gap)


@dataclass(frozen=True)
class DecayBudget:
    Z: float
    gap: float
    Ne: int = 2
    threshold: float | None = None

    def __post_init__(self):
        if not self.gap > 0:
            raise InvalidInput("gap must be positive")
        if self.Ne < 1:
            raise InvalidInput("Ne must be >= 1")

    @property
    def C(self):
        return ahlrichs_constant(self.Z, self.gap)

    @property
    def beta(self):
        return 1.0 / (4.0 * self.C * self.Ne)


def budget_from_state(Z, E0, E_thr, Ne=2, shrink=1e-9):
    """Budget with the measured gap E_thr - E0, shrunk so the strict premise holds."""
    gap = (E_thr - E0) * (1.0 - shrink)
    if not gap > 0:
        raise LemmaInapplicable("state is not below threshold")
    return DecayBudget(Z, gap, Ne, E_thr)


# ---------------------------------------------------------------------------
# Gaussian moments


def single_gaussian_moment(b, n):
    """int |x|^n exp(-b x^2 / 2) d^3x = 2 pi Gamma((n+3)/2) (2/b)^{(n+3)/2}."""
    return 2.0 * math.pi * math.exp(gammaln(0.5 * (n + 3)) + 0.5 * (n + 3) * math.log(2.0 / b))


def _density_pairs(spec: cg.SystemSpec, basis: cg.GaussianBasis, c):
    """Width sums B and weights for rho = |psi|^2 written as sum_p w_p exp(-x^T B_p x / 2)."""
    A = basis.widths
    n = len(basis)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    w = c[i] * c[j]
    B = A[i] + A[j]
    if spec.exchange is None:
        return B, w
    P = spec.exchange
    AjP = np.einsum("ba,pbc,cd->pad", P, A[j], P)
    return np.concatenate([B, A[i] + AjP]), np.concatenate([0.5 * w, 0.5 * w])


def state_moments(spec: cg.SystemSpec, basis: cg.GaussianBasis, c, n_max, impl=None):
    """(psi, |r|^n psi) for n = 0..n_max with |r| = sum of coordinate norms.

    Returns ``(moments, abs_error)`` where the error estimate reflects the
    cancellation in the signed sum over basis pairs.
    """
    B, w = _density_pairs(spec, basis, np.asarray(c, float))
    d = spec.n_vec
    if d == 1:
        b = B[:, 0, 0]
        per = np.array([[single_gaussian_moment(bb, k) for k in range(n_max + 1)] for bb in b])
        mom = w @ per
        err = np.abs(w) @ per
    elif d == 2:
        M = _cg_kernels.pair_moments(B, n_max, impl=impl)  # (P, k, m)
        mom = np.zeros(n_max + 1)
        err = np.zeros(n_max + 1)
        for n in range(n_max + 1):
            k = np.arange(n + 1)
            binom = comb(n, k)
            per = (M[:, k, n - k] * binom).sum(axis=1)
            mom[n] = w @ per
            err[n] = np.abs(w) @ per
    else:
        raise InvalidInput("moments implemented for one or two coordinates")
    return mom, 64 * np.finfo(float).eps * err


@dataclass
class MomentReport:
    n: list
    measured: list
    bound: list
    ratio: list
    series: float
    series_tail: float
    moments_pass: bool
    series_pass: bool
    budget: DecayBudget = None
    errors: list = field(default_factory=list)

    @property
    def passed(self):
        return self.moments_pass and self.series_pass

    def to_dict(self):
        return {"n": list(self.n), "measured": [float(x) for x in self.measured],
                "bound": [float(x) for x in self.bound], "ratio": [float(x) for x in self.ratio],
                "series": self.series, "series_tail": self.series_tail,
                "moments_pass": self.moments_pass, "series_pass": self.series_pass,
                "Z": self.budget.Z, "gap": self.budget.gap, "Ne": self.budget.Ne,
                "C": self.budget.C, "beta": self.budget.beta}

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "moment", "bound"])
        for n, m, b in zip(self.n, self.measured, self.bound):
            wr.writerow([n, repr(float(m)), repr(float(b))])
        return buf.getvalue()


def verify_decay(spec: cg.SystemSpec, basis: cg.GaussianBasis, result: cg.SpectralResult,
                 budget: DecayBudget, n_max=10):
    """Check the moment bounds for n = 1..n_max and the exponential-norm series.

    The series sum_n (2 beta)^n / n! (psi, |r|^n psi) is summed to n_max and
    its remainder bounded with the per-n bound: (2 beta C N_e)^n = 2^-n, so
    the tail is at most 2^-n_max.
    """
    E_thr = budget.threshold if budget.threshold is not None else spec.threshold
    if E_thr is None:
        raise InvalidInput("threshold energy required")
    if not result.E0 < E_thr - budget.gap:
        raise LemmaInapplicable(f"E0 = {result.E0} is not below E_thr - gap = {E_thr - budget.gap}")
    mom, err = state_moments(spec, basis, result.coefficients, n_max)
    norm = mom[0]
    mom = mom / norm
    err = err / norm
    CN = budget.C * budget.Ne
    ns = np.arange(n_max + 1)
    logb = ns * math.log(CN) + gammaln(ns + 1)
    bound = np.exp(logb)
    ratio = mom / bound
    ok = bool(np.all(mom[1:] + err[1:] <= bound[1:]))
    two_beta = 2.0 * budget.beta
    terms = np.exp(ns * math.log(two_beta) - gammaln(ns + 1)) * mom
    tail = 2.0 ** (-n_max)
    series = float(terms.sum())
    return MomentReport(list(map(int, ns)), list(mom), list(bound), list(ratio), series, tail,
                        ok, series + tail <= 2.0, budget, list(err))


# ---------------------------------------------------------------------------
# counting


def clr_count_bound(T, A_w, beta, d=3, n_s=1, C_d=C3_DEFAULT, conservative=False):
    """C_d (2T)^{d/2} |ln 2A_w|^d / (2 beta)^d n_s.

    With ``conservative`` the localization radius ln(2 A_w^2)/(2 beta) replaces
    ln(2 A_w)/(2 beta), i.e. the radius that actually holds half the mass.
    """
    if d < 3:
        raise OutOfScope("the counting bound needs d >= 3")
    if not (T > 0 and A_w > 0 and beta > 0):
        raise InvalidInput("T, A_w and beta must be positive")
    L = abs(math.log(2.0 * A_w * A_w)) if conservative else abs(math.log(2.0 * A_w))
    return C_d * (2.0 * T) ** (0.5 * d) * L ** d / (2.0 * beta) ** d * n_s


def localization_radius(A_w, beta, conservative=True):
    """Radius beyond which A_w^2 exp(-2 beta R) leaves at most half the mass."""
    return math.log(2.0 * A_w * A_w if conservative else 2.0 * A_w) / (2.0 * beta)


def amplitude_for_radius(R, beta):
    """Inverse of the conservative localization radius: A_w with ln(2 A_w^2) = 2 beta R."""
    return math.sqrt(0.5 * math.exp(2.0 * beta * R))


def _zeros_below(l, x):
    """Number of zeros of j_l in (0, x); sampling below half the zero spacing."""
    if x <= 0:
        return 0
    pts = np.arange(0.0, x, 0.25 * math.pi)[1:]
    pts = np.append(pts, x)
    v = spherical_jn(l, pts)
    v = v[v != 0.0]
    # the first sample (pi/4) lies below every first zero, where j_l > 0
    return int(np.count_nonzero(np.signbit(v[1:]) != np.signbit(v[:-1])))


def channel_count(l, x):
    """Negative-energy states in channel l for the well strength x = sqrt(2T) R."""
    zeros = _zeros_below(l, x)
    if l == 0:
        outside = math.cos(x) * math.sin(x) < 0
    else:
        outside = spherical_jn(l - 1, x) * spherical_jn(l, x) < 0
    return zeros + int(outside)


def square_well_count(T, R):
    """Number of negative eigenvalues of -Lap - 2T chi_{|x| <= R} in R^3."""
    if not (T > 0 and R > 0):
        raise InvalidInput("T and R must be positive")
    x = math.sqrt(2.0 * T) * R
    total = 0
    for l in range(int(x) + 3):
        total += (2 * l + 1) * channel_count(l, x)
    return total


def verify_clr_grid(T_values, R_values, beta=1.0, C_d=C3_DEFAULT):
    """Square-well count against the CLR bound over a (T, R) grid.

    R is read as the conservative localization radius, so the amplitude fed
    to the bound is amplitude_for_radius(R, beta).
    """
    from .greens import _report

    T, R = np.meshgrid(np.asarray(T_values, float), np.asarray(R_values, float), indexing="ij")
    T, R = T.ravel(), R.ravel()
    counts = np.array([square_well_count(t, r) for t, r in zip(T, R)])
    bounds = np.array([clr_count_bound(t, amplitude_for_radius(r, beta), beta, C_d=C_d,
                                       conservative=True) for t, r in zip(T, R)])
    below = 2 * T * R * R < (math.pi / 2) ** 2
    viol = counts - bounds
    rep = _report("clr_count", {"beta": beta, "C_d": C_d, "grid": [len(T_values), len(R_values)]},
                  viol, (T, R), 0.0,
                  {"zero_below_threshold": bool(np.all(counts[below] == 0)),
                   "max_count": int(counts.max()), "points_below_threshold": int(below.sum())})
    rep.passed = rep.passed and rep.extra["zero_below_threshold"]
    return rep


def verify_moment_ratio(Z_values, gap_values, n_max=40):
    """moment_ratio_bound(Z, gap, n) / (n + 1) <= C over a sweep."""
    from .greens import _report

    rows = [(Z, g, n) for Z in Z_values for g in gap_values for n in range(n_max + 1)]
    Z, g, n = (np.array(x, float) for x in zip(*rows))
    lhs = np.array([moment_ratio_bound(a, b, int(c)) / (c + 1) for a, b, c in rows])
    C = np.array([ahlrichs_constant(a, b) for a, b, _ in rows])
    return _report("moment_ratio", {"n_max": n_max, "points": len(rows)}, (lhs - C) / C,
                   (Z, g, n), 1e-14)
