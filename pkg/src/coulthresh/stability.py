"""Stability classification in the (q1, q2) plane and critical charges.

Variational energies are upper bounds, so a point can be *certified* stable
(E0 below threshold by more than the numerical margin) but never certified
unstable.  Instability is only asserted through the closed-form criterion on
the q2 = 1 edge (and on the q1 = 1 edge after relabelling 1 <-> 2).

Points in the lower sector, where the {13} + 2 threshold is lowest, are solved
in the relabelled frame so that the Jacobi coordinates always follow the
threshold cluster.  For m1 = m2 this makes the diagram exactly mirror
symmetric.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import cg_engine as cg
from .kinematics import (InvalidInput, JacobiFrame, equal_threshold_q1, sector,
                         threshold_energy)

EPS_NUM = 1e-6
EDGE_TOL = 1e-12


class State(str, Enum):
    CERTIFIED_STABLE = "CertifiedStable"
    CRITERION_UNSTABLE = "CriterionUnstable"
    UNDECIDED = "Undecided"


class ConsistencyError(AssertionError):
    """A point was certified stable where the instability criterion fires."""


class BudgetInsufficient(RuntimeError):
    """The starting bracket shows no sign change at the given basis budget."""


@dataclass(frozen=True)
class Budget:
    size: int = 24
    trials: int = 20
    seed: int = 0
    refine: int = 1
    eps_num: float = EPS_NUM

    def __post_init__(self):
        if self.size < 1 or self.trials < 1:
            raise InvalidInput("basis size and trials must be positive")
        if not self.eps_num > 0:
            raise InvalidInput("eps_num must be positive")


@dataclass(frozen=True)
class StabilityVerdict:
    q1: float
    q2: float
    state: State
    margin: float
    E0: float
    E_thr: float
    basis_size: int
    channel: str = ""


@dataclass(frozen=True)
class BorderPoint:
    sector: str
    fixed: float  # the charge held fixed along the ray
    lo: float  # scanned charge, not certified
    hi: float  # scanned charge, certified stable
    margin_lo: float
    margin_hi: float

    def point(self, which="hi"):
        """(q1, q2) of the bracket end ``which`` in the original labelling."""
        v = self.hi if which == "hi" else self.lo
        return (v, self.fixed) if self.sector == "upper" else (self.fixed, v)


@dataclass(frozen=True)
class NoBorderOnRay:
    sector: str
    fixed: float
    interval: tuple
    states: tuple  # states at the two interval ends


@dataclass
class StabilityDiagram:
    masses: tuple
    points: list
    borders: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# closed-form criterion


def _criterion_terms(frame: JacobiFrame, q1):
    mu, mu23 = frame.mu, frame.mu23
    first = q1 * q1 < 3.0 * mu23 / (16.0 * mu)
    if not first:
        return False, math.inf
    root = 4.0 * q1 * math.sqrt(mu)
    second = 6.0 * mu / mu23 * q1 * (1.0 + root / (math.sqrt(3.0 * mu23) - root))
    return True, second


def instability_criterion(frame: JacobiFrame, q1):
    """Both closed-form inequalities for H(q1, 1); q1 = 0 is reported as False."""
    if q1 < 0:
        raise InvalidInput("q1 must be non-negative")
    if q1 == 0:
        return False
    first, second = _criterion_terms(frame, q1)
    return first and second < 1.0


def criterion_sup(frame: JacobiFrame, tol=1e-14):
    """Supremum of q1 for which the criterion fires, by bisection.

    The second inequality is increasing in q1 wherever the first holds, so
    the firing set is an interval (0, sup).
    """
    lo, hi = 0.0, math.sqrt(3.0 * frame.mu23 / (16.0 * frame.mu))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid > 0 and instability_criterion(frame, mid):
            lo = mid
        else:
            hi = mid
    return lo


def criterion_fires(frame: JacobiFrame, q1, q2):
    """Criterion on the q2 = 1 edge, or on the q1 = 1 edge with 1 <-> 2 swapped."""
    if abs(q2 - 1.0) <= EDGE_TOL and instability_criterion(frame, q1):
        return True
    if abs(q1 - 1.0) <= EDGE_TOL and instability_criterion(frame.swapped(), q2):
        return True
    return False


# ---------------------------------------------------------------------------
# classification


def point_seed(seed, *values):
    """Seed sequence derived from a base seed and exact float bit patterns."""
    bits = [int(np.float64(v).view(np.uint64)) for v in values]
    words = []
    for b in bits:
        words += [b & 0xFFFFFFFF, b >> 32]
    return np.random.SeedSequence([int(seed)] + words)


def role_frame(frame: JacobiFrame, q1, q2):
    """(frame, a, b) with the threshold cluster always labelled {23}."""
    if sector(frame, q1, q2) == "lower":
        return frame.swapped(), q2, q1
    return frame, q1, q2


def solve_point(frame: JacobiFrame, q1, q2, budget: Budget):
    fr, a, b = role_frame(frame, q1, q2)
    spec = cg.three_body(fr, a, b)
    basis = cg.optimize_basis(spec, budget.size, budget.trials,
                              seed=point_seed(budget.seed, a, b),
                              refine_sweeps=budget.refine)
    return spec, basis, cg.ground_state(spec, basis)


def classify(frame: JacobiFrame, q1, q2, budget: Budget = Budget()):
    if q1 < 0 or q2 < 0:
        raise InvalidInput("charges must be non-negative")
    E_thr, channel = threshold_energy(frame, q1, q2)
    fires = criterion_fires(frame, q1, q2)
    if q1 == 0 and q2 == 0:
        # no attraction at all: nothing to bind, nothing to solve
        return StabilityVerdict(q1, q2, State.UNDECIDED, -math.inf, math.inf, E_thr, 0, channel)
    _, basis, res = solve_point(frame, q1, q2, budget)
    margin = E_thr - res.E0
    certified = margin > budget.eps_num + res.rounding_bound
    if certified and fires:
        raise ConsistencyError(f"certified stable at ({q1}, {q2}) where the criterion fires")
    if certified:
        state = State.CERTIFIED_STABLE
    elif fires:
        state = State.CRITERION_UNSTABLE
    else:
        state = State.UNDECIDED
    return StabilityVerdict(float(q1), float(q2), state, float(margin), float(res.E0),
                            float(E_thr), len(basis), channel)


def _classify_job(args):
    masses, q1, q2, budget = args
    from .kinematics import frame_from_masses

    return classify(frame_from_masses(*masses), q1, q2, budget)


def parallel_map(fn, items, jobs=1):
    """Order-stable map, in a process pool when ``jobs`` > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def scan(frame: JacobiFrame, q1_values, q2_values, budget: Budget = Budget(), jobs=1):
    """Classify every grid point (q2 outer loop, q1 inner loop)."""
    pts = [(frame.masses, float(a), float(b), budget) for b in q2_values for a in q1_values]
    verdicts = parallel_map(_classify_job, pts, jobs)
    meta = {"basis_size": budget.size, "trials": budget.trials, "seed": budget.seed,
            "refine": budget.refine, "eps_num": budget.eps_num}
    return StabilityDiagram(tuple(frame.masses), verdicts, {}, meta)


# ---------------------------------------------------------------------------
# border tracing


def _trace_ray(frame, fixed, interval, budget, resolution):
    """Upper-sector ray at q2 = fixed scanning q1 over ``interval``."""
    lo, hi = interval

    def certified(q):
        v = classify(frame, q, fixed, budget)
        return v.state is State.CERTIFIED_STABLE, v

    c_lo, v_lo = certified(lo)
    c_hi, v_hi = certified(hi)
    if c_lo or not c_hi:
        return NoBorderOnRay("upper", fixed, (lo, hi), (v_lo.state.value, v_hi.state.value))
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        c, v = certified(mid)
        if c:
            hi, v_hi = mid, v
        else:
            lo, v_lo = mid, v
    return BorderPoint("upper", fixed, lo, hi, v_lo.margin, v_hi.margin)


def _ray_job(args):
    masses, fixed, interval, budget, resolution = args
    from .kinematics import frame_from_masses

    return _trace_ray(frame_from_masses(*masses), fixed, interval, budget, resolution)


def trace_border(frame: JacobiFrame, sector_name, budget: Budget = Budget(), resolution=0.01,
                 rays=(1.0, 1.25, 1.5), interval=None, jobs=1):
    """Bisect the certified-stable boundary along rays of one sector.

    Upper sector: q2 fixed at each ray value, q1 scanned from 0 up to the
    equal-threshold line (or over ``interval``).  Lower sector: the mirror
    image with q1 fixed and q2 scanned, computed in the relabelled frame.

    The stable end of every bracket is certified, so the traced border is an
    inner approximation of the stable region.  Rays whose ends do not show
    a not-certified -> certified change yield ``NoBorderOnRay``.
    """
    if sector_name not in ("upper", "lower"):
        raise InvalidInput("sector must be 'upper' or 'lower'")
    if resolution <= 0:
        raise InvalidInput("resolution must be positive")
    fr = frame if sector_name == "upper" else frame.swapped()
    jobs_in = []
    for fixed in rays:
        iv = interval if interval is not None else (0.0, equal_threshold_q1(fr, fixed))
        jobs_in.append((fr.masses, float(fixed), tuple(map(float, iv)), budget, resolution))
    out = parallel_map(_ray_job, jobs_in, jobs)
    if sector_name == "lower":
        out = [_relabel(p) for p in out]
    return out


def _relabel(p):
    if isinstance(p, BorderPoint):
        return BorderPoint("lower", p.fixed, p.lo, p.hi, p.margin_lo, p.margin_hi)
    return NoBorderOnRay("lower", p.fixed, p.interval, p.states)


# ---------------------------------------------------------------------------
# critical charge of two-electron atoms


@dataclass
class CriticalChargeResult:
    bracket: tuple
    M: float
    budget: Budget
    iterations: list  # (Z, E0, E_thr, stable, residual)


def atomic_point(Z, M, budget: Budget, initial: cg.GaussianBasis | None = None):
    """Ground state at nuclear charge Z; with ``initial`` also a warm-started run.

    The warm start refines ``initial`` (typically the basis of a nearby bound
    charge, rescaled) and the lower of the two variational energies is kept.
    """
    spec = cg.atomic(Z, M)
    basis = cg.optimize_basis(spec, budget.size, budget.trials,
                              seed=point_seed(budget.seed, Z, M),
                              refine_sweeps=budget.refine)
    res = cg.ground_state(spec, basis)
    if initial is not None:
        warm = cg.optimize_basis(spec, budget.size, budget.trials,
                                 seed=point_seed(budget.seed, Z, M, 1.0),
                                 refine_sweeps=budget.refine, initial=initial)
        r2 = cg.ground_state(spec, warm)
        if r2.E0 < res.E0:
            basis, res = warm, r2
    return spec, basis, res


def critical_charge_atomic(Ne=2, M=math.inf, budget: Budget = Budget(size=50, trials=40),
                           tol=5e-3, bracket=(0.5, 1.0)):
    """Bisection on the sign of E(Z, 2) - E_thr(Z), E_thr = -M/(M+1) Z^2 / 2.

    Z counts as bound when E(Z, 2) < E_thr - eps_num.  Every evaluation after
    the first also warm-starts from the basis of the nearest bound charge,
    widths rescaled by (Z / Z_bound)^2, since the near-threshold state is
    hard to find from scratch.  Returns the final bracket (unbound, bound)
    and the per-iteration energies.
    """
    if Ne != 2:
        raise InvalidInput("only two-electron atoms are supported")
    if not tol > 0:
        raise InvalidInput("tol must be positive")
    if not M > 0:
        raise InvalidInput("M must be positive")
    iters = []
    anchor = None  # (Z, basis) of the bound charge closest to the bracket

    def bound(Z):
        nonlocal anchor
        init = None if anchor is None else anchor[1].scaled((Z / anchor[0]) ** 2)
        spec, basis, res = atomic_point(Z, M, budget, init)
        ok = res.E0 < spec.threshold - budget.eps_num - res.rounding_bound
        iters.append((float(Z), res.E0, spec.threshold, bool(ok), res.residual))
        if ok:
            anchor = (Z, basis)
        return ok

    lo, hi = map(float, bracket)
    if not bound(hi) or bound(lo):
        raise BudgetInsufficient(f"no sign change on [{lo}, {hi}] at basis {budget.size}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bound(mid):
            hi = mid
        else:
            lo = mid
    return CriticalChargeResult((lo, hi), M, budget, iters)


# ---------------------------------------------------------------------------
# output


CSV_COLUMNS = ("q1", "q2", "state", "margin", "E0", "E_thr", "basis_size")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def diagram_csv(diagram: StabilityDiagram):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for v in diagram.points:
        w.writerow([_fmt(v.q1), _fmt(v.q2), v.state.value, _fmt(v.margin), _fmt(v.E0),
                    _fmt(v.E_thr), v.basis_size])
    return buf.getvalue()


def border_records(points):
    out = []
    for p in points:
        d = asdict(p)
        d["kind"] = "border" if isinstance(p, BorderPoint) else "no-border-on-ray"
        out.append(d)
    return out
