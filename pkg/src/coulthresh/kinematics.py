"""Masses, charges and Jacobi frames for three charges {q1, q2, -1}.

Coordinates are xi = r3 - r2 and R = r1 - r2 - s*xi with s = m3/(m2 + m3), so
that R points from the centre of mass of the (23) pair to particle 1.  In these
coordinates the kinetic energy is diagonal,

    T = -1/(2 mu23) Lap_xi - 1/(2 mu) Lap_R,

and every pair separation is a linear form w^T (xi, R).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TIE_TOL = 1e-12


class InvalidInput(ValueError):
    """Raised for physically meaningless parameters (non-positive masses, ...)."""


@dataclass(frozen=True)
class MassCharge:
    m1: float
    m2: float
    m3: float
    q1: float = 1.0
    q2: float = 1.0

    def __post_init__(self):
        for name in ("m1", "m2", "m3"):
            m = getattr(self, name)
            if not (m > 0) or math.isnan(m):
                raise InvalidInput(f"{name} must be positive, got {m!r}")
        if self.q1 < 0 or self.q2 < 0:
            raise InvalidInput("charges q1, q2 must be non-negative")

    @property
    def masses(self):
        return (self.m1, self.m2, self.m3)


@dataclass(frozen=True)
class PairTerm:
    """Pair (i, j) with separation w^T (xi, R) and charge product of the pair."""

    pair: str
    w: tuple
    charge_product: float


@dataclass(frozen=True)
class JacobiFrame:
    masses: tuple
    s: float
    mu23: float
    mu13: float
    mu: float
    kinetic: np.ndarray
    pairs: tuple

    def pair(self, name):
        for p in self.pairs:
            if p.pair == name:
                return p
        raise KeyError(name)

    def swapped(self):
        """Frame with particles 1 and 2 relabelled (masses (m2, m1, m3))."""
        m1, m2, m3 = self.masses
        return build_frame(MassCharge(m2, m1, m3))


def _normalize_sign(w):
    w = np.asarray(w, dtype=float)
    nz = np.flatnonzero(w)
    if nz.size and w[nz[0]] < 0:
        w = -w
    return tuple(float(v) + 0.0 for v in w)


def build_frame(mc: MassCharge) -> JacobiFrame:
    m1, m2, m3 = mc.masses
    s = m3 / (m2 + m3)
    mu23 = m2 * m3 / (m2 + m3)
    mu13 = m1 * m3 / (m1 + m3)
    mu = m1 * (m2 + m3) / (m1 + m2 + m3)
    kinetic = np.diag([1.0 / (2.0 * mu23), 1.0 / (2.0 * mu)])
    kinetic.setflags(write=False)
    q1, q2 = mc.q1, mc.q2
    pairs = (
        PairTerm("23", _normalize_sign((1.0, 0.0)), -q2),
        PairTerm("13", _normalize_sign((-(1.0 - s), 1.0)), -q1),
        PairTerm("12", _normalize_sign((s, 1.0)), q1 * q2),
    )
    return JacobiFrame((m1, m2, m3), s, mu23, mu13, mu, kinetic, pairs)


def frame_from_masses(m1, m2, m3) -> JacobiFrame:
    return build_frame(MassCharge(m1, m2, m3))


def eta_radial(alpha, rho):
    """eta_alpha as a function of |r|: 1 inside the unit ball, |r|**alpha outside."""
    rho = np.asarray(rho, dtype=float)
    out = np.ones_like(rho)
    outer = rho > 1.0
    out[outer] = rho[outer] ** alpha
    return out if out.ndim else float(out)


def eta(alpha, r):
    """eta_alpha(r) for a vector r (last axis holds the components)."""
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        return eta_radial(alpha, abs(r))
    return eta_radial(alpha, np.linalg.norm(r, axis=-1))


def threshold_energy(frame: JacobiFrame, q1, q2):
    """Lowest two-body (hydrogenic) threshold and the channel that attains it.

    Returns ``(energy, channel)`` with channel one of ``"23"``, ``"13"``,
    ``"tie"`` or ``"none"``.
    """
    if q1 < 0 or q2 < 0:
        raise InvalidInput("charges must be non-negative")
    b23 = frame.mu23 * q2 * q2
    b13 = frame.mu13 * q1 * q1
    if b23 == 0.0 and b13 == 0.0:
        return 0.0, "none"
    if abs(b23 - b13) <= TIE_TOL * max(b23, b13):
        channel = "tie"
    else:
        channel = "23" if b23 > b13 else "13"
    return -0.5 * max(b23, b13), channel


def equal_threshold_q2(frame: JacobiFrame, q1):
    if q1 < 0:
        raise InvalidInput("q1 must be non-negative")
    return q1 * math.sqrt(frame.mu13 / frame.mu23)


def equal_threshold_q1(frame: JacobiFrame, q2):
    return q2 * math.sqrt(frame.mu23 / frame.mu13)


def sector(frame: JacobiFrame, q1, q2):
    """``"upper"`` when the {23}+1 threshold is lowest, ``"lower"`` for {13}+2."""
    _, channel = threshold_energy(frame, q1, q2)
    if channel == "13":
        return "lower"
    if channel == "tie":
        return "line"
    return "upper"


def pair_separations(frame: JacobiFrame, xi, R):
    """Pair vectors (r3 - r2, r1 - r3, r1 - r2) from Jacobi vectors, unnormalized signs."""
    s = frame.s
    xi = np.asarray(xi, dtype=float)
    R = np.asarray(R, dtype=float)
    return xi, R - (1.0 - s) * xi, R + s * xi
