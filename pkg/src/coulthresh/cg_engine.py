"""Variational ground states in a correlated-Gaussian basis.

A trial function is phi_A(x) = exp(-x^T A x / 2) where x stacks ``n_vec``
three-vectors and A is a symmetric positive-definite n_vec x n_vec matrix.
The Hamiltonian is

    H = -grad^T Lam grad + sum_k g_k / |w_k^T x|

with all matrix elements in closed form (see ``_cg_kernels``).  When an
exchange permutation P is supplied, trial functions are replaced by their
symmetric projection (phi_A + phi_{P^T A P}) / 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _cg_kernels
from .kinematics import InvalidInput, JacobiFrame, threshold_energy

DEFAULT_CUTOFF = 1e-12
WIDTH_RANGE = (1e-2, 1e3)
DUPLICATE_TOL = 1e-10
_EPS = np.finfo(float).eps


class DegenerateBasisError(RuntimeError):
    """Every overlap eigenvalue fell below the conditioning cutoff."""


# ---------------------------------------------------------------------------
# value types


def _check_spd(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput(f"{name} must be a square matrix")
    if not np.allclose(A, A.T, rtol=1e-12, atol=0.0):
        raise InvalidInput(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise InvalidInput(f"{name} must be positive definite") from None
    return A


@dataclass(frozen=True)
class SystemSpec:
    n_vec: int
    kinetic: np.ndarray
    interactions: tuple  # ((w tuple, g), ...)
    exchange: np.ndarray | None = None
    threshold: float | None = None
    label: str = ""

    def __post_init__(self):
        lam = _check_spd(self.kinetic, "kinetic matrix")
        if lam.shape != (self.n_vec, self.n_vec):
            raise InvalidInput("kinetic matrix shape does not match n_vec")
        lam = lam.copy()
        lam.setflags(write=False)
        object.__setattr__(self, "kinetic", lam)
        inter = []
        for w, g in self.interactions:
            w = tuple(float(v) for v in w)
            if len(w) != self.n_vec or not any(w):
                raise InvalidInput("interaction vectors must be nonzero with n_vec entries")
            inter.append((w, float(g)))
        object.__setattr__(self, "interactions", tuple(inter))
        if self.exchange is not None:
            P = np.asarray(self.exchange, dtype=float)
            eye = np.eye(self.n_vec)
            if P.shape != (self.n_vec, self.n_vec) or not np.allclose(P @ P, eye):
                raise InvalidInput("exchange P must be an involution")
            if not np.allclose(P.T @ lam @ P, lam):
                raise InvalidInput("exchange P must commute with the kinetic matrix")
            P = P.copy()
            P.setflags(write=False)
            object.__setattr__(self, "exchange", P)

    @property
    def W(self):
        return np.array([w for w, _ in self.interactions], dtype=float).reshape(-1, self.n_vec)

    @property
    def g(self):
        return np.array([g for _, g in self.interactions], dtype=float)


def _same(A, B, tol=DUPLICATE_TOL):
    scale = max(np.linalg.norm(A), np.linalg.norm(B))
    return np.linalg.norm(A - B) <= tol * scale


@dataclass(frozen=True)
class GaussianBasis:
    """Immutable list of SPD width matrices, stored as an (n, d, d) stack."""

    widths: np.ndarray = field(repr=False)

    def __post_init__(self):
        W = np.array(self.widths, dtype=float)
        if W.ndim == 2:
            W = W[None]
        if W.ndim != 3 or W.shape[1] != W.shape[2]:
            raise InvalidInput("widths must be a stack of square matrices")
        for i, A in enumerate(W):
            _check_spd(A, f"width {i}")
            for j in range(i):
                if _same(A, W[j]):
                    raise InvalidInput(f"width {i} duplicates width {j}")
        W = 0.5 * (W + W.transpose(0, 2, 1))
        W.setflags(write=False)
        object.__setattr__(self, "widths", W)

    def __len__(self):
        return self.widths.shape[0]

    def __getitem__(self, i):
        return self.widths[i]

    @property
    def n_vec(self):
        return self.widths.shape[1]

    def contains(self, A):
        return any(_same(np.asarray(A, float), B) for B in self.widths)

    def with_function(self, A):
        return GaussianBasis(np.concatenate([self.widths, np.asarray(A, float)[None]]))

    def scaled(self, factor):
        """Basis with every width multiplied by ``factor`` (length rescaling)."""
        return GaussianBasis(self.widths * factor)

    def to_text(self):
        d = self.n_vec
        iu = np.triu_indices(d)
        lines = [" ".join("%.17g" % v for v in A[iu]) for A in self.widths]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            raise InvalidInput("empty basis file")
        m = len(rows[0])
        d = int(round((math.sqrt(8 * m + 1) - 1) / 2))
        if d * (d + 1) // 2 != m or any(len(r) != m for r in rows):
            raise InvalidInput("basis lines must hold the upper triangle of a square matrix")
        iu = np.triu_indices(d)
        out = np.zeros((len(rows), d, d))
        for k, r in enumerate(rows):
            out[k][iu] = [float(v) for v in r]
            out[k] = out[k] + np.triu(out[k], 1).T
        return cls(out)


@dataclass(frozen=True)
class SpectralResult:
    E0: float
    coefficients: np.ndarray  # in the original (unscaled) basis
    n_kept: int
    min_overlap_eig: float  # smallest kept eigenvalue of the unit-diagonal S
    residual: float
    rounding_bound: float  # floating-point error estimate of the Rayleigh quotient


# ---------------------------------------------------------------------------
# system constructors


def hydrogen(mu=1.0, q=1.0):
    """Two-body -Lap/(2 mu) - q/r; exact ground energy -mu q^2 / 2."""
    if mu <= 0 or q < 0:
        raise InvalidInput("need mu > 0 and q >= 0")
    return SystemSpec(1, np.array([[0.5 / mu]]), (((1.0,), -q),),
                      threshold=-0.5 * mu * q * q, label="hydrogen")


def three_body(frame: JacobiFrame, q1, q2):
    """Charges {q1, q2, -1} in the Jacobi frame; zero-charge pairs are dropped."""
    charges = {"23": q2, "13": q1, "12": q1 * q2}
    inter = []
    for p in frame.pairs:
        if charges[p.pair] != 0.0:
            sign = -1.0 if p.pair != "12" else 1.0
            inter.append((p.w, sign * charges[p.pair]))
    E_thr, _ = threshold_energy(frame, q1, q2)
    return SystemSpec(2, np.array(frame.kinetic), tuple(inter), threshold=E_thr,
                      label=f"three-body q1={q1!r} q2={q2!r}")


def atomic(Z, M=math.inf):
    """Two electrons around a nucleus of charge Z and mass M (electron mass 1).

    Coordinates are the electron positions relative to the nucleus, so finite
    M adds the mass-polarization coupling 1/(2M) between them.
    """
    if Z <= 0 or not M > 0:
        raise InvalidInput("need Z > 0 and M > 0")
    inv = 0.0 if math.isinf(M) else 1.0 / M
    lam = np.array([[0.5 + 0.5 * inv, 0.5 * inv], [0.5 * inv, 0.5 + 0.5 * inv]])
    inter = (((1.0, 0.0), -Z), ((0.0, 1.0), -Z), ((1.0, -1.0), 1.0))
    red = 1.0 if math.isinf(M) else M / (M + 1.0)
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    return SystemSpec(2, lam, inter, exchange=P, threshold=-0.5 * red * Z * Z,
                      label=f"atomic Z={Z!r} M={M!r}")


def helium(M=math.inf):
    return atomic(2.0, M)


# ---------------------------------------------------------------------------
# single elements (validated)


def overlap(Ai, Aj):
    Ai, Aj = _check_spd(Ai, "Ai"), _check_spd(Aj, "Aj")
    d = Ai.shape[0]
    S, _, _ = _cg_kernels.elements(Ai, Aj, np.eye(d), np.ones((1, d)), np.zeros(1))
    return float(S[0])


def kinetic(Ai, Aj, lam):
    Ai, Aj = _check_spd(Ai, "Ai"), _check_spd(Aj, "Aj")
    d = Ai.shape[0]
    _, T, _ = _cg_kernels.elements(Ai, Aj, np.asarray(lam, float), np.ones((1, d)), np.zeros(1))
    return float(T[0])


def coulomb(Ai, Aj, w):
    Ai, Aj = _check_spd(Ai, "Ai"), _check_spd(Aj, "Aj")
    w = np.asarray(w, dtype=float).reshape(1, -1)
    if not np.any(w):
        raise InvalidInput("w must be nonzero")
    d = Ai.shape[0]
    _, _, V = _cg_kernels.elements(Ai, Aj, np.eye(d), w, np.ones(1))
    return float(V[0])


# ---------------------------------------------------------------------------
# assembly


def _pair_elements(spec: SystemSpec, Ai, Aj, impl=None):
    """(S, H) for stacked pairs, symmetrized when the spec carries P."""
    lam, W, g = spec.kinetic, spec.W, spec.g
    S, T, V = _cg_kernels.elements(Ai, Aj, lam, W, g, impl=impl)
    H = T + V
    if spec.exchange is not None:
        P = spec.exchange
        AjP = np.einsum("ba,pbc,cd->pad", P, Aj, P)
        S2, T2, V2 = _cg_kernels.elements(Ai, AjP, lam, W, g, impl=impl)
        S = 0.5 * (S + S2)
        H = 0.5 * (H + T2 + V2)
    return S, H


def assemble(spec: SystemSpec, basis: GaussianBasis, impl=None):
    """Hamiltonian and overlap matrices ``(H, S)``."""
    n = len(basis)
    if n == 0:
        raise InvalidInput("empty basis")
    if basis.n_vec != spec.n_vec:
        raise InvalidInput("basis dimension does not match the system")
    iu, ju = np.triu_indices(n)
    A = basis.widths
    s, h = _pair_elements(spec, A[iu], A[ju], impl=impl)
    S = np.zeros((n, n))
    H = np.zeros((n, n))
    S[iu, ju] = s
    H[iu, ju] = h
    S[ju, iu] = s
    H[ju, iu] = h
    return H, S


def exchange_images(spec: SystemSpec, basis: GaussianBasis):
    """Basis of P^T A P; spans the same symmetrized space as ``basis``."""
    if spec.exchange is None:
        return basis
    P = spec.exchange
    return GaussianBasis(np.einsum("ba,pbc,cd->pad", P, basis.widths, P))


# ---------------------------------------------------------------------------
# generalized eigenproblem


def _lowest(H, S, cutoff):
    d = np.sqrt(np.diag(S))
    Hs = H / np.outer(d, d)
    Ss = S / np.outer(d, d)
    lam, U = np.linalg.eigh(Ss)
    keep = lam >= cutoff * lam[-1]
    if not np.any(keep):
        raise DegenerateBasisError("no overlap eigenvalue above the cutoff")
    X = U[:, keep] / np.sqrt(lam[keep])
    Hp = X.T @ Hs @ X
    e, V = np.linalg.eigh(0.5 * (Hp + Hp.T))
    c = (X @ V[:, 0]) / d
    return e[0], c, int(keep.sum()), float(lam[keep][0])


def solve_gevp(H, S, cond_cutoff=DEFAULT_CUTOFF):
    """Lowest root of H c = E S c restricted to well-conditioned overlap directions.

    S is first scaled to unit diagonal; directions with overlap eigenvalue below
    ``cond_cutoff`` times the largest are discarded.
    """
    if not 0.0 < cond_cutoff < 1.0:
        raise InvalidInput("cond_cutoff must lie in (0, 1)")
    H = np.asarray(H, dtype=float)
    S = np.asarray(S, dtype=float)
    if H.shape != S.shape or H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InvalidInput("H and S must be square with equal shapes")
    if np.any(np.diag(S) <= 0):
        raise DegenerateBasisError("overlap matrix has a non-positive diagonal")
    E, c, n_kept, lam_min = _lowest(H, S, cond_cutoff)
    norm = c @ S @ c
    c = c / math.sqrt(norm)
    res = np.linalg.norm(H @ c - E * (S @ c)) / np.linalg.norm(c)
    ac = np.abs(c)
    rb = 64 * _EPS * (ac @ np.abs(H) @ ac + abs(E) * (ac @ np.abs(S) @ ac))
    return SpectralResult(float(E), c, n_kept, lam_min, float(res), float(rb))


def ground_state(spec: SystemSpec, basis: GaussianBasis, cond_cutoff=DEFAULT_CUTOFF):
    H, S = assemble(spec, basis)
    return solve_gevp(H, S, cond_cutoff)


# ---------------------------------------------------------------------------
# stochastic variational growth


def sample_width(spec: SystemSpec, rng, width_range=WIDTH_RANGE, drop_prob=0.0):
    """A = sum_k w_k w_k^T / b_k^2 with b_k log-uniform in ``width_range``.

    With probability ``drop_prob`` a pair term is switched off, as long as
    the remaining terms still give a positive-definite A.
    """
    W = spec.W
    lo, hi = math.log(width_range[0]), math.log(width_range[1])
    b = np.exp(rng.uniform(lo, hi, size=W.shape[0]))
    alpha = 1.0 / b ** 2
    if drop_prob > 0.0:
        mask = rng.random(W.shape[0]) >= drop_prob
        if mask.any() and np.linalg.matrix_rank(W[mask]) == spec.n_vec:
            alpha = alpha * mask
    A = np.einsum("k,ka,kb->ab", alpha, W, W)
    if W.shape[0] < spec.n_vec or np.linalg.matrix_rank(W) < spec.n_vec:
        # too few pair directions to span all coordinates: pad isotropically
        A = A + np.eye(spec.n_vec) / math.exp(rng.uniform(lo, hi)) ** 2
    return A


def _max_normalized_overlap(s_row, s_diag, s_self):
    return np.max(np.abs(s_row) / np.sqrt(s_diag * s_self)) if s_row.size else 0.0


@dataclass
class OptimizeTrace:
    energies: list = field(default_factory=list)
    rejected: int = 0


def optimize_basis(spec: SystemSpec, target_size, trials_per_slot=20, seed=0,
                   refine_sweeps=2, width_range=WIDTH_RANGE, max_overlap=0.995,
                   min_eig=1e-10, drop_prob=0.25, polish_sweeps=1,
                   initial: GaussianBasis | None = None,
                   trace: OptimizeTrace | None = None):
    """Grow a basis one function at a time, then refine by replacement.

    Each slot draws ``trials_per_slot`` candidate widths and keeps the one
    with the lowest ground energy.  Candidates nearly parallel to an existing
    function (normalized overlap above ``max_overlap``) or that push the
    smallest unit-diagonal overlap eigenvalue below ``min_eig`` are rejected.
    Refinement sweeps replace function i by a fresh candidate whenever that
    lowers the energy; polish sweeps then try rescaling each width by
    exp(+-delta) on a shrinking ladder of delta.  The result depends only on
    ``seed``.
    """
    if target_size < 1:
        raise InvalidInput("target_size must be >= 1")
    if trials_per_slot < 1:
        raise InvalidInput("trials_per_slot must be >= 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    d = spec.n_vec
    widths = np.zeros((0, d, d)) if initial is None else np.array(initial.widths)
    trace = trace if trace is not None else OptimizeTrace()
    if len(widths):
        H, S = assemble(spec, GaussianBasis(widths))
        E_cur = _lowest(H, S, DEFAULT_CUTOFF)[0]
    else:
        H = S = np.zeros((0, 0))
        E_cur = math.inf

    def candidates():
        return np.array([sample_width(spec, rng, width_range, drop_prob)
                         for _ in range(trials_per_slot)])

    def best_candidate(base_w, base_H, base_S, C=None):
        C = candidates() if C is None else C
        m = base_w.shape[0]
        t = C.shape[0]
        # elements of every candidate against the base, plus the diagonal
        Ai = np.repeat(C, m + 1, axis=0)
        Aj = np.concatenate([np.concatenate([base_w, c[None]]) for c in C]) if m else C
        s, h = _pair_elements(spec, Ai, Aj)
        s = s.reshape(t, m + 1)
        h = h.reshape(t, m + 1)
        best = (math.inf, None, None, None)
        diag = np.diag(base_S)
        for a in range(t):
            if _max_normalized_overlap(s[a, :m], diag, s[a, m]) > max_overlap:
                trace.rejected += 1
                continue
            S2 = np.empty((m + 1, m + 1))
            H2 = np.empty((m + 1, m + 1))
            S2[:m, :m] = base_S
            H2[:m, :m] = base_H
            S2[m, :] = S2[:, m] = s[a]
            H2[m, :] = H2[:, m] = h[a]
            try:
                E, _, n_kept, lam_min = _lowest(H2, S2, DEFAULT_CUTOFF)
            except DegenerateBasisError:
                trace.rejected += 1
                continue
            if n_kept < m + 1 or lam_min < min_eig:
                trace.rejected += 1
                continue
            if E < best[0]:
                best = (E, C[a], H2, S2)
        return best

    stalls = 0
    while widths.shape[0] < target_size and stalls < 10:
        E, A, H2, S2 = best_candidate(widths, H, S)
        if A is None:
            stalls += 1
            continue
        stalls = 0
        widths = np.concatenate([widths, A[None]])
        H, S, E_cur = H2, S2, E
        trace.energies.append(E_cur)

    n = widths.shape[0]

    def replace(i, C):
        nonlocal widths, H, S, E_cur
        keep = np.r_[0:i, i + 1:n]
        E, A, H2, S2 = best_candidate(widths[keep], H[np.ix_(keep, keep)],
                                      S[np.ix_(keep, keep)], C)
        if A is None or not E < E_cur - 1e-14 * abs(E_cur):
            return False
        # new function lands last; move it back to slot i
        inv = np.argsort(np.r_[keep, i])
        widths = np.concatenate([widths[keep], A[None]])[inv]
        H = H2[np.ix_(inv, inv)]
        S = S2[np.ix_(inv, inv)]
        E_cur = E
        trace.energies.append(E_cur)
        return True

    for _ in range(refine_sweeps):
        for i in range(n):
            replace(i, None)
    ladder = (0.5, 0.2, 0.08, 0.03)
    for _ in range(polish_sweeps):
        for i in range(n):
            for delta in ladder:
                f = np.exp([delta, -delta])
                replace(i, widths[i][None] * f[:, None, None])
    return GaussianBasis(widths)
