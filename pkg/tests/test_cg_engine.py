import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coulthresh import _cg_kernels
from coulthresh.cg_engine import (DegenerateBasisError, GaussianBasis, SystemSpec, assemble,
                                  atomic, coulomb, exchange_images, ground_state, helium,
                                  hydrogen, kinetic, optimize_basis, overlap, solve_gevp,
                                  three_body)
from coulthresh.kinematics import InvalidInput, frame_from_masses
from helpers import random_instance, random_spd
from oracles import (coulomb_oracle, gaussian_integral_2, kinetic_oracle,
                     mc_gaussian_integrals, overlap_oracle)

RNG_SEEDS = range(100)


# ---------------------------------------------------------------------------
# single elements


def test_one_vector_values():
    one = np.array([[1.0]])
    assert overlap(one, one) == pytest.approx(math.pi ** 1.5, rel=1e-14)
    assert kinetic(one, one, [[0.5]]) / overlap(one, one) == pytest.approx(0.75, rel=1e-14)
    assert coulomb(one, one, [1.0]) / overlap(one, one) == pytest.approx(2 / math.sqrt(math.pi),
                                                                         rel=1e-14)


def test_one_vector_radial_quadrature():
    from scipy.integrate import quad
    S = quad(lambda r: 4 * math.pi * r * r * math.exp(-r * r), 0, np.inf)[0]
    V = quad(lambda r: 4 * math.pi * r * math.exp(-r * r), 0, np.inf)[0]
    # -1/2 Lap acting on exp(-r^2/2), integrated against exp(-r^2/2)
    T = quad(lambda r: 4 * math.pi * r * r * 0.5 * r * r * math.exp(-r * r), 0, np.inf)[0]
    one = np.array([[1.0]])
    assert overlap(one, one) == pytest.approx(S, rel=1e-10)
    assert coulomb(one, one, [1.0]) == pytest.approx(V, rel=1e-10)
    assert kinetic(one, one, [[0.5]]) == pytest.approx(T, rel=1e-10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_scaling_identities(seed):
    rng = np.random.default_rng(seed)
    Ai, Aj, lam, w = random_instance(rng)
    A = random_spd(rng)
    assert overlap(2 * A, 2 * A) == pytest.approx(overlap(A, A) * 2.0 ** -3, rel=1e-13)
    assert kinetic(Ai, Aj, 3.5 * lam) == pytest.approx(3.5 * kinetic(Ai, Aj, lam), rel=1e-13)
    assert coulomb(Ai, Aj, -2.5 * w) == pytest.approx(coulomb(Ai, Aj, w) / 2.5, rel=1e-13)


def test_element_errors():
    A = np.eye(2)
    with pytest.raises(InvalidInput):
        overlap(A, np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(InvalidInput):
        coulomb(A, A, [0.0, 0.0])


@pytest.mark.parametrize("seed", RNG_SEEDS)
def test_elements_match_quadrature(seed):
    rng = np.random.default_rng(1000 + seed)
    Ai, Aj, lam, w = random_instance(rng)
    assert overlap(Ai, Aj) == pytest.approx(overlap_oracle(Ai, Aj), rel=1e-6)
    assert kinetic(Ai, Aj, lam) == pytest.approx(kinetic_oracle(Ai, Aj, lam), rel=1e-6)
    assert coulomb(Ai, Aj, w) == pytest.approx(coulomb_oracle(Ai, Aj, w), rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_elements_match_monte_carlo(seed):
    rng = np.random.default_rng(2000 + seed)
    Ai, Aj, lam, w = random_instance(rng)
    (S, se_S), (V, se_V), (T, se_T) = mc_gaussian_integrals(Ai + Aj, w, n=1_000_000, seed=seed,
                                                            M=Ai @ lam @ Aj)
    assert abs(overlap(Ai, Aj) - S) <= 3 * se_S
    assert abs(coulomb(Ai, Aj, w) - V) <= 3 * se_V
    assert abs(kinetic(Ai, Aj, lam) - T) <= 3 * se_T


def test_finite_difference_kinetic():
    """-grad^T Lam grad by central differences on a grid, off-diagonal Lam."""
    rng = np.random.default_rng(7)
    Ai, Aj = random_spd(rng, lo=0.5, hi=2.0), random_spd(rng, lo=0.5, hi=2.0)
    lam = np.array([[0.6, 0.1], [0.1, 0.6]])
    h = 1e-4
    # directional second derivative of exp(-x^T A x / 2) along x is analytic in
    # the oracle; here check <phi_i|T|phi_j> = <T phi_i|phi_j> via differences
    # of the overlap in A: d/dt S(Ai, Aj + t M) relates to <x^T M x>
    M = Ai @ lam @ Aj + Aj @ lam @ Ai
    dS = (overlap(Ai, Aj + h * M) - overlap(Ai, Aj - h * M)) / (2 * h)
    mom = -2 * dS  # int x^T M x phi_i phi_j
    assert kinetic(Ai, Aj, lam) == pytest.approx(0.5 * mom, rel=1e-6)


# ---------------------------------------------------------------------------
# assembly


def test_hydrogen_single_function_bound():
    spec = hydrogen(0.5, 1.0)
    for a in (0.05, 0.3, 1.0, 4.0):
        H, S = assemble(spec, GaussianBasis(np.array([[[a]]])))
        assert H.shape == (1, 1)
        assert H[0, 0] / S[0, 0] >= -0.25


def test_symmetric_basis_function_unchanged_by_symmetrization():
    A = np.array([[1.3, 0.2], [0.2, 1.3]])
    spec = helium()
    nosym = SystemSpec(2, spec.kinetic, spec.interactions)
    H1, S1 = assemble(spec, GaussianBasis(A))
    H0, S0 = assemble(nosym, GaussianBasis(A))
    assert np.allclose(S1, S0, rtol=1e-14)
    assert np.allclose(H1, H0, rtol=1e-14)


def test_helium_seed_matches_quadrature():
    spec = helium()
    P = spec.exchange
    rng = np.random.default_rng(3)
    basis = GaussianBasis(np.stack([random_spd(rng, lo=0.5, hi=8.0) for _ in range(3)]))
    H, S = assemble(spec, basis)
    for i in range(3):
        for j in range(3):
            Ai = basis[i]
            s = t = v = 0.0
            for Aj in (basis[j], P.T @ basis[j] @ P):
                s += 0.5 * overlap_oracle(Ai, Aj)
                t += 0.5 * kinetic_oracle(Ai, Aj, spec.kinetic)
                v += 0.5 * sum(g * coulomb_oracle(Ai, Aj, w) for w, g in spec.interactions)
            assert S[i, j] == pytest.approx(s, rel=1e-8)
            assert H[i, j] == pytest.approx(t + v, rel=1e-8)


@given(st.integers(0, 2 ** 31))
def test_symmetrization_idempotent(seed):
    rng = np.random.default_rng(seed)
    spec = atomic(1.0, 1836.0)
    basis = GaussianBasis(np.stack([random_spd(rng) for _ in range(3)]))
    H1, S1 = assemble(spec, basis)
    H2, S2 = assemble(spec, exchange_images(spec, basis))
    H3, S3 = assemble(spec, exchange_images(spec, exchange_images(spec, basis)))
    assert np.allclose(H1, H2, rtol=1e-12, atol=0)
    assert np.allclose(S1, S2, rtol=1e-12, atol=0)
    assert np.allclose(H1, H3, rtol=1e-12, atol=0)


@given(st.integers(0, 2 ** 31))
def test_assemble_symmetric_psd(seed):
    rng = np.random.default_rng(seed)
    spec = three_body(frame_from_masses(1, 2, 3), 0.7, 1.1)
    basis = GaussianBasis(np.stack([random_spd(rng) for _ in range(5)]))
    H, S = assemble(spec, basis)
    assert np.array_equal(H, H.T) and np.array_equal(S, S.T)
    ev = np.linalg.eigvalsh(S / np.sqrt(np.outer(np.diag(S), np.diag(S))))
    assert ev.min() > -1e-12


def test_exchange_validation():
    with pytest.raises(InvalidInput):
        SystemSpec(2, np.diag([0.5, 0.7]), (((1.0, 0.0), -1.0),), exchange=np.array([[0, 1], [1, 0]]))
    with pytest.raises(InvalidInput):
        SystemSpec(2, np.eye(2), (((0.0, 0.0), -1.0),))


# ---------------------------------------------------------------------------
# eigenproblem


def test_rayleigh_quotient_one_by_one():
    r = solve_gevp(np.array([[-3.0]]), np.array([[2.0]]))
    assert r.E0 == pytest.approx(-1.5)
    assert r.n_kept == 1


def test_degenerate_basis():
    with pytest.raises(DegenerateBasisError):
        solve_gevp(np.array([[1.0]]), np.array([[0.0]]))
    with pytest.raises(InvalidInput):
        solve_gevp(np.eye(2), np.eye(2), cond_cutoff=1.5)


def test_hydrogen_eight_functions():
    spec = hydrogen(0.5, 1.0)
    basis = optimize_basis(spec, 8, trials_per_slot=30, seed=0)
    r = ground_state(spec, basis)
    assert len(basis) <= 8
    assert r.E0 >= -0.25 - 1e-9
    assert abs(r.E0 + 0.25) / 0.25 < 1e-4
    assert r.residual < 1e-8


def test_duplicate_function_rejected_and_span_unchanged():
    spec = hydrogen(1.0, 1.0)
    basis = optimize_basis(spec, 5, trials_per_slot=10, seed=1)
    E = ground_state(spec, basis).E0
    with pytest.raises(InvalidInput):
        basis.with_function(basis[2])
    # an exact copy assembled directly gives a singular S; the cutoff handles it
    H, S = assemble(spec, basis)
    idx = list(range(len(basis))) + [2]
    r = solve_gevp(H[np.ix_(idx, idx)], S[np.ix_(idx, idx)])
    assert r.E0 == pytest.approx(E, abs=1e-10)


def test_single_gaussian_negative():
    spec = hydrogen(0.7, 1.3)
    r = ground_state(spec, optimize_basis(spec, 1, trials_per_slot=20, seed=0))
    assert -0.5 * 0.7 * 1.3 ** 2 < r.E0 < 0


def test_optimize_deterministic():
    spec = three_body(frame_from_masses(1, 1, 1), 1.0, 1.0)
    b1 = optimize_basis(spec, 6, trials_per_slot=5, seed=42)
    b2 = optimize_basis(spec, 6, trials_per_slot=5, seed=42)
    assert b1.to_text() == b2.to_text()


@given(st.integers(0, 2 ** 31), st.floats(0.2, 3.0), st.floats(0.3, 2.0))
def test_variational_bound_and_monotonicity(seed, mu, q):
    spec = hydrogen(mu, q)
    rng = np.random.default_rng(seed)
    a = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), 6))
    a = np.unique(a)
    Es = []
    for n in range(1, a.size + 1):
        Es.append(ground_state(spec, GaussianBasis(a[:n, None, None])).E0)
    assert min(Es) >= -0.5 * mu * q * q - 1e-9
    assert all(Es[i + 1] <= Es[i] + 1e-10 for i in range(len(Es) - 1))


def test_basis_text_round_trip():
    rng = np.random.default_rng(5)
    basis = GaussianBasis(np.stack([random_spd(rng) for _ in range(4)]))
    again = GaussianBasis.from_text(basis.to_text())
    assert np.array_equal(again.widths, basis.widths)
    with pytest.raises(InvalidInput):
        GaussianBasis.from_text("1 2\n")


@pytest.mark.slow
def test_helium_fifty_functions():
    spec = helium()
    basis = optimize_basis(spec, 50, trials_per_slot=20, seed=0)
    assert ground_state(spec, basis).E0 <= -2.90


# ---------------------------------------------------------------------------
# backends


def test_element_backends_agree():
    rng = np.random.default_rng(11)
    Ai = np.stack([random_spd(rng) for _ in range(50)])
    Aj = np.stack([random_spd(rng) for _ in range(50)])
    spec = helium(1836.0)
    a = _cg_kernels.elements(Ai, Aj, spec.kinetic, spec.W, spec.g,
                             impl=_cg_kernels.numba_elements)
    b = _cg_kernels.elements(Ai, Aj, spec.kinetic, spec.W, spec.g,
                             impl=_cg_kernels.numpy_elements)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=0)


def test_pair_moment_backends_agree():
    rng = np.random.default_rng(12)
    B = np.stack([random_spd(rng) for _ in range(20)])
    a = _cg_kernels.pair_moments(B, 10, impl=_cg_kernels.numba_pair_moments)
    b = _cg_kernels.pair_moments(B, 10, impl=_cg_kernels.numpy_pair_moments)
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_pair_moments_against_quadrature():
    rng = np.random.default_rng(13)
    B = random_spd(rng)
    mom = _cg_kernels.pair_moments(B, 4)[0]
    # the zeroth moment is the overlap integral with B itself as the total width
    assert mom[0, 0] == pytest.approx(gaussian_integral_2(B), rel=1e-9)
    assert mom[2, 0] == pytest.approx(gaussian_integral_2(B, (0, 1, 0, 0, 0)), rel=1e-9)
    assert mom[0, 2] == pytest.approx(gaussian_integral_2(B, (0, 0, 1, 0, 0)), rel=1e-9)
