import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coulthresh import seq_diagnostics as sd
from coulthresh.greens import ResolutionError

R_GRID = np.linspace(0.0, 12.0, 5)


def test_unit_gaussian_tail_limits():
    g = sd.gaussian(3)
    assert sd.tail_mass(g, 0.0)[0] == pytest.approx(1.0, abs=1e-10)
    assert sd.tail_mass(g, 30.0)[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("R", [0.5, 1.0, 2.5])
def test_gaussian_tail_closed_form(R):
    # |g|^2 is a normal density with variance 1/2 per axis: chi-square with 3 dof
    from scipy.stats import chi2
    exact = math.sqrt(chi2.sf(2 * R * R, 3))
    assert sd.tail_mass(sd.gaussian(3), R)[0] == pytest.approx(exact, rel=1e-8)


def test_translated_bump_outside_radius():
    g = sd.gaussian(3, 0.5)
    f = sd.translated(g, [10.0, 0.0, 0.0])
    assert sd.tail_mass(f, 5.0)[0] == pytest.approx(g.norm, abs=1e-8)


@pytest.mark.parametrize("center", [(3.0, 0.0, 0.0), (0.4, -0.3, 0.2), (1.0, 1.0, 1.0)])
@pytest.mark.parametrize("R", [0.7, 1.5, 3.0])
def test_off_center_gaussian_against_noncentral_chi2(center, R):
    from scipy.stats import ncx2
    c = np.asarray(center)
    f = sd.gaussian(3, 1.0, center=c)
    # 2|x|^2 for x ~ N(c, I/2) is noncentral chi-square with noncentrality 2|c|^2
    exact = math.sqrt(ncx2.sf(2 * R * R, 3, 2 * c @ c))
    assert sd.tail_mass(f, R)[0] == pytest.approx(exact, rel=1e-7)


@pytest.mark.parametrize("dim", [1, 2])
def test_low_dimensions(dim):
    g = sd.gaussian(dim)
    assert g.norm == pytest.approx(1.0, rel=1e-10)
    h = sd.gaussian(dim, center=np.full(dim, 0.7))
    assert h.norm == pytest.approx(1.0, rel=1e-8)


def test_monte_carlo_dimension():
    g = sd.gaussian(6)
    v, err = sd.tail_mass(g, 0.0, mc_samples=200000)
    assert abs(v - 1.0) <= 4 * err


def test_unresolved_quadrature_raises():
    narrow = sd.SampledFunction(None, 3, None, 50.0, lambda r: np.exp(-0.5 * (r / 0.05) ** 2))
    with pytest.raises(ResolutionError):
        sd.tail_mass(narrow, 0.0)


@given(st.floats(0.3, 3.0), st.floats(0, 5), st.floats(0, 5))
def test_tail_non_increasing(width, R1, dR):
    g = sd.gaussian(3, width)
    assert sd.tail_mass(g, R1 + dR)[0] <= sd.tail_mass(g, R1)[0] + 1e-12


def test_translation_family_spreads():
    g = sd.gaussian(3)
    seq = [sd.translated(g, [2.0 * n, 0, 0]) for n in range(1, 17)]
    p = sd.probe_sequence(seq, R_GRID, 0.9 * g.norm)
    assert p.verdict == "spread-proxy"
    assert not sd.check_monotone_domination(seq)


def test_scaled_family_does_not_spread():
    g = sd.gaussian(3)
    seq = [g.scaled(1 - 1 / n) for n in range(1, 13)]
    assert sd.check_monotone_domination(seq)
    assert sd.probe_sequence(seq, R_GRID, 0.1).verdict == "non-spread-proxy"


def test_widening_gaussians_spread():
    seq = [sd.gaussian(3, float(n)) for n in range(1, 17)]
    p = sd.probe_sequence(seq, np.linspace(0, 6, 4), 0.5)
    assert p.verdict == "spread-proxy"


def test_probe_needs_eight_members():
    with pytest.raises(ValueError):
        sd.probe_sequence([sd.gaussian(3)] * 7, R_GRID, 0.1)


def test_probe_csv():
    g = sd.gaussian(3)
    p = sd.probe_sequence([g.scaled(1 - 1 / n) for n in range(1, 9)], [0.0, 1.0], 0.1)
    rows = list(csv.reader(io.StringIO(p.to_csv())))
    assert rows[0] == ["n", "R", "mass"] and len(rows) == 1 + 8 * 2


def test_interleaved_family_and_subsequence():
    g = sd.gaussian(3)
    h = sd.gaussian(3, 0.5, center=[1.5, 0, 0])
    seq = []
    for n in range(1, 7):
        seq.append(g.scaled(1 - 1 / (n + 1)))
        seq.append(h.scaled(1 - 1 / (n + 1)))
    assert not sd.check_monotone_domination(seq)
    idx = sd.extract_monotone_subsequence(seq)
    assert len(idx) == 6
    assert sd.check_monotone_domination([seq[i] for i in idx])


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32 - 1))
def test_generated_monotone_families_do_not_spread(seed):
    fam, reach = sd.random_monotone_family(np.random.default_rng(seed))
    assert sd.check_monotone_domination(fam)
    a = 0.05 * max(f.norm for f in fam)
    assert sd.probe_sequence(fam, np.linspace(0.0, reach, 6), a).verdict == "non-spread-proxy"


@pytest.mark.parametrize("seed", [0, 1])
def test_generated_off_center_family(seed):
    fam, reach = sd.random_monotone_family(np.random.default_rng(seed), length=8,
                                           off_center_prob=1.0)
    assert fam[0].radial is None
    assert sd.check_monotone_domination(fam)
    a = 0.05 * max(f.norm for f in fam)
    assert sd.probe_sequence(fam, [0.0, reach], a).verdict == "non-spread-proxy"


# ---------------------------------------------------------------------------
# product split


def test_indicator_split_random():
    rng = np.random.default_rng(0)
    xa = rng.standard_normal((100000, 3)) * 10 ** rng.uniform(-2, 2, (100000, 1))
    Ra = rng.standard_normal((100000, 3)) * 10 ** rng.uniform(-2, 2, (100000, 1))
    assert np.all(sd.split_indicator_violations(xa, Ra, 1.0) <= 0)


def test_product_tail_pieces():
    u = lambda s: np.exp(-0.5 * s * s)
    f = sd.ProductRadial(u, u)
    n = sd.product_norm(f)
    assert n == pytest.approx(math.pi ** 1.5, rel=1e-10)
    assert sd.product_tail(f, 0.0, "sum") == pytest.approx(n, rel=1e-10)
    # the sum tail sits between the single-coordinate tails and their sum
    for R in (0.5, 2.0, 4.0):
        s = sd.product_tail(f, 2 * R, "sum")
        assert s <= sd.product_tail(f, R, "xa") + sd.product_tail(f, R, "Ra") + 1e-12


def test_product_tail_monte_carlo():
    u = lambda s: np.exp(-0.5 * s * s)
    f = sd.ProductRadial(u, u)
    rng = np.random.default_rng(4)
    # |f|^2 / ||f||^2 is N(0, I/2) in each of the six coordinates
    x = rng.standard_normal((400000, 6)) * math.sqrt(0.5)
    s = np.linalg.norm(x[:, :3], axis=1) + np.linalg.norm(x[:, 3:], axis=1)
    p = np.mean(s >= 2.5)
    se = math.sqrt(p * (1 - p) / x.shape[0])
    q = (sd.product_tail(f, 2.5, "sum") / sd.product_norm(f)) ** 2
    assert abs(q - p) <= 4 * se


@pytest.mark.parametrize("weight", ["exp", "power"])
def test_product_split_report(weight):
    u = lambda s: np.exp(-0.5 * s * s)
    seq = [sd.ProductRadial(u, (lambda c: lambda t: c * np.exp(-0.5 * t * t))(1 - 1 / n))
           for n in range(1, 13)]
    rep = sd.check_product_split(seq, 2.0, 0.5, weight=weight, samples=100000)
    assert rep.passed
    assert rep.extra["indicator_violations"] == 0
