import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coulthresh.kinematics import InvalidInput, frame_from_masses
from coulthresh.stability import (CSV_COLUMNS, Budget, BorderPoint, BudgetInsufficient,
                                  NoBorderOnRay, State, classify, criterion_fires,
                                  criterion_sup, critical_charge_atomic, diagram_csv,
                                  instability_criterion, scan, trace_border)

EQ = frame_from_masses(1, 1, 1)
SMALL = Budget(16, 20)


def _second_inequality(mu, mu23, q1):
    a = 4 * q1 * math.sqrt(mu)
    return 6 * mu / mu23 * q1 * (1 + a / (math.sqrt(3 * mu23) - a))


def test_criterion_arithmetic_equal_masses():
    # mu = 2/3, mu23 = 1/2: 6 mu / mu23 = 8, 4 sqrt(mu) q1 = 0.032660, sqrt(3/2) = 1.224745
    val = 8 * 0.01 * (1 + 0.032660 / (1.224745 - 0.032660))
    assert val == pytest.approx(0.0822, abs=5e-5)
    assert _second_inequality(2 / 3, 0.5, 0.01) == pytest.approx(val, rel=1e-5)
    assert instability_criterion(EQ, 0.01)


def test_criterion_first_inequality_is_strict():
    assert math.sqrt(9 / 64) == 0.375
    assert not instability_criterion(EQ, 0.375)


def test_criterion_zero_charge_policy():
    assert not instability_criterion(EQ, 0.0)
    with pytest.raises(InvalidInput):
        instability_criterion(EQ, -0.1)


def test_criterion_sup_equal_masses():
    # second inequality at equality: 8 q (1 + a/(b - a)) = 1 with a = 4 q sqrt(2/3)
    # reduces to 8 q b = b - a, i.e. q = b / (8 b + 4 sqrt(2/3))
    b = math.sqrt(1.5)
    q = b / (8 * b + 4 * math.sqrt(2 / 3))
    assert q == pytest.approx(3 / 32, rel=1e-12)
    assert criterion_sup(EQ) == pytest.approx(q, abs=1e-12)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0, 1))
def test_criterion_fires_on_an_interval(m1, m2, m3, u):
    f = frame_from_masses(m1, m2, m3)
    sup = criterion_sup(f)
    q = u * 0.4
    if 0 < q < sup * (1 - 1e-9):
        assert instability_criterion(f, q)
    elif q > sup * (1 + 1e-9) or q == 0:
        assert not instability_criterion(f, q)


def test_criterion_edges():
    assert criterion_fires(EQ, 0.05, 1.0)
    assert criterion_fires(EQ, 1.0, 0.05)
    assert not criterion_fires(EQ, 0.05, 0.9)


def test_classify_unit_square_point():
    v = classify(EQ, 0.5, 0.5, SMALL)
    assert v.state is State.CERTIFIED_STABLE
    assert v.margin > SMALL.eps_num


def test_classify_criterion_point():
    v = classify(EQ, 0.01, 1.0, SMALL)
    assert v.state is State.CRITERION_UNSTABLE


def test_classify_decoupled_particle_not_certified():
    v = classify(EQ, 0.0, 1.0, SMALL)
    assert v.state is not State.CERTIFIED_STABLE


def test_classify_rejects_negative_charge():
    with pytest.raises(InvalidInput):
        classify(EQ, -0.1, 1.0, SMALL)


def test_certified_margin_grows_with_q1_in_upper_sector():
    budget = Budget(24, 40, refine=2)
    margins = []
    for q1 in np.linspace(0.3, 0.8, 6):
        v = classify(EQ, q1, 0.8, budget)
        assert v.state is State.CERTIFIED_STABLE
        margins.append(v.margin)
    assert all(b >= a - 2 * budget.eps_num for a, b in zip(margins, margins[1:]))


def test_borders_mirror_for_equal_masses():
    up = trace_border(EQ, "upper", SMALL, resolution=0.02, rays=(1.0,))
    lo = trace_border(EQ, "lower", SMALL, resolution=0.02, rays=(1.0,))
    assert isinstance(up[0], BorderPoint) and isinstance(lo[0], BorderPoint)
    assert abs(up[0].hi - lo[0].hi) <= 2 * 0.02
    q1, q2 = up[0].point()
    assert (q2, q1) == lo[0].point()
    # stable end certified, and the bracket sits above the criterion's bound
    assert classify(EQ, *up[0].point(), SMALL).state is State.CERTIFIED_STABLE
    assert up[0].lo >= criterion_sup(EQ)


def test_ray_inside_unit_square_has_no_border():
    out = trace_border(EQ, "upper", SMALL, resolution=0.05, rays=(0.6,), interval=(0.3, 0.6))
    assert isinstance(out[0], NoBorderOnRay)
    assert out[0].states == ("CertifiedStable", "CertifiedStable")


def test_trace_border_input_checks():
    with pytest.raises(InvalidInput):
        trace_border(EQ, "left", SMALL)
    with pytest.raises(InvalidInput):
        trace_border(EQ, "upper", SMALL, resolution=0)


def test_scan_csv_layout():
    d = scan(EQ, [0.5], [0.5, 0.6], Budget(6, 5))
    rows = list(csv.reader(io.StringIO(diagram_csv(d))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3
    assert rows[1][:2] == ["0.5", "0.5"]


def test_scan_deterministic():
    a = diagram_csv(scan(EQ, [0.4, 0.7], [0.9], Budget(8, 5, seed=3)))
    b = diagram_csv(scan(EQ, [0.4, 0.7], [0.9], Budget(8, 5, seed=3)))
    assert a == b


def test_critical_charge_budget_insufficient():
    with pytest.raises(BudgetInsufficient):
        critical_charge_atomic(budget=Budget(2, 2), bracket=(0.5, 1.0))


def test_critical_charge_input_checks():
    with pytest.raises(InvalidInput):
        critical_charge_atomic(Ne=3)
    with pytest.raises(InvalidInput):
        critical_charge_atomic(tol=0)
