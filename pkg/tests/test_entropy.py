from fractions import Fraction

import numpy as np
import pytest

from qmstree.entropy import (
    STRATEGIES,
    aitken,
    applicable_paths,
    build_ledger,
    commutator_defect,
    direct_increment,
    entropy_identity_defect,
    increment_via_amplitude,
    level_entropies_by_path,
    level_entropy,
    mean_entropy,
    telescoping_coefficients,
    translation_defect,
)
from qmstree.errors import HypothesisViolated, RegionTooLarge, StrategyInapplicable
from qmstree.ising import ising_closed_form, ising_model
from qmstree.mixing import degenerate_amplitude
from qmstree.model import custom_model, random_unital_amplitude, trace_state_model

LN2 = np.log(2)


@pytest.fixture(scope="module")
def ising():
    return ising_model(0.1, 0.5)


def test_trace_state_levels():
    m = trace_state_model()
    assert abs(level_entropy(m, 2) - 7 * LN2) < 1e-12
    for n in range(4):
        for p, v in level_entropies_by_path(m, n).items():
            assert abs(v - m.shape.ball_size(n) * LN2) < 1e-12, p


def test_trace_state_k3_d3():
    m = trace_state_model(3, 3)
    assert abs(level_entropy(m, 2) - 13 * np.log(3)) < 1e-12
    assert abs(mean_entropy(m, "closed_form").value - np.log(3)) < 1e-12


def test_pure_product_is_zero():
    m = custom_model(degenerate_amplitude("copy"), 2, 2, omega0=np.diag([1.0, 0.0]))
    for n in range(4):
        assert abs(level_entropy(m, n)) < 1e-14


def test_paths_agree_ising(ising):
    for n in range(4):
        vals = level_entropies_by_path(ising, n)
        assert len(vals) >= 2
        v = list(vals.values())
        assert max(v) - min(v) < 1e-9


def test_paths_available(ising):
    assert applicable_paths(ising, 2) == ["dense", "diagonal", "factorized"]
    assert applicable_paths(ising, 3) == ["diagonal", "factorized"]
    assert applicable_paths(ising, 8) == ["factorized"]
    g = custom_model(random_unital_amplitude(2, 2, np.random.default_rng(0)), 2, 2)
    assert applicable_paths(g, 3) == []
    with pytest.raises(RegionTooLarge):
        level_entropy(g, 3)


def test_entropy_bounds(ising):
    for n in range(6):
        s = level_entropy(ising, n)
        assert 0 <= s <= ising.shape.ball_size(n) * LN2 + 1e-12


def test_entropy_identity(ising):
    assert entropy_identity_defect(ising, 1) < 1e-8
    assert entropy_identity_defect(ising, 1, "dense") < 1e-8
    assert entropy_identity_defect(trace_state_model(), 1) < 1e-12


def test_entropy_identity_negative_controls():
    # h = I: unnormalized densities break the identity by a lot
    assert entropy_identity_defect(ising_model(0.5, 1.0, h=np.eye(2)), 1) > 1e-3
    # a non-fixed-point boundary, renormalized at every level, still breaks it
    m = ising_model(0.5, 1.0, h=np.diag([1.0, 2.0]), normalize=True)
    assert entropy_identity_defect(m, 1) > 1e-3


def test_increment_formula(ising):
    assert commutator_defect(ising, 1, "dense") < 1e-10
    for n in range(2):
        assert abs(increment_via_amplitude(ising, n) - direct_increment(ising, n)) < 1e-8
    t = trace_state_model()
    assert abs(increment_via_amplitude(t, 1) - 4 * LN2) < 1e-12


def test_increment_formula_refuses_noncommuting():
    g = custom_model(random_unital_amplitude(2, 2, np.random.default_rng(1)), 2, 2,
                     omega0=np.array([[0.7, 0.2], [0.2, 0.3]]))
    with pytest.raises(HypothesisViolated):
        increment_via_amplitude(g, 0)


def test_constancy(ising):
    shape = ising.shape
    r = [direct_increment(ising, n, "dense") / shape.level_size(n + 1) for n in range(2)]
    assert abs(r[0] - r[1]) < 1e-8
    assert translation_defect(ising, 1) < 1e-12


def test_mean_entropy_strategies(ising):
    s = ising_closed_form(0.1, 0.5)
    cf = mean_entropy(ising, "closed_form")
    inc = mean_entropy(ising, "increment_ratio", 4)
    assert abs(cf.value - s) < 1e-8
    assert all(abs(r["increment_ratio"] - s) < 1e-8 for r in inc.table)
    d = mean_entropy(ising, "direct_ratio", 3)
    assert abs(d.value - s) / s < 1e-2
    assert abs(d.table[-1]["aitken"] - s) / s < 1e-3
    assert abs(mean_entropy(ising, "direct_ratio", 12).value - s) / s < 1e-3


def test_mean_entropy_trace_state():
    t = trace_state_model()
    for strat in STRATEGIES:
        assert abs(mean_entropy(t, strat, 3).value - LN2) < 1e-12


def test_closed_form_needs_hypotheses():
    g = custom_model(random_unital_amplitude(2, 2, np.random.default_rng(2)), 2, 2,
                     omega0=np.array([[0.6, 0.1], [0.1, 0.4]]))
    with pytest.raises(StrategyInapplicable):
        mean_entropy(g, "closed_form")
    with pytest.raises(StrategyInapplicable):
        mean_entropy(trace_state_model(), "magic")


def test_k1_chain_matches_markov_entropy_rate():
    P = np.array([[0.9, 0.1], [0.3, 0.7]])
    pi = np.array([0.75, 0.25])
    A = np.diag(np.sqrt(P.reshape(-1))).astype(complex)
    m = custom_model(A, 1, 2, omega0=np.diag(pi))
    rate = -(pi[:, None] * P * np.log(P)).sum()
    h0 = -(pi * np.log(pi)).sum()
    for n in range(6):
        ref = (h0 + n * rate) / (n + 1)
        assert abs(mean_entropy(m, "direct_ratio", n).value - ref) < 1e-12
    assert abs(mean_entropy(m, "closed_form").value - rate) < 1e-12


def test_telescoping_bookkeeping(ising):
    for k in (2, 3):
        for n in range(5):
            c1, c0 = telescoping_coefficients(n, k)
            assert c1 - c0 == 1
            assert c1 == Fraction(k ** (n + 2) - 1, (k - 1) * k ** (n + 1))
    led = build_ledger(ising, 3)
    for n in range(3):
        c1, c0 = telescoping_coefficients(n, 2)
        rhs = float(c1) * led.rows[n + 1]["direct_ratio"] - float(c0) * led.rows[n]["direct_ratio"]
        assert abs(led.rows[n]["dS_n_per_boundary"] - rhs) < 1e-12


def test_aitken_geometric():
    seq = [1 + 0.5**n for n in range(5)]
    assert abs(aitken(seq) - 1) < 1e-14


def test_ledger_columns(ising):
    led = build_ledger(ising, 2)
    assert [r["n"] for r in led.rows] == [0, 1, 2]
    assert set(STRATEGIES) <= set(led.estimates)
    assert all(r["identity_defect"] < 1e-8 for r in led.rows[:2])
    rows = list(led.csv_rows())
    assert len(rows[0]) == len(led.COLUMNS)
