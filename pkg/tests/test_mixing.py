import numpy as np
import pytest

from qmstree.errors import InvalidChildIndex, NotCentral
from qmstree.ising import SX, SZ, ising_model
from qmstree.mixing import (
    RangeAlgebraDescription,
    basis_projections,
    correlation_decay,
    default_projections,
    degenerate_amplitude,
    induced_map,
    peripheral_spectrum,
    pi_matrix,
    single_site_marginal,
    stationary_vector,
    trivial_projections,
)
from qmstree.model import custom_model, trace_state_model


@pytest.fixture(scope="module")
def ising():
    return ising_model(0.1, 0.5)


def test_ising_pi_positive_and_stochastic(ising):
    projs = default_projections(ising.rule)
    assert projs.r == 2
    for j in (1, 2):
        pi = pi_matrix(ising.rule, j, projs)
        assert pi.strictly_positive
        assert np.abs(pi.entries.sum(axis=1) - 1).max() < 1e-12
        assert pi.relation_defect < 1e-12


def test_ising_pi_matches_weights(ising):
    # pi[s, s'] = P(child 1 = s' | parent = s) from |K|^2
    w = np.abs(np.diag(ising.rule.amplitude)) ** 2
    cond = w.reshape(2, 2, 2).sum(axis=2)
    pi = pi_matrix(ising.rule, 1, basis_projections(2)).entries
    assert np.abs(pi - cond).max() < 1e-14


def test_ising_peripheral_simple(ising):
    pi = pi_matrix(ising.rule, 1, default_projections(ising.rule)).entries
    rep = peripheral_spectrum(pi, 1e-9)
    assert rep.simple
    assert abs(rep.second_modulus - abs(pi[0, 0] - pi[1, 0])) < 1e-12
    stat = stationary_vector(pi)
    marg = single_site_marginal(ising, default_projections(ising.rule))
    assert np.abs(stat - marg).max() < 1e-12


def test_full_induced_map(ising):
    im = induced_map(ising.rule, 1)
    assert im.residual < 1e-12
    rep = peripheral_spectrum(im.matrix)
    assert rep.simple


def test_correlations_decay_geometrically(ising):
    pi = pi_matrix(ising.rule, 1, default_projections(ising.rule)).entries
    rate = peripheral_spectrum(pi).second_modulus
    rows = correlation_decay(ising, SZ, SZ, 3, rate)
    c = [r["correlation"] for r in rows]
    assert c[0] > c[1] > c[2] > 0
    for r in rows:
        assert r["bound"] / 3 <= r["correlation"] <= 3 * r["bound"]


def test_degenerate_rules():
    copy = custom_model(degenerate_amplitude("copy"), 2, 2)
    assert copy.rule.is_unital()
    pi = pi_matrix(copy.rule, 1, default_projections(copy.rule))
    assert np.abs(pi.entries - np.eye(2)).max() < 1e-14
    rep = peripheral_spectrum(pi.entries)
    assert len(rep.peripheral) == 2 and not rep.simple
    flip = custom_model(degenerate_amplitude("flip"), 2, 2)
    rep = peripheral_spectrum(pi_matrix(flip.rule, 2, basis_projections(2)).entries)
    assert sorted(np.round(rep.peripheral.real, 12)) == [-1.0, 1.0]


def test_trace_state():
    t = trace_state_model()
    projs = default_projections(t.rule)
    assert projs.r == 1
    pi = pi_matrix(t.rule, 1, projs)
    assert np.abs(pi.entries - [[1.0]]).max() < 1e-14
    assert peripheral_spectrum(pi.entries).simple
    im = induced_map(t.rule, 2)
    # P_j(b) = Tr(b)/d 1
    assert np.abs(im.matrix - np.outer([1, 0, 0, 1], [1, 0, 0, 1]) / 2).max() < 1e-14
    rows = correlation_decay(t, SZ, SZ, 3)
    assert max(r["correlation"] for r in rows) < 1e-15


def test_not_central():
    ising = ising_model(0.1, 0.5)
    v = np.array([1, 1]) / np.sqrt(2)
    p = np.outer(v, v).astype(complex)
    with pytest.raises(NotCentral):
        pi_matrix(ising.rule, 1, RangeAlgebraDescription((p, np.eye(2) - p)))


def test_bad_inputs():
    t = trace_state_model()
    with pytest.raises(InvalidChildIndex):
        induced_map(t.rule, 3)
    with pytest.raises(InvalidChildIndex):
        pi_matrix(t.rule, 0, trivial_projections(2))
    with pytest.raises(ValueError):
        RangeAlgebraDescription((np.diag([1.0, 0.0]),))
    with pytest.raises(ValueError):
        RangeAlgebraDescription((SX, np.eye(2) - SX))
