import math

import numpy as np
import pytest

from metastab.classical import (ClassicalGenerator,
                                classical_backend, classical_evolution,
                                embed_as_lindbladian, l1_induced_distance,
                                l1_norm, rate_matrix_from_edges,
                                rate_matrix_from_json)
from metastab.models import three_state_double_well
from metastab.norms import induced_trace_norm
from metastab.operators import trace_norm
from metastab.regimes import change_measure, scan_metastable, timescales
from metastab.spectral_meta import bound_battery
from metastab.superop import Superoperator, build_liouvillian, spectral_decompose


def symmetric_two_state(a=1.0):
    return ClassicalGenerator(np.array([[-a, a], [a, -a]]))


def test_generator_validation():
    with pytest.raises(ValueError):
        ClassicalGenerator(np.array([[-1.0, 0.5], [0.5, -0.5]]))
    with pytest.raises(ValueError):
        ClassicalGenerator(np.array([[0.0, -0.2], [0.0, 0.2]]))


def test_evolution_identity_and_negative_time():
    gen = symmetric_two_state()
    assert np.allclose(classical_evolution(gen, 0.0), np.eye(2))
    with pytest.raises(ValueError):
        classical_evolution(gen, -0.5)


def test_two_state_closed_form():
    a = 0.8
    gen = symmetric_two_state(a)
    for t in (0.1, 1.0, 6.0):
        got = classical_evolution(gen, t)
        e = math.exp(-2 * a * t)
        want = 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]])
        assert np.max(np.abs(got - want)) < 1e-12


def test_double_well_stochasticity():
    gen = three_state_double_well(1.0, 1e-3)
    for t in (0.5, 40.0, 5000.0):
        P = classical_evolution(gen, t)
        assert np.max(np.abs(P.sum(axis=0) - 1.0)) < 1e-10
        assert P.min() > -1e-10


def test_l1_distance_examples():
    a = 0.6
    gen = symmetric_two_state(a)
    assert l1_induced_distance(gen, 1.3, 1.3) == 0.0
    for t1, t2 in ((0.2, 1.5), (0.9, 4.0)):
        want = abs(math.exp(-2 * a * t1) - math.exp(-2 * a * t2))
        assert l1_induced_distance(gen, t1, t2) == pytest.approx(want, abs=1e-12)


def test_backend_two_state_pipeline():
    a = 1.0
    dyn = classical_backend(symmetric_two_state(a))
    rep = timescales(dyn)
    assert rep.tau_ss == pytest.approx(1.0 / (2 * a), abs=1e-10)
    assert dyn.stationary_distance() == pytest.approx(1.0, abs=1e-12)
    c, _ = change_measure(dyn, 0.25, 1.0)
    assert c == pytest.approx(math.exp(-0.5) - math.exp(-2.0), abs=1e-10)


def test_backend_reducible_chain():
    # two disconnected states: every distribution is stationary
    Q = np.zeros((2, 2))
    dyn = classical_backend(ClassicalGenerator(Q))
    assert dyn.m_ss == 2
    assert np.allclose(dyn.stationary_matrix(), np.eye(2))
    # a reducible three-state chain with two ergodic components
    Q = np.array([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]])
    dyn = classical_backend(ClassicalGenerator(Q))
    assert dyn.m_ss == 2
    P = dyn.stationary_matrix()
    assert np.max(np.abs(P @ P - P)) < 1e-10
    p0 = np.array([1.0, 0.0, 0.0])
    assert np.allclose(P @ p0, [0.5, 0.5, 0.0], atol=1e-10)


def test_double_well_metastable_window():
    fast, slow = 1.0, 1e-3
    dyn = classical_backend(three_state_double_well(fast, slow))
    hits = scan_metastable(dyn, c_delta_max=0.1, ratio=2.0)
    assert hits
    for v in hits:
        assert v.t_start > 1.0 / fast
        assert v.t_end < 1.0 / slow
    lam = np.sort(dyn.eigenvalues().real)
    assert lam[0] < -fast  # fast intra-well relaxation
    assert -2e-2 < lam[1] < -1e-4  # slow inter-well mode
    assert abs(lam[2]) < 1e-12


def test_uniform_chain_has_no_metastable_window():
    Q = np.full((3, 3), 1.0)
    np.fill_diagonal(Q, -2.0)
    dyn = classical_backend(ClassicalGenerator(Q))
    assert scan_metastable(dyn, c_delta_max=0.1, ratio=2.0) == []


def test_double_well_stationary_distribution():
    gen = three_state_double_well(1.0, 1e-3)
    dyn = classical_backend(gen)
    pi = dyn.stationary_matrix()[:, 0]
    assert pi == pytest.approx([1 / 3, 1 / 3, 1 / 3], abs=1e-9)
    assert np.max(np.abs(gen.rates @ pi)) < 1e-12


def test_classical_battery_exact(spin_backend):
    dyn = classical_backend(three_state_double_well(1.0, 1e-3))
    rep = bound_battery(dyn, tol=1e-10)
    assert rep.all_pass, rep.failed_ids()


def test_classical_battery_two_state():
    dyn = classical_backend(symmetric_two_state(1.0))
    rep = bound_battery(dyn, tol=1e-10)
    assert rep.all_pass, rep.failed_ids()


def test_embedding_consistency():
    # classical jumps as a dephasing-free Lindbladian reproduce the exact
    # l1 distances on basis-state (diagonal) inputs
    gen = three_state_double_well(1.0, 5e-2)
    model = embed_as_lindbladian(gen)
    spec = spectral_decompose(build_liouvillian(model))
    dyn = classical_backend(gen)
    for t1, t2 in ((0.4, 2.0), (1.0, 9.0)):
        classical = dyn.distance(t1, t2)
        diff = spec.evolution_matrix(t1) - spec.evolution_matrix(t2)
        best = 0.0
        for j in range(3):
            basis = np.zeros((3, 3), dtype=complex)
            basis[j, j] = 1.0
            from metastab.superop import unvec, vec

            out = unvec(diff @ vec(basis), 3)
            best = max(best, trace_norm(out))
        assert best == pytest.approx(classical, abs=1e-6)
        # the full quantum norm can only exceed the diagonal-restricted value
        opt = induced_trace_norm(Superoperator(3, diff, True, False)).value
        assert opt >= classical - 1e-9


def test_rate_matrix_loaders():
    gen = rate_matrix_from_json('{"rates": [[-1.0, 2.0], [1.0, -2.0]]}')
    assert gen.dim == 2
    text = "0 1 1.5\n1 0 0.5\n# comment\n\n"
    gen = rate_matrix_from_edges(text)
    assert gen.rates[1, 0] == pytest.approx(1.5)
    assert gen.rates[0, 1] == pytest.approx(0.5)
    assert np.max(np.abs(gen.rates.sum(axis=0))) < 1e-12
    with pytest.raises(ValueError):
        rate_matrix_from_edges("0 0 1.0")
    with pytest.raises(ValueError):
        rate_matrix_from_edges("0 1 -2.0")
    with pytest.raises(ValueError):
        rate_matrix_from_edges("0 1\n")
