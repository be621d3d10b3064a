import math

import numpy as np
import pytest

from metastab.models import random_lindbladian
from metastab.regimes import QuantumBackend, change_measure
from metastab.spectral_meta import (SeparationInconsistencyError, bound_battery,
                                    detect_separation, gap_cut,
                                    spectral_projection_report,
                                    spectrum_change_bound_check)

from conftest import DECAY_FAST, KAPPA


def test_spectrum_change_margins_zero_pair(spin_backend, spin_spectral):
    margins = spectrum_change_bound_check(spin_spectral, spin_backend, 3.0, 3.0)
    assert np.allclose(margins, 0.0, atol=1e-12)


def test_spectrum_change_margins_spin(spin_backend, spin_spectral):
    rng = np.random.default_rng(0)
    for _ in range(6):
        t1, t2 = rng.uniform(0.05, 60.0, 2)
        margins = spectrum_change_bound_check(spin_spectral, spin_backend,
                                              t1, t2)
        assert margins.min() >= -1e-8


def test_spectrum_change_margins_random_d3():
    dyn = QuantumBackend(model=random_lindbladian(3, 2, seed=17), seed=17)
    rng = np.random.default_rng(1)
    for _ in range(8):
        t1, t2 = rng.uniform(0.05, 8.0, 2)
        margins = spectrum_change_bound_check(dyn, dyn, t1, t2)
        assert margins.min() >= -1e-8


def test_limit_pair_reduces_to_stationary_bound(spin_backend, spin_spectral):
    # t1 = 0, t2 -> infinity: the distance reaches ||I - P_ss|| = 1 and each
    # decaying eigenvalue contributes |e^{0 lam}| = 1
    d = spin_backend.distance(0.0, 4000.0)
    lam = spin_spectral.eigenvalues
    for k in range(spin_spectral.m_ss, lam.size):
        assert abs(np.exp(0.0 * lam[k])) <= d + 1e-8


def test_detect_separation_spin_window(spin_backend):
    c, _ = change_measure(spin_backend, 20.0, 40.0)
    rep = detect_separation(spin_backend, 20.0, 40.0, c)
    assert rep.m == 2
    assert rep.classification == ("initial", "initial", "final", "final")
    assert rep.slack_initial >= -1e-9 and rep.slack_final >= -1e-9
    assert rep.ratio_real == pytest.approx(KAPPA / DECAY_FAST, rel=1e-12)
    assert rep.ratio_real <= rep.ratio_real_bound + 1e-12
    assert rep.ratio_imag <= rep.ratio_imag_bound + 1e-12


def test_detect_separation_initial_window(spin_backend):
    t1, t2 = 0.002, 0.004
    c, _ = change_measure(spin_backend, t1, t2)
    rep = detect_separation(spin_backend, t1, t2, c)
    assert rep.m == 4  # everything still in its initial regime


def test_detect_separation_final_window(spin_backend):
    t1, t2 = 1500.0, 3000.0
    c, _ = change_measure(spin_backend, t1, t2)
    rep = detect_separation(spin_backend, t1, t2, c)
    assert rep.m == spin_backend.m_ss


def test_detect_separation_inconsistency(spin_backend):
    # an artificially tiny change measure leaves the slow eigenvalue without
    # a branch, which flags an optimizer underestimate
    with pytest.raises(SeparationInconsistencyError) as err:
        detect_separation(spin_backend, 20.0, 40.0, 1e-6)
    assert err.value.k == 1


def test_detect_separation_validation(spin_backend):
    with pytest.raises(ValueError):
        detect_separation(spin_backend, 20.0, 40.0, 0.3)
    with pytest.raises(ValueError):
        detect_separation(spin_backend, 20.0, 30.0, 0.01)


def test_projection_report_spin(spin_backend):
    rep = spectral_projection_report(spin_backend, 2, 20.0, 40.0)
    assert rep.extended_end == pytest.approx(80.0)
    assert rep.c_delta <= rep.c_delta_rebound + 1e-12
    # exact decomposition of the projection error on the slow/fast split
    for t, drift, fast in zip(rep.times, rep.slow_drift, rep.fast_residual):
        assert drift == pytest.approx(1.0 - math.exp(-KAPPA * t), abs=1e-6)
        assert fast == pytest.approx(math.exp(-DECAY_FAST * t), abs=1e-6)
    assert rep.c_p == pytest.approx(
        max(1.0 - math.exp(-KAPPA * 80.0), math.exp(-DECAY_FAST * 20.0)),
        abs=1e-6)
    assert rep.p_norm == pytest.approx(1.0, abs=1e-8)
    assert rep.projected_generator_norm == pytest.approx(KAPPA, abs=1e-8)
    assert rep.contradiction is None
    for row in rep.rows:
        assert row.passed(1e-8), (row.id, row.t, row.slack)


def test_projection_report_pinning_conditions(spin_backend):
    # a window long and quiet enough for the pinning conditions to hold
    rep = spectral_projection_report(spin_backend, 2, 6.4, 25.6)
    assert rep.c_delta < 0.0997
    assert rep.condition_checks["slow_drift_cond"][2]
    assert rep.condition_checks["fast_residual_cond"][2]
    applicable = {r.id for r in rep.rows if r.applicable}
    for required in ("IP1", "P1", "Pnorm2", "P_better", "IP_better",
                     "C_P_better", "P_lin3"):
        assert required in applicable, required
    for row in rep.rows:
        assert row.passed(1e-8), (row.id, row.t, row.slack)


def test_projection_report_identity_cut_contradiction(spin_backend):
    rep = spectral_projection_report(spin_backend, 4, 20.0, 40.0)
    assert rep.contradiction is not None
    applicable = {r.id for r in rep.rows if r.applicable}
    assert "dist_0_P" not in applicable and "spectral_P" not in applicable
    # the unconditional rows still hold
    for row in rep.rows:
        assert row.passed(1e-8), (row.id, row.t, row.slack)


def test_gap_cut_prefers_largest_gap(spin_backend):
    assert gap_cut(spin_backend) == 2


def test_bound_battery_spin(spin_backend):
    rep = bound_battery(spin_backend, seed=0)
    assert rep.all_pass, rep.failed_ids()
    assert rep.context["window2_verdict"] == "Metastable"
    assert rep.context["m4"] == 2
    ids = set(rep.applicable_ids())
    for required in ("change2_all", "change2_ss", "0_lin", "0_exp", "0_exp2",
                     "ss_exp", "all_lin", "IPss", "dprime_exp", "prime_lin",
                     "tau_prime_ratio", "meta_corr", "change_spectral",
                     "spectral_tau", "C_P3", "C_P_P", "C_P_IP", "Pnorm2",
                     "P_better", "IP_better", "C_P_better", "0_exp_P",
                     "P_lin3", "ss_exp_P", "spectral_P", "dist_0_P",
                     "dist_ss_P", "inherited_exclusion"):
        assert required in ids, required


def test_bound_battery_corrupted_stationary_control(spin_backend):
    clean = bound_battery(spin_backend, seed=0)
    grid = np.array([row.t for row in clean.rows if row.id == "change2_all"])
    # a stationary projection aimed at a tilted state
    bad_state = np.eye(2) / 2 + 0.3 * np.array([[1.0, 0], [0, -1.0]])
    from metastab.superop import vec

    bad = np.outer(vec(bad_state), vec(np.eye(2)).conj())
    rep = bound_battery(spin_backend, grid=grid, seed=0,
                        window=clean.context["window2"],
                        window4=clean.context["window4"],
                        stationary_override=bad)
    failed = set(rep.failed_ids())
    assert "change2_ss" in failed
    stationary_dependent = {"change2_ss", "ss_exp", "change_spectral_ss",
                            "spectral_tau", "tau_order", "tau_prime_ratio",
                            "dist_ss_P", "IPss", "dprime_exp", "prime_lin",
                            "meta_corr", "spectral_tau2", "cdelta_bounded"}
    assert failed <= stationary_dependent, failed - stationary_dependent
    # rows not involving the stationary projection are untouched
    assert "change2_all" not in failed
    assert "0_exp" not in failed
    # and the clean run passes the very same rows
    assert clean.all_pass


def test_battery_csv_rows(spin_backend):
    rep = bound_battery(spin_backend, seed=0)
    rows = list(rep.csv_rows())
    assert rows[0] == ("id", "t", "lhs", "rhs", "slack", "pass")
    assert all(len(r) == 6 for r in rows)
    assert all(r[5] == "1" for r in rows[1:])
