import numpy as np
import pytest

from kinetax.dynamics import IntegratorOptions, equilibrium, make_initial
from kinetax.errors import BracketError, InsufficientPointsError
from kinetax.model import ModelConfig, build_coefficients
from kinetax.observables import gini
from kinetax.sweep import (CoupledGrid, QGrid, SweepResult, SweepRow, SweepSpec, TauGrid,
                           compliance_baseline, find_gini_minimum, find_phase_threshold,
                           middle_class_split_report, run_sweep)

BASE = ModelConfig(tau_min=0.2, tau_max=0.4, q=0.2)


def coupled(ratio=1.0, mu=70.0):
    return SweepSpec(base=BASE, mu=mu, axis=CoupledGrid(ratio=ratio))


@pytest.fixture(scope="module")
def ratio1():
    return run_sweep(coupled(1.0))


@pytest.fixture(scope="module")
def ratio2():
    return run_sweep(coupled(2.0))


def test_coupled_grid_points():
    pts = CoupledGrid().points()
    assert len(pts) == 8
    assert pts[0] == (0.4, 0.2) and pts[-1] == (0.75, 0.55)
    assert CoupledGrid(ratio=2).points()[-1] == (0.75, 0.9)


def test_other_axes():
    assert QGrid(0.5, (0.0, 0.1)).points() == [(0.5, 0.0), (0.5, 0.1)]
    assert TauGrid(0.3, (0.4, 0.45)).points() == [(0.4, 0.3), (0.45, 0.3)]


def test_spec_rejects_invalid_grid():
    with pytest.raises(Exception):
        SweepSpec(base=BASE, mu=70, axis=CoupledGrid(ratio=3))  # q above 1
    with pytest.raises(Exception):
        SweepSpec(base=BASE, mu=5, axis=CoupledGrid())


def test_single_point_matches_direct_run(ratio1):
    cfg = BASE.replace(tau_max=0.5, q=0.3)
    rep = equilibrium(make_initial("two_point(70)", cfg.r), build_coefficients(cfg))
    row = ratio1.rows[2]
    assert (row.tau_max, row.q) == (0.5, 0.3)
    assert np.array_equal(row.x_hat, np.asarray(rep.equilibrium))
    assert row.gini == gini(rep.equilibrium, cfg.r)


def test_rows_independent_of_worker_count(ratio1):
    spec = coupled(1.0)
    par = run_sweep(spec, workers=2)
    for a, b in zip(ratio1.rows, par.rows):
        assert np.array_equal(a.x_hat, b.x_hat)
        assert a.gini == b.gini and a.w_tot == b.w_tot


def test_ratio1_gini_decreasing(ratio1):
    assert all(r.converged for r in ratio1.rows)
    G = ratio1.column("gini")
    assert np.all(np.diff(G) < 0)
    m = find_gini_minimum(ratio1)
    assert m.index == 7 and not m.interior


def test_ratio2_interior_minimum(ratio2):
    m = find_gini_minimum(ratio2)
    assert m.interior
    assert 0 < m.index < 7


def _row(g, converged=True):
    return SweepRow(0.4, 0.2, converged, gini=g)


def test_gini_minimum_synthetic():
    res = SweepResult(coupled(), (_row(3.0), _row(1.0), _row(2.0, False), _row(0.5)))
    m = find_gini_minimum(res)
    assert m.index == 3 and not m.interior
    res = SweepResult(coupled(), (_row(3.0), _row(1.0), _row(2.0)))
    assert find_gini_minimum(res).interior
    with pytest.raises(InsufficientPointsError):
        find_gini_minimum(SweepResult(coupled(), (_row(1.0), _row(2.0), _row(3.0, False))))


def test_threshold_degenerate_bracket_returns_midpoint():
    assert find_phase_threshold(coupled(), 1.0, 1.04, tol=0.05) == pytest.approx(1.02)


def test_threshold_bracket_without_transition():
    with pytest.raises(BracketError):
        find_phase_threshold(coupled(), 1.5, 2.0)
    with pytest.raises(BracketError):
        find_phase_threshold(coupled(), 2.0, 1.5)


def test_split_report_against_itself(ratio1):
    rows = middle_class_split_report(ratio1, ratio1.rows[0].x_hat)
    assert rows[0].sign_changes == 0 and set(rows[0].pattern) == {"0"}
    assert len(rows) == 8


def test_compliance_baseline_is_q0_equilibrium():
    spec = coupled()
    base = compliance_baseline(spec)
    cfg = BASE.replace(tau_max=0.4, q=0.0)
    rep = equilibrium(make_initial("two_point(70)", cfg.r), build_coefficients(cfg))
    assert np.array_equal(base, np.asarray(rep.equilibrium))


def test_revenue_decreases_with_evasion():
    spec = SweepSpec(base=BASE, mu=70, axis=QGrid(0.5, tuple(np.linspace(0, 0.9, 10))))
    W = run_sweep(spec).column("w_tot")
    assert np.all(np.diff(W) < 0)


def test_warm_start_agrees_with_cold_start(ratio1):
    spec = SweepSpec(base=BASE, mu=70, axis=CoupledGrid(), warm_start=True,
                     integrator=IntegratorOptions(t_max=100000))
    warm = run_sweep(spec)
    for a, b in zip(ratio1.rows, warm.rows):
        # residual 1e-10 over a slowest rate near 1e-4 leaves ~1e-6 in the state
        assert np.max(np.abs(a.x_hat - b.x_hat)) < 5e-6


def test_failed_point_recorded_in_row():
    spec = SweepSpec(base=BASE, mu=70, axis=CoupledGrid(steps=2),
                     integrator=IntegratorOptions(dt=400, t_max=4000))
    res = run_sweep(spec)
    assert not res.any_converged
    assert all(r.error and r.error.startswith("BlowUpError") for r in res.rows)


def test_split_fixed_tau_max_growing_q():
    spec = SweepSpec(base=ModelConfig(tau_min=0.3, tau_max=0.45), mu=70,
                     axis=QGrid(0.45, (0.1, 1 / 3, 0.5, 2 / 3)))
    report = middle_class_split_report(run_sweep(spec), compliance_baseline(spec))
    for row in report:
        assert row.sign_changes == 2
        assert row.pattern[0] == "+" and row.pattern[-1] == "+"


def test_split_super_rich_loss_on_ratio1(ratio1):
    report = middle_class_split_report(ratio1, compliance_baseline(coupled(1.0)))
    split = [s for s in report if s.sign_changes >= 3 and s.absolute[-1] < 0]
    assert split and split[0].tau_max >= 0.45
