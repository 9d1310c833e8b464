import numpy as np
import pytest

from kinetax.dynamics import (InitialSpec, IntegratorOptions, equilibrium, geometric, integrate,
                              make_initial, step)
from kinetax.errors import BlowUpError, DistributionError, InfeasibleIncomeError
from kinetax.model import ModelConfig, build_coefficients, default_incomes, eval_rhs, mean_income

R = default_incomes(25)
SLOW = ModelConfig(tau_min=0.3, tau_max=0.5, q=0.5)


@pytest.fixture(scope="module")
def slow_coeffs():
    return build_coefficients(SLOW)


@pytest.fixture(scope="module")
def slow_run(slow_coeffs):
    return integrate(make_initial("delta(7)", R), slow_coeffs)


# -- initial conditions -------------------------------------------------------

def test_delta():
    x = np.asarray(make_initial("delta(7)", R))
    assert x[6] == 1.0 and x.sum() == 1.0
    assert mean_income(x, R) == 70.0


def test_two_point():
    x = np.asarray(make_initial(InitialSpec("two_point", 15), R))
    assert x[0] == x[1] == 0.5
    assert np.array_equal(np.asarray(make_initial("two_point(70)", R)),
                          np.asarray(make_initial("delta(7)", R)))


@pytest.mark.parametrize("mu", [10.0, 12.5, 40.0, 70.0, 129.0, 130.0, 131.0, 200.0, 249.9, 250.0])
def test_mu_targeting(mu):
    for kind in ("two_point", "geometric"):
        x = np.asarray(make_initial(InitialSpec(kind, mu), R))
        assert abs(x.sum() - 1.0) <= 1e-15
        assert np.all(x >= 0)
        assert abs(mean_income(x, R) - mu) <= 1e-12 * mu


def test_geometric_shape():
    x = geometric(40.0, R)
    ratios = x[1:] / x[:-1]
    assert np.allclose(ratios, ratios[0], rtol=1e-10)
    assert ratios[0] < 1
    assert np.allclose(geometric(130.0, R), 1 / 25)


@pytest.mark.parametrize("spec", ["two_point(5)", "geometric(251)", "two_point(-1)"])
def test_infeasible_mu(spec):
    with pytest.raises(InfeasibleIncomeError):
        make_initial(spec, R)


@pytest.mark.parametrize("spec", ["explicit(0.5, 0.6)", "delta(26)", "delta(0)", "uniform(3)",
                                  "delta 7"])
def test_invalid_initial(spec):
    with pytest.raises(DistributionError):
        make_initial(spec, R[:2] if "explicit" in spec else R)


def test_initial_spec_round_trip():
    for text in ["delta(7)", "two_point(70.5)", "geometric(40.0)", "explicit(0.25, 0.75)"]:
        spec = InitialSpec.parse(text)
        assert InitialSpec.parse(str(spec)) == spec


# -- single steps -------------------------------------------------------------

def test_step_consistency(slow_coeffs, rng):
    x = rng.dirichlet(np.ones(25))
    f = eval_rhs(x, slow_coeffs)
    errs = []
    for dt in (1e-2, 1e-3):
        errs.append(np.max(np.abs((step(x, slow_coeffs, dt) - x) / dt - f)))
    assert errs[1] < errs[0] / 5
    assert errs[1] < 1e-3 * np.max(np.abs(f)) + 1e-12


def test_step_conservation(rng):
    # empirical drift bound over 1000 random states at the default dt
    for q in (0.0, 0.5):
        c = build_coefficients(ModelConfig(tau_min=0.1, tau_max=0.7, q=q))
        for x in rng.dirichlet(np.ones(25), size=500):
            y = step(x, c, 0.5)
            assert abs(y.sum() - 1.0) <= 1e-12
            mu = mean_income(x, c.r)
            assert abs(mean_income(y, c.r) - mu) <= 1e-10 * mu


def test_step_halving_order(slow_coeffs):
    x0 = np.asarray(make_initial("delta(7)", R))

    def run(dt, horizon=200.0):
        x = x0.copy()
        for _ in range(int(round(horizon / dt))):
            x = step(x, slow_coeffs, dt)
        return x

    ref = run(1 / 16)
    ratio = np.max(np.abs(run(2.0) - ref)) / np.max(np.abs(run(1.0) - ref))
    assert 8 <= ratio <= 32


# -- full integrations --------------------------------------------------------

def test_slow_run_converges(slow_run):
    traj, rep = slow_run
    assert rep.converged
    assert rep.final_residual <= 1e-10
    assert np.all(np.diff(traj.times) > 0)
    assert np.all(traj.states >= -1e-12)
    assert rep.conservation_drift[0] <= 1e-9
    assert rep.conservation_drift[1] <= 1e-8 * 70
    assert rep.t_reached == traj.times[-1]


def test_class_lines_cross(slow_run):
    # transient from a delta start: populations overtake each other
    traj, _ = slow_run
    order = np.argsort(traj.states, axis=1)
    assert not np.all(order == order[-1])


def test_fixed_point_returns_immediately(slow_run, slow_coeffs):
    x_hat = np.asarray(slow_run[1].equilibrium)
    traj, rep = integrate(x_hat, slow_coeffs)
    assert rep.converged and rep.t_reached == 0.0 and len(traj) == 1
    assert np.max(np.abs(eval_rhs(x_hat, slow_coeffs))) <= 1e-10


def test_equilibrium_independent_of_initial_condition(slow_coeffs):
    opts = IntegratorOptions(t_max=200000)
    a = equilibrium(make_initial("delta(7)", R), slow_coeffs, opts)
    b = equilibrium(make_initial("geometric(70)", R), slow_coeffs, opts)
    assert a.converged and b.converged
    assert np.max(np.abs(np.asarray(a.equilibrium) - np.asarray(b.equilibrium))) <= 1e-6


def test_horizon_exhaustion_is_a_status(slow_coeffs):
    traj, rep = integrate(make_initial("delta(7)", R), slow_coeffs,
                          IntegratorOptions(t_max=100, record_every=7))
    assert not rep.converged
    assert rep.t_reached == 100.0
    assert traj.times[-1] == 100.0
    assert rep.final_residual > 1e-10


def test_record_stride(slow_coeffs):
    traj, _ = integrate(make_initial("delta(7)", R), slow_coeffs,
                        IntegratorOptions(t_max=50, dt=0.5, record_every=10))
    assert np.array_equal(traj.times, np.arange(0, 55, 5.0))
    assert traj.diagnostics.shape == (11, 3)


def test_blow_up_raises(slow_coeffs):
    with pytest.raises(BlowUpError) as info:
        integrate(make_initial("delta(7)", R), slow_coeffs, IntegratorOptions(dt=400, t_max=4000))
    assert info.value.trajectory is not None


def test_renormalize_reports_drift_before_correction(slow_coeffs):
    opts = IntegratorOptions(t_max=2000, renormalize=True)
    traj, rep = integrate(make_initial("delta(7)", R), slow_coeffs, opts)
    assert np.all(np.abs(traj.states.sum(axis=1) - 1) <= 1e-15)
    assert np.all(np.abs(traj.diagnostics[:, 0]) <= 1e-12)


def test_rejects_off_simplex_start(slow_coeffs):
    with pytest.raises(DistributionError):
        integrate(np.full(25, 0.1), slow_coeffs)
    with pytest.raises(DistributionError):
        integrate(np.full(5, 0.2), slow_coeffs)


def test_options_validation():
    for bad in (dict(dt=0), dict(t_max=-1), dict(equilibrium_tol=0), dict(record_every=0)):
        with pytest.raises(ValueError):
            IntegratorOptions(**bad)
