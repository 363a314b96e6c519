"""Time integration: stationarity, energy audits, RK4 self-convergence."""

import numpy as np
import pytest

from cablenet.dynamics import (
    ActuationSchedule,
    DynamicState,
    integrate,
    total_energy,
)
from cablenet.errors import IntegrationError, ValidationError
from cablenet.fixtures import initialize_prestress, saddle_lab


@pytest.fixture(scope="module")
def lab_undamped():
    model, _ = initialize_prestress(saddle_lab(damping_coeff=0.0), ["HC"], [100.0])
    return model


@pytest.fixture(scope="module")
def lab_damped():
    model, _ = initialize_prestress(saddle_lab(damping_coeff=0.05), ["HC"], [100.0])
    return model


def equilibrium_state(model):
    return DynamicState(coords=model.coords[model.topology.free_dof],
                        velocity=np.zeros(len(model.topology.free_dof)))


def perturbed_state(model, scale=1e-3, seed=0):
    rng = np.random.default_rng(seed)
    free = model.topology.free_dof
    return DynamicState(coords=model.coords[free],
                        velocity=scale * rng.standard_normal(len(free)))


def test_schedule_interpolation():
    sched = ActuationSchedule.ramp(np.array([1.0, 2.0]), np.array([2.0, 4.0]), 2.0)
    np.testing.assert_allclose(sched.at(0.0), [1.0, 2.0])
    np.testing.assert_allclose(sched.at(1.0), [1.5, 3.0])
    np.testing.assert_allclose(sched.at(2.0), [2.0, 4.0])
    np.testing.assert_allclose(sched.at(5.0), [2.0, 4.0])  # clamped
    const = ActuationSchedule.constant(np.array([1.0]), 1.0)
    np.testing.assert_allclose(const.at(0.37), [1.0])
    with pytest.raises(ValidationError):
        ActuationSchedule(np.array([0.0, 0.0]), np.ones((2, 1)))
    with pytest.raises(ValidationError):
        ActuationSchedule(np.array([0.0, 1.0]), np.zeros((2, 1)))


def test_equilibrium_is_stationary(lab_undamped):
    model = lab_undamped
    sched = ActuationSchedule.constant(model.spec.rest_length, 1.0)
    hist = integrate(model, equilibrium_state(model), sched, dt=4e-4,
                     t_end=0.2, record_every=50)
    dev = np.abs(hist.coords - model.coords).max()
    span = np.abs(model.coords).max()
    assert dev <= 1e-8 * span
    assert np.abs(hist.velocity).max() <= 1e-6


def test_undamped_energy_conserved(lab_undamped):
    model = lab_undamped
    l0c = model.spec.rest_length
    sched = ActuationSchedule.constant(l0c, 1.0)
    state = perturbed_state(model, scale=5e-3)
    hist = integrate(model, state, sched, dt=1e-4, t_end=0.25, record_every=25)
    energies = np.array([
        total_energy(model, row[model.topology.free_dof], vel, l0c)
        for row, vel in zip(hist.coords, hist.velocity)
    ])
    # reference the drift to the kinetic-energy scale, not the large
    # prestress strain energy stored in the background state
    e0 = energies[0]
    e_min = total_energy(model, model.coords[model.topology.free_dof],
                         np.zeros_like(state.velocity), l0c)
    drift = np.abs(energies - e0).max()
    assert drift <= 1e-4 * (e0 - e_min)


def test_damped_energy_dissipates(lab_damped):
    model = lab_damped
    l0c = model.spec.rest_length
    sched = ActuationSchedule.constant(l0c, 1.0)
    state = perturbed_state(model, scale=5e-3)
    hist = integrate(model, state, sched, dt=2e-4, t_end=0.5, record_every=100)
    free = model.topology.free_dof
    energies = np.array([
        total_energy(model, row[free], vel, l0c)
        for row, vel in zip(hist.coords, hist.velocity)
    ])
    assert energies[-1] < energies[0]
    # monotone within integration tolerance
    assert np.all(np.diff(energies) <= 1e-8 * abs(energies[0]))


def test_rk4_self_convergence(lab_undamped):
    """Halving dt must cut the error ~16x (4th-order accuracy)."""
    model = lab_undamped
    l0c = model.spec.rest_length
    sched = ActuationSchedule.constant(l0c, 1.0)
    state = perturbed_state(model, scale=1e-2, seed=4)
    t_end = 0.05

    final = {}
    # every dt divides t_end exactly so all runs end at the same instant
    for dt in (4e-4, 2e-4, 1e-4, 2.5e-5):
        hist = integrate(model, DynamicState(state.coords.copy(),
                                             state.velocity.copy()),
                         sched, dt=dt, t_end=t_end,
                         record_every=max(int(round(t_end / dt)), 1))
        final[dt] = hist.coords[-1]

    ref = final[2.5e-5]
    err_coarse = np.abs(final[4e-4] - ref).max()
    err_mid = np.abs(final[2e-4] - ref).max()
    err_fine = np.abs(final[1e-4] - ref).max()
    assert err_coarse / err_mid == pytest.approx(16.0, rel=0.5)
    assert err_mid / err_fine == pytest.approx(16.0, rel=0.5)


def test_actuation_ramp_tracks_statics(lab_undamped):
    """A slow rest-length ramp keeps the state near the quasi-static path."""
    from cablenet.statics import form_find

    model = lab_undamped
    l0c0 = model.spec.rest_length
    l0c1 = l0c0.copy()
    dc = model.topology.cluster_index("DC")
    l0c1[dc] -= 0.01  # 1 cm of 7.2 m: a small actuation
    duration = 2.0
    sched = ActuationSchedule.ramp(l0c0, l0c1, duration)
    hist = integrate(model, equilibrium_state(model), sched, dt=4e-4,
                     t_end=duration, record_every=2500)
    static = form_find(model, l0c=l0c1)
    dev = np.abs(hist.coords[-1] - static.coords).max()
    # undamped: the state oscillates about the moving equilibrium
    amplitude = np.abs(static.coords - model.coords).max()
    assert dev <= 0.5 * amplitude


def test_blow_up_raises_integration_error(lab_undamped):
    model = lab_undamped
    free = model.topology.free_dof
    state = DynamicState(coords=model.coords[free],
                         velocity=1e9 * np.ones(len(free)))
    sched = ActuationSchedule.constant(model.spec.rest_length, 1.0)
    from dataclasses import replace

    from cablenet.model import SolverOptions

    # slack mode: cables slacken instead of raising during the blow-up
    model_slack = replace(model, options=SolverOptions(slack=True))
    with pytest.raises(IntegrationError) as err:
        integrate(model_slack, state, sched, dt=1e-3, t_end=1.0)
    assert err.value.exit_code == 3


def test_record_every_subsampling(lab_undamped):
    model = lab_undamped
    sched = ActuationSchedule.constant(model.spec.rest_length, 1.0)
    hist = integrate(model, equilibrium_state(model), sched, dt=1e-3,
                     t_end=0.01, record_every=5)
    assert len(hist.time) == 3  # t = 0, 0.005, 0.01
