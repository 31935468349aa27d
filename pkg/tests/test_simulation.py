import numpy as np
import pytest

from chns_fem import run_simulation
from chns_fem.errors import InvariantViolationError, SimulationNotRunningError
from chns_fem.scheme import SchemeStepper, TimeGrid
from chns_fem.simulation import EXIT_WATCH, ExitWatch, Simulation


@pytest.fixture
def grid():
    return TimeGrid(tau=0.01, steps=6)


@pytest.fixture
def sim(ctx, params, newton, grid, spinodal_state):
    return Simulation(ctx, params, grid, spinodal_state, newton=newton)


def test_run_reaches_final_time(sim, grid):
    assert not sim.running
    with pytest.raises(SimulationNotRunningError):
        _ = sim.run_time

    sim.start()

    assert not sim.running
    assert sim.state.m == grid.steps
    assert sim.steps_taken == grid.steps - 1
    assert sim.stop_reason == 'Reached final time.'
    assert sim.run_time >= 0.0
    assert len(sim.ledger.history) == grid.steps
    assert all(report.converged for report in sim.reports)


def test_run_requires_start(sim):
    with pytest.raises(RuntimeError):
        sim.run()


def test_stop_when_idle_raises(sim):
    with pytest.raises(SimulationNotRunningError):
        sim.stop()


def test_callback_sees_every_step_and_can_stop(ctx, params, newton, grid, spinodal_state):
    seen = []

    def on_step(state, mu_half, report, row):
        seen.append((state.m, row.m, report.step))
        if len(seen) == 3:
            sim.stop(reason='enough')

    sim = Simulation(ctx, params, grid, spinodal_state, newton=newton, on_step=on_step)
    sim.start()

    assert [m for m, _, _ in seen] == [2, 3, 4]
    assert all(state_m == row_m for state_m, row_m, _ in seen)
    assert sim.steps_taken == 3
    assert sim.stop_reason == 'enough'
    assert sim.stop_time is not None


def test_threaded_start(sim, grid):
    thread = sim.start(threaded=True)
    assert EXIT_WATCH.armed
    thread.join(timeout=120)

    assert not thread.is_alive()
    assert sim.thread is thread
    assert sim.state.m == grid.steps
    assert sim not in EXIT_WATCH

    with pytest.raises(SimulationNotRunningError):
        sim.stop()


def test_strict_invariants_abort_the_run(ctx, params, newton, grid, spinodal_state):
    sim = Simulation(ctx, params, grid, spinodal_state, newton=newton, mass_tol=-1.0)

    with pytest.raises(InvariantViolationError):
        sim.start()

    assert not sim.running
    assert sim.steps_taken == 1
    assert sim.stop_reason.startswith('InvariantViolationError')


def test_lenient_invariants_only_log(ctx, params, newton, grid, spinodal_state):
    sim = Simulation(ctx, params, grid, spinodal_state, newton=newton, mass_tol=-1.0, strict=False)
    sim.start()

    assert sim.state.m == grid.steps


def test_simulation_starts_from_level_one(ctx, params, spinodal_state, grid):
    later, _, _ = SchemeStepper(ctx, params, grid).step(spinodal_state)

    with pytest.raises(ValueError):
        Simulation(ctx, params, grid, later)

    with pytest.raises(TypeError):
        Simulation(ctx, params, grid, object())


def test_run_simulation_helper():
    sim = run_simulation(nx=4, ny=4, tau=0.01, steps=5, seed=3)

    history = sim.ledger.history
    assert sim.state.m == 5
    assert len(history) == 5
    assert history[-1].F <= history[0].F + 1e-10 * max(1.0, abs(history[0].F))
    assert np.isfinite(history[-1].linf_phi)


def test_run_simulation_is_reproducible():
    first  = run_simulation(nx=4, ny=4, tau=0.01, steps=4, seed=7)
    second = run_simulation(nx=4, ny=4, tau=0.01, steps=4, seed=7)

    np.testing.assert_array_equal(first.state.phi_curr.coeffs, second.state.phi_curr.coeffs)
    assert [row.F for row in first.ledger.history] == [row.F for row in second.ledger.history]


@pytest.mark.slow
def test_energy_law_on_reference_mesh():
    sim = run_simulation(nx=16, ny=16, tau=0.01, steps=100, seed=0)

    history = sim.ledger.history
    F1      = history[0].F

    assert sim.stop_reason == 'Reached final time.'
    assert sim.ledger.max_residual <= 1e-8 * max(1.0, abs(F1))
    assert all(abs(report.mass_drift) <= 1e-9 for report in sim.reports)
    assert all(report.divergence_residual <= 1e-10 for report in sim.reports)
    assert all(later.F <= earlier.F + 1e-10 * max(1.0, abs(F1)) for earlier, later in zip(history, history[1:]))


class _Handler:
    def __init__(self):
        self.registered = []

    def register_handler(self, func, kwargs=None):
        self.registered.append((func, kwargs))


class _Member:
    def __init__(self):
        self.reasons = []

    def on_exit(self, reason):
        self.reasons.append(reason)


def test_exit_watch_registers_once():
    handler = _Handler()
    watch   = ExitWatch(handler)
    first, second, settled = _Member(), _Member(), _Member()

    for member in (first, second, settled):
        watch.watch(member, 'left early' if member is first else None)

    watch.release(settled)

    assert len(handler.registered) == 1
    assert len(watch) == 2 and settled not in watch

    func, kwargs = handler.registered[0]
    func(**kwargs)

    assert first.reasons == ['left early']
    assert second.reasons == ['Program exited.']
    assert settled.reasons == []
    assert len(watch) == 0
