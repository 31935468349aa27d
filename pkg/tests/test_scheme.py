import numpy as np
import pytest

from chns_fem.errors import InvalidParameterError, MissingDataError, NewtonConvergenceError, SpaceMismatchError
from chns_fem.fem import FieldVector
from chns_fem.linear_solver import solve_direct
from chns_fem.mesh import build_structured_mesh
from chns_fem.mms import EquilibriumSolution, TrigonometricSolution
from chns_fem.projections import ProjectionContext, minus_one_norm
from chns_fem.scheme import (
    BACKWARD_EULER,
    CRANK_NICOLSON_AB2,
    InitialData,
    InitMode,
    NewtonSettings,
    PhysParams,
    SchemeState,
    SchemeStepper,
    TimeGrid,
    averages,
    initialize,
    mu_half_initial,
    rho_half_residual,
    step,
)
from chns_fem.scheme import stepper as stepper_module


def _constant_run(ctx, params, value, steps=3, tau=0.05):
    grid    = TimeGrid(tau=tau, steps=steps)
    stepper = SchemeStepper(ctx, params, grid)
    state   = stepper.initialize(InitMode.BOOTSTRAP, InitialData(phi0=ctx.phase_space.constant(value)))

    mus = [state.mu_half_prev]
    for _ in range(steps - 1):
        state, mu, _ = stepper.step(state)
        mus.append(mu)

    return state, mus


def test_averages_example(ctx):
    space = ctx.phase_space
    avg = averages(space.constant(2.0), space.constant(1.0), space.constant(0.0), 1.0)

    np.testing.assert_allclose(avg.delta_tau.coeffs, 1.0)
    for field in (avg.bar, avg.tilde, avg.check):
        np.testing.assert_allclose(field.coeffs, 1.5)


def test_averages_reject_mixed_spaces(ctx):
    with pytest.raises(SpaceMismatchError):
        averages(ctx.phase_space.zeros(), ctx.velocity_space.zeros(), ctx.phase_space.zeros(), 0.1)


def test_coefficient_sets():
    assert CRANK_NICOLSON_AB2.tilde_curr + CRANK_NICOLSON_AB2.tilde_prev == 1.0
    assert CRANK_NICOLSON_AB2.check_new + CRANK_NICOLSON_AB2.check_prev == 1.0
    assert BACKWARD_EULER.bar_new == 1.0 and BACKWARD_EULER.bar_old == 0.0


@pytest.mark.parametrize('kwargs', [{'epsilon': 0.0}, {'eta': -1.0}, {'gamma': float('nan')}])
def test_params_must_be_positive(kwargs):
    with pytest.raises(InvalidParameterError):
        PhysParams(**kwargs)


def test_time_grid():
    grid = TimeGrid.to_time(0.1, 0.5)
    assert grid.steps == 5
    assert grid.time(2.5) == pytest.approx(0.25)

    with pytest.raises(InvalidParameterError):
        TimeGrid(tau=0.1, steps=0)


def test_pure_phase_is_stationary(ctx, params):
    state, mus = _constant_run(ctx, params, 1.0)

    np.testing.assert_allclose(state.phi_curr.coeffs, 1.0, atol=1e-12)
    np.testing.assert_allclose(state.u_curr.coeffs, 0.0, atol=1e-12)
    for mu in mus:
        np.testing.assert_allclose(mu.coeffs, 0.0, atol=1e-10)


def test_constant_state_keeps_its_chemical_potential(ctx, params):
    c = 0.3
    state, mus = _constant_run(ctx, params, c)

    np.testing.assert_allclose(state.phi_curr.coeffs, c, atol=1e-12)
    for mu in mus:
        np.testing.assert_allclose(mu.coeffs, (c ** 3 - c) / params.epsilon, rtol=1e-9)


def test_mu_half_initial_for_constant_levels(ctx, params):
    c   = -0.4
    phi = ctx.phase_space.constant(c)
    mu  = mu_half_initial(phi, phi, params, ctx)

    np.testing.assert_allclose(mu.coeffs, (c ** 3 - c) / params.epsilon, rtol=1e-10)


def test_spinodal_steps_conserve_mass_and_divergence(ctx, params, newton, spinodal_state):
    grid    = TimeGrid(tau=0.01, steps=10)
    stepper = SchemeStepper(ctx, params, grid, newton)
    state   = spinodal_state
    mass0   = state.initial_mass

    assert ctx.mass_of(state.phi_curr) == pytest.approx(mass0, abs=1e-12)

    for _ in range(5):
        state, _, report = stepper.step(state)

        assert report.converged
        assert report.newton_iters <= newton.max_iters
        assert abs(report.mass_drift) <= 1e-9 * ctx.mesh.area
        assert report.divergence_residual <= 1e-10
        assert max(abs(v) for v in report.multipliers) <= 1e-8
        assert report.residual_history[-1] == report.final_residual

    assert state.m == 6
    assert ctx.mass_of(state.phi_curr) == pytest.approx(mass0, abs=1e-9)


def test_velocity_stays_on_dirichlet_space(ctx, params, spinodal_state):
    state, _, _ = step(spinodal_state, params, TimeGrid(tau=0.01, steps=10), None, ctx)
    assert np.all(state.u_curr.coeffs[ctx.velocity_space.dirichlet_mask] == 0.0)


def test_step_requires_two_levels(ctx, params):
    phi   = ctx.phase_space.constant(0.1)
    state = SchemeState(m=0, phi_curr=phi, phi_prev=phi, u_curr=ctx.velocity_space.zeros(),
                        u_prev=ctx.velocity_space.zeros(), p_curr=ctx.pressure_space.zeros())

    with pytest.raises(MissingDataError):
        SchemeStepper(ctx, params, TimeGrid(tau=0.1, steps=2)).step(state)


def test_exact_init_needs_tau_level(ctx, params):
    solution = TrigonometricSolution(params)
    data = InitialData(phi0=solution.phase_field(0.0), u0=solution.velocity_field(0.0),
                       p0=solution.pressure_field(0.0))

    with pytest.raises(MissingDataError):
        initialize(InitMode.EXACT, data, ctx, params, TimeGrid(tau=0.1, steps=2))


def test_exact_init_of_equilibrium(ctx, params):
    grid  = TimeGrid(tau=0.1, steps=2)
    state = initialize(InitMode.EXACT, EquilibriumSolution(params).initial_data(grid.tau), ctx, params, grid)

    assert state.m == 1
    np.testing.assert_allclose(state.phi_curr.coeffs, 1.0, atol=1e-12)
    np.testing.assert_allclose(state.phi_prev.coeffs, 1.0, atol=1e-12)
    np.testing.assert_allclose(rho_half_residual(state, params, grid, ctx).coeffs, 0.0, atol=1e-10)


def test_rho_half_requires_first_level(ctx, params, spinodal_state):
    grid = TimeGrid(tau=0.01, steps=10)
    later, _, _ = SchemeStepper(ctx, params, grid).step(spinodal_state)

    with pytest.raises(MissingDataError):
        rho_half_residual(later, params, grid, ctx)


def test_rho_half_has_zero_mean_without_forcing(ctx, params, spinodal_state):
    grid = TimeGrid(tau=0.01, steps=10)
    rho  = rho_half_residual(spinodal_state, params, grid, ctx)

    assert np.all(np.isfinite(rho.coeffs))
    assert float(ctx.mass_vector @ rho.coeffs) == pytest.approx(0.0, abs=1e-8)


def test_newton_failure_is_reported(ctx, params, spinodal_state):
    stepper = SchemeStepper(ctx, params, TimeGrid(tau=0.01, steps=10), NewtonSettings(tol=1e-30, max_iters=1))

    with pytest.raises(NewtonConvergenceError) as info:
        stepper.step(spinodal_state)

    report = info.value.report
    assert report is not None
    assert not report.converged
    assert report.newton_iters == 1


def test_forced_step_uses_manufactured_forcing(ctx, params):
    solution = TrigonometricSolution(params)
    grid     = TimeGrid(tau=0.05, steps=3)
    stepper  = SchemeStepper(ctx, params, grid)
    state    = stepper.initialize(InitMode.EXACT, solution.initial_data(grid.tau), solution.forcing())

    new_state, mu, report = stepper.step(state, solution.forcing())

    assert report.converged
    assert isinstance(mu, FieldVector)
    assert new_state.m == 2


def test_newton_converges_quadratically(ctx, params, spinodal_state):
    stepper = SchemeStepper(ctx, params, TimeGrid(tau=0.01, steps=10), NewtonSettings(tol=1e-14, max_iters=30))

    try:
        _, _, report = stepper.step(spinodal_state)
    except NewtonConvergenceError as error:
        report = error.report

    history = report.residual_history
    assert history[-1] < history[0]

    for current, following in zip(history, history[1:]):
        if current <= 1e-3 and following > 1e-13:
            assert following <= 1e4 * current ** 2


def test_failed_line_search_keeps_the_iterate(ctx, params, spinodal_state, monkeypatch):
    monkeypatch.setattr(stepper_module, 'solve_direct', lambda system: -solve_direct(system))
    stepper = SchemeStepper(ctx, params, TimeGrid(tau=0.01, steps=10), NewtonSettings(max_backtracks=4))

    with pytest.raises(NewtonConvergenceError) as info:
        stepper.step(spinodal_state)

    report = info.value.report
    assert report.newton_iters == 1
    assert report.residual_history == (report.final_residual,)


def test_rho_half_shrinks_under_refinement(params):
    solution = TrigonometricSolution(params)
    norms    = []

    for n, tau in ((4, 0.1), (8, 0.05), (16, 0.025)):
        ctx   = ProjectionContext(build_structured_mesh(n, n), eta=params.eta)
        grid  = TimeGrid(tau=tau, steps=2)
        state = initialize(InitMode.EXACT, solution.initial_data(tau), ctx, params, grid)
        rho   = rho_half_residual(state, params, grid, ctx, solution.forcing())

        centred = FieldVector(ctx.phase_space, rho.coeffs - ctx.mass_of(rho) / ctx.mesh.area)
        norms.append(minus_one_norm(centred, ctx))

    assert norms[0] > norms[1] > norms[2]
    assert norms[2] <= 0.5 * norms[0]
