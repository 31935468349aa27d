import numpy as np
import pytest

from chns_fem.diagnostics import (
    EnergyLedger,
    double_well_integral,
    energy_E,
    energy_F,
    energy_law_residual,
    laplacian_induction_gap,
    norms,
)
from chns_fem.errors import MissingDataError, NotMeanZeroError, SpaceMismatchError
from chns_fem.fem import FieldVector, chi
from chns_fem.projections import discrete_laplacian
from chns_fem.scheme import SchemeStepper, TimeGrid


def _integral(ctx, values):
    return float(np.einsum('tq,tq->', ctx.phase_space.tables.weights, values))


def test_energy_of_zero_state(ctx, params):
    phi = ctx.phase_space.zeros()
    u   = ctx.velocity_space.zeros()

    assert energy_E(phi, u, params, ctx) == pytest.approx(1.0 / (4 * params.epsilon), rel=1e-13)
    assert energy_E(phi, u, params) == pytest.approx(1.0 / (4 * params.epsilon), rel=1e-13)


def test_pure_phase_has_no_energy(ctx, params):
    for c in (1.0, -1.0):
        phi = ctx.phase_space.constant(c)
        assert double_well_integral(phi) == 0.0
        assert energy_E(phi, ctx.velocity_space.zeros(), params, ctx) == 0.0


def test_modified_energy_reduces_to_free_energy(ctx, params, random_phi):
    u = ctx.velocity_space.zeros()
    assert energy_F(random_phi, random_phi, u, params, ctx) == pytest.approx(energy_E(random_phi, u, params, ctx))


def test_kinetic_energy_scales_with_gamma(ctx, params, rng):
    coeffs = rng.standard_normal(ctx.velocity_space.dof_count)
    coeffs[ctx.velocity_space.dirichlet_mask] = 0.0
    u   = FieldVector(ctx.velocity_space, coeffs)
    phi = ctx.phase_space.constant(1.0)

    kinetic = float(u.coeffs @ (ctx.velocity_mass @ u.coeffs))
    assert energy_E(phi, u, params, ctx) == pytest.approx(kinetic / (2 * params.gamma))


def test_norms_of_constant(ctx):
    result = norms(ctx.phase_space.constant(2.0), ctx)

    assert result.l2 == pytest.approx(2.0, rel=1e-13)
    assert result.h1_semi == pytest.approx(0.0, abs=1e-6)
    assert result.linf_nodal == 2.0
    assert result.minus_one is None


def test_norms_optional_parts(ctx, random_phi):
    result = norms(random_phi, ctx, minus_one=True, laplacian=True)
    lap    = discrete_laplacian(random_phi, ctx).coeffs

    assert result.minus_one > 0
    assert result.discrete_laplacian_l2 == pytest.approx(np.sqrt(lap @ (ctx.mass @ lap)))


def test_norms_reject_unsupported_requests(ctx):
    with pytest.raises(SpaceMismatchError):
        norms(ctx.velocity_space.zeros(), ctx, minus_one=True)

    with pytest.raises(NotMeanZeroError):
        norms(ctx.phase_space.constant(1.0), ctx, minus_one=True)


def test_laplacian_induction_gap_closed_form(ctx, rng):
    for _ in range(10):
        a = FieldVector(ctx.phase_space, rng.standard_normal(ctx.phase_space.dof_count))
        b = FieldVector(ctx.phase_space, rng.standard_normal(ctx.phase_space.dof_count))

        gap = laplacian_induction_gap(a, b, ctx)
        s   = discrete_laplacian(a + b, ctx).coeffs

        assert gap >= -1e-10
        assert gap == pytest.approx(3.0 / 16.0 * (s @ (ctx.mass @ s)), rel=1e-9)


def test_double_well_splitting_identity(ctx, rng):
    space = ctx.phase_space

    for _ in range(1000):
        a, b, c = (space.values_at_quadrature(rng.uniform(-1.5, 1.5, space.dof_count)) for _ in range(3))

        lhs = _integral(ctx, (chi(a, b) - (1.5 * b - 0.5 * c)) * (a - b))
        parts = [
            0.25 * _integral(ctx, (a ** 2 - 1) ** 2 - (b ** 2 - 1) ** 2),
            0.25 * _integral(ctx, (a - b) ** 2 - (b - c) ** 2),
            0.25 * _integral(ctx, (a - 2 * b + c) ** 2),
        ]
        scale = max(1.0, abs(lhs), *map(abs, parts))
        assert abs(lhs - sum(parts)) <= 1e-10 * scale


def test_gradient_average_identity(ctx, rng):
    A = ctx.stiffness
    n = ctx.phase_space.dof_count

    for _ in range(1000):
        a, b, c = (rng.standard_normal(n) for _ in range(3))

        lhs = (0.75 * a + 0.25 * c) @ (A @ (a - b))
        j   = a - 2 * b + c
        rhs = (0.5 * (a @ A @ a - b @ A @ b) + 0.125 * (j @ A @ j)
               + 0.125 * ((a - b) @ A @ (a - b) - (b - c) @ A @ (b - c)))

        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10 * (a @ A @ a + b @ A @ b + c @ A @ c))


def test_energy_law_residual_needs_history(params):
    with pytest.raises(MissingDataError):
        energy_law_residual([], params, 0.1)


def test_ledger_starts_from_level_one(ctx, params, spinodal_state):
    ledger = EnergyLedger(ctx, params, 0.01)

    with pytest.raises(MissingDataError):
        ledger.record(spinodal_state, spinodal_state, spinodal_state.mu_half_prev)

    row = ledger.start(spinodal_state)
    assert row.m == 1
    assert ledger.initial_energy == row.F


def test_energy_law_over_steps(ctx, params, newton, spinodal_state):
    grid    = TimeGrid(tau=0.01, steps=10)
    stepper = SchemeStepper(ctx, params, grid, newton)
    ledger  = EnergyLedger(ctx, params, grid.tau)
    state   = spinodal_state

    ledger.start(state)
    for _ in range(8):
        new_state, mu, _ = stepper.step(state)
        ledger.record(state, new_state, mu)
        state = new_state

    history = ledger.history
    F1      = history[0].F
    bound   = 1e-8 * max(1.0, abs(F1))

    assert len(history) == 9
    assert ledger.max_residual <= bound
    assert energy_law_residual(history, params, grid.tau) == pytest.approx(history[-1].energy_law_residual,
                                                                         abs=1e-12)
    assert all(row.F <= F1 + 1e-10 * max(1.0, abs(F1)) for row in history)

    summary = ledger.summary
    assert summary.energy_monotone
    assert summary.dissipation_monotone
    assert summary.max_laplacian_gap >= 0.0
    assert np.isfinite(summary.dphi_minus_one_sum)
    assert len(ledger.induction_gaps) == 8
    assert ledger.continuous_energy_budget() <= F1 - history[0].E + bound
