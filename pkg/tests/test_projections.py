import numpy as np
import pytest

from chns_fem.errors import NotMeanZeroError, SpaceMismatchError
from chns_fem.fem import FieldVector
from chns_fem.mesh import build_structured_mesh
from chns_fem.mms import TrigonometricSolution
from chns_fem.projections import (
    ProjectionContext,
    ScalarField,
    VectorField,
    constant_scalar_field,
    discrete_laplacian,
    inverse_laplacian,
    minus_one_norm,
    ritz_project,
    stokes_project,
    zero_vector_field,
)


def _velocity_l2_error(u_h: FieldVector, exact, ctx: ProjectionContext) -> float:
    space  = ctx.velocity_space
    pts    = space.tables.points
    values = space.values_at_quadrature(u_h.coeffs)
    e1, e2 = exact(pts[..., 0], pts[..., 1])
    diff   = (values[..., 0] - e1) ** 2 + (values[..., 1] - e2) ** 2
    return float(np.sqrt(np.einsum('tq,tq->', space.tables.weights, diff)))


def test_ritz_reproduces_linear_functions(ctx):
    linear = ScalarField(value=lambda x, y: x + 2 * y - 0.3,
                         gradient=lambda x, y: (1.0 + 0.0 * x, 2.0 + 0.0 * y))

    projected = ritz_project(linear, ctx)
    expected  = ctx.phase_space.interpolate(linear.value)

    np.testing.assert_allclose(projected.coeffs, expected.coeffs, atol=1e-10)


def test_ritz_preserves_mean(ctx):
    field = ScalarField(value=lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y) + 0.25,
                        gradient=lambda x, y: (-np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
                                               -np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)))

    assert ctx.mass_of(ritz_project(field, ctx)) == pytest.approx(0.25, abs=1e-12)


def test_ritz_of_constant(ctx):
    np.testing.assert_allclose(ritz_project(constant_scalar_field(0.7), ctx).coeffs, 0.7, atol=1e-12)


def test_stokes_reproduces_pressure_only_state(ctx):
    pressure = ScalarField(value=lambda x, y: x - 0.5, gradient=lambda x, y: (1.0 + 0.0 * x, 0.0 * y))

    u_h, p_h = stokes_project(zero_vector_field(), pressure, ctx)

    np.testing.assert_allclose(u_h.coeffs, 0.0, atol=1e-10)
    np.testing.assert_allclose(p_h.coeffs, ctx.pressure_space.interpolate(pressure.value).coeffs, atol=1e-10)


def test_stokes_projection_is_discretely_divergence_free(ctx):
    solution = TrigonometricSolution()
    u_h, p_h = stokes_project(solution.velocity_field(1.0), solution.pressure_field(1.0), ctx)

    np.testing.assert_allclose(ctx.divergence @ u_h.coeffs, 0.0, atol=1e-10)
    assert ctx.mass_of(p_h) == pytest.approx(0.0, abs=1e-12)
    assert np.all(u_h.coeffs[ctx.velocity_space.dirichlet_mask] == 0.0)


def test_stokes_reproduces_discrete_pairs(ctx):
    solution = TrigonometricSolution()
    u_h, p_h = stokes_project(solution.velocity_field(0.7), solution.pressure_field(0.7), ctx)

    u_again, p_again = stokes_project(u_h, p_h, ctx)

    np.testing.assert_allclose(u_again.coeffs, u_h.coeffs, atol=1e-10)
    np.testing.assert_allclose(p_again.coeffs, p_h.coeffs, atol=1e-10)


def test_stokes_input_kinds(ctx):
    u_h, _ = stokes_project(zero_vector_field(), constant_scalar_field(0.0), ctx)
    other  = ProjectionContext(build_structured_mesh(3, 3))

    with pytest.raises(TypeError):
        stokes_project(u_h, constant_scalar_field(0.0), ctx)

    with pytest.raises(SpaceMismatchError):
        stokes_project(u_h, other.phase_space.zeros(), ctx)


def test_stokes_velocity_error_order():
    solution = TrigonometricSolution()
    errors   = []

    for n in (8, 16):
        ctx = ProjectionContext(build_structured_mesh(n, n), eta=1.0)
        u_h, _ = stokes_project(solution.velocity_field(1.0), solution.pressure_field(1.0), ctx)
        errors.append(_velocity_l2_error(u_h, lambda x, y: solution.u(x, y, 1.0), ctx))

    assert np.log2(errors[0] / errors[1]) >= 1.8


def test_discrete_laplacian_of_constant_vanishes(ctx):
    lap = discrete_laplacian(ctx.phase_space.constant(3.0), ctx)
    np.testing.assert_allclose(lap.coeffs, 0.0, atol=1e-12)


def test_discrete_laplacian_has_zero_mean(ctx, random_phi):
    lap = discrete_laplacian(random_phi, ctx)
    assert float(ctx.mass_vector @ lap.coeffs) == pytest.approx(0.0, abs=1e-10)


def test_discrete_laplacian_is_linear(ctx, random_phi, rng):
    other = FieldVector(ctx.phase_space, rng.uniform(-1.0, 1.0, size=ctx.phase_space.dof_count))
    alpha, beta = 2.5, -0.75

    combined = discrete_laplacian(alpha * random_phi + beta * other, ctx)
    expected = alpha * discrete_laplacian(random_phi, ctx).coeffs + beta * discrete_laplacian(other, ctx).coeffs

    np.testing.assert_allclose(combined.coeffs, expected, atol=1e-10)


def test_inverse_laplacian_definition(ctx, random_phi):
    t_v = inverse_laplacian(random_phi, ctx)

    np.testing.assert_allclose(ctx.stiffness @ t_v.coeffs, ctx.mass @ random_phi.coeffs, atol=1e-12)
    assert float(ctx.mass_vector @ t_v.coeffs) == pytest.approx(0.0, abs=1e-12)


def test_minus_one_norm_is_energy_of_inverse(ctx, random_phi):
    t_v = inverse_laplacian(random_phi, ctx)
    expected = np.sqrt(t_v.coeffs @ (ctx.stiffness @ t_v.coeffs))

    assert minus_one_norm(random_phi, ctx) == pytest.approx(expected, rel=1e-10)


def test_minus_one_norm_rejects_nonzero_mean(ctx):
    with pytest.raises(NotMeanZeroError):
        minus_one_norm(ctx.phase_space.constant(1.0), ctx)


def test_zero_vector_field_helper():
    field = zero_vector_field()
    assert isinstance(field, VectorField)
    assert field.divergence(np.ones(3), np.ones(3)).tolist() == [0.0, 0.0, 0.0]
