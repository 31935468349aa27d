import numpy as np
import pytest
import scipy.sparse as sp

from chns_fem.errors import DimensionMismatchError, NotPositiveDefiniteError, SingularSystemError
from chns_fem.linear_solver import LinearSystem, MeanConstraint, residual_norm, solve_direct, solve_spd


def test_direct_diagonal():
    x = solve_direct(LinearSystem(sp.diags([2.0, 4.0]), np.array([2.0, 8.0])))
    np.testing.assert_allclose(x, [1.0, 2.0])


def test_direct_residual_contract(rng):
    n = 30
    A = sp.random(n, n, density=0.2, random_state=1) + 10.0 * sp.eye(n)
    system = LinearSystem(A, rng.standard_normal(n))

    x = solve_direct(system)
    err, scale = residual_norm(system, x)
    assert err <= 1e-12 * scale


def test_direct_singular():
    with pytest.raises(SingularSystemError):
        solve_direct(LinearSystem(sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0])))


def test_direct_empty_column_reports_pivot():
    with pytest.raises(SingularSystemError) as info:
        solve_direct(LinearSystem(sp.csr_matrix([[1.0, 0.0], [2.0, 0.0]]), np.array([1.0, 2.0])))

    assert info.value.pivot == 1


def test_bordered_neumann_problem(ctx, rng):
    f = rng.standard_normal(ctx.phase_space.dof_count)
    f -= (ctx.mass_vector @ f) / ctx.mesh.area
    rhs = ctx.mass @ f

    system = LinearSystem(ctx.stiffness, rhs, constraints=(MeanConstraint(ctx.mass_vector, 0.0),))
    x, lam = np.split(solve_direct(system, return_multipliers=True), [ctx.phase_space.dof_count])

    assert ctx.mass_vector @ x == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(ctx.stiffness @ x, rhs, atol=1e-12)
    assert abs(lam[0]) <= 1e-12


def test_spd_matches_dense(rng):
    B = rng.standard_normal((12, 12))
    A = B @ B.T + 12 * np.eye(12)
    b = rng.standard_normal(12)

    np.testing.assert_allclose(solve_spd(LinearSystem(sp.csr_matrix(A), b)), np.linalg.solve(A, b), rtol=1e-10)


def test_spd_constrained_agrees_with_bordered(ctx, rng):
    rhs = rng.standard_normal(ctx.phase_space.dof_count)
    rhs -= ctx.mass_vector * (rhs.sum() / ctx.mass_vector.sum())
    constraint = MeanConstraint(ctx.mass_vector, 0.3)

    spd    = solve_spd(LinearSystem(ctx.stiffness, rhs, constraints=(constraint,)))
    direct = solve_direct(LinearSystem(ctx.stiffness, rhs, constraints=(constraint,)))

    np.testing.assert_allclose(spd, direct, atol=1e-10)
    assert ctx.mass_vector @ spd == pytest.approx(0.3, rel=1e-12)


def test_spd_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        solve_spd(LinearSystem(sp.diags([-1.0, -2.0]), np.array([1.0, 1.0])))


def test_spd_rejects_unsymmetric():
    with pytest.raises(NotPositiveDefiniteError):
        solve_spd(LinearSystem(sp.csr_matrix([[2.0, 1.0], [0.0, 2.0]]), np.array([1.0, 1.0])))


def test_system_shape_checks():
    with pytest.raises(DimensionMismatchError):
        LinearSystem(sp.eye(3), np.ones(2))

    with pytest.raises(DimensionMismatchError):
        LinearSystem(sp.eye(2), np.ones(2), constraints=(MeanConstraint(np.ones(3)),))
