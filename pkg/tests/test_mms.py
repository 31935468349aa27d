import numpy as np
import pytest

from chns_fem.errors import InvalidParameterError, MissingDataError, SpaceMismatchError, UnknownSolutionError
from chns_fem.mesh import build_structured_mesh
from chns_fem.mms import (
    ConvergenceStudy,
    ConvergenceTable,
    EquilibriumSolution,
    ErrorNorms,
    StudyKind,
    TrigonometricSolution,
    builtin_solution,
    collect_history,
    consistency_residuals,
    error_norms,
    registered_solutions,
    run_convergence_study,
)
from chns_fem.mms.study import StudyRow
from chns_fem.projections import ProjectionContext
from chns_fem.scheme import InitMode, PhysParams, TimeGrid


FD_STEP = 1e-5


@pytest.fixture
def points(rng):
    return rng.uniform(0.05, 0.95, size=(2, 25))


@pytest.fixture
def solution(params):
    return TrigonometricSolution(params)


def _fd_gradient(func, x, y, t):
    return ((func(x + FD_STEP, y, t) - func(x - FD_STEP, y, t)) / (2 * FD_STEP),
            (func(x, y + FD_STEP, t) - func(x, y - FD_STEP, t)) / (2 * FD_STEP))


def test_registry():
    assert registered_solutions() == ('default', 'equilibrium')
    assert isinstance(builtin_solution('default'), TrigonometricSolution)

    with pytest.raises(UnknownSolutionError):
        builtin_solution('vortex-sheet')


def test_velocity_vanishes_on_boundary(solution):
    s = np.linspace(0.0, 1.0, 11)
    for x, y in ((0.0 * s, s), (1.0 + 0.0 * s, s), (s, 0.0 * s), (s, 1.0 + 0.0 * s)):
        u1, u2 = solution.u(x, y, 0.7)
        np.testing.assert_allclose(u1, 0.0, atol=1e-12)
        np.testing.assert_allclose(u2, 0.0, atol=1e-12)


def test_velocity_is_divergence_free(solution, points):
    x, y = points
    np.testing.assert_allclose(solution.u_div(x, y, 0.3), 0.0, atol=1e-12)


def test_phase_and_potential_have_no_normal_flux(solution):
    s = np.linspace(0.0, 1.0, 11)
    for x in (0.0, 1.0):
        gx, _ = solution.phi_grad(x + 0.0 * s, s, 0.4)
        mx, _ = solution.mu_grad(x + 0.0 * s, s, 0.4)
        np.testing.assert_allclose(gx, 0.0, atol=1e-12)
        np.testing.assert_allclose(mx, 0.0, atol=1e-9)


def test_pressure_has_zero_mean(solution):
    n = 200
    c = (np.arange(n) + 0.5) / n
    x, y = np.meshgrid(c, c)
    assert solution.p(x, y, 0.9).mean() == pytest.approx(0.0, abs=1e-12)


def test_derivatives_match_finite_differences(solution, points):
    x, y, t = points[0], points[1], 0.6

    for func, grad in ((solution.phi, solution.phi_grad), (solution.mu, solution.mu_grad),
                       (solution.p, solution.p_grad), (solution.phi_lap, solution.phi_lap_grad)):
        fx, fy = _fd_gradient(func, x, y, t)
        gx, gy = grad(x, y, t)
        scale = max(1.0, np.abs(gx).max(), np.abs(gy).max())
        np.testing.assert_allclose(gx, fx, atol=1e-6 * scale)
        np.testing.assert_allclose(gy, fy, atol=1e-6 * scale)

    dt = (solution.phi(x, y, t + FD_STEP) - solution.phi(x, y, t - FD_STEP)) / (2 * FD_STEP)
    np.testing.assert_allclose(solution.phi_t(x, y, t), dt, atol=1e-8)


def test_potential_laplacian_matches_finite_differences(solution, points):
    x, y, t = points[0], points[1], 0.2
    h = 1e-3

    lap = (solution.mu(x + h, y, t) + solution.mu(x - h, y, t) + solution.mu(x, y + h, t)
           + solution.mu(x, y - h, t) - 4.0 * solution.mu(x, y, t)) / h ** 2
    exact = solution.mu_lap(x, y, t)

    np.testing.assert_allclose(exact, lap, atol=1e-4 * max(1.0, np.abs(exact).max()))


def test_velocity_laplacian_matches_finite_differences(solution, points):
    x, y, t = points[0], points[1], 0.5
    h = 1e-3

    def lap(component):
        f = lambda a, b: solution.u(a, b, t)[component]
        return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / h ** 2

    l1, l2 = solution.u_lap(x, y, t)
    scale  = max(1.0, np.abs(l1).max(), np.abs(l2).max())

    np.testing.assert_allclose(l1, lap(0), atol=1e-4 * scale)
    np.testing.assert_allclose(l2, lap(1), atol=1e-4 * scale)


def test_equilibrium_needs_no_forcing(points):
    x, y = points
    eq = EquilibriumSolution(PhysParams(epsilon=0.05))

    np.testing.assert_allclose(eq.f_phi(x, y, 0.3), 0.0)
    for part in eq.f_u(x, y, 0.3):
        np.testing.assert_allclose(part, 0.0)
    np.testing.assert_allclose(eq.mu(x, y, 0.3), 0.0)


def test_forcing_reflects_parameters(points):
    x, y = points
    weak   = TrigonometricSolution(PhysParams(gamma=1.0)).f_u(x, y, 0.4)
    strong = TrigonometricSolution(PhysParams(gamma=2.0)).f_u(x, y, 0.4)

    assert not np.allclose(weak[0], strong[0])


def _table(kind, errors, refinements):
    rows = []
    for e, s in zip(errors, refinements):
        h, tau = (0.25, s) if kind.refines_time else (s, 0.1)
        rows.append(StudyRow(h=h, tau=tau, errors=ErrorNorms(e, e, e, e, 4 * e)))
    return ConvergenceTable(kind=kind, rows=rows)


def test_table_rates():
    table = _table(StudyKind.TEMPORAL, [1e-2, 2.5e-3, 6.25e-4], [0.1, 0.05, 0.025])

    for rate in table.rate('combined'):
        assert rate == pytest.approx(2.0)

    spatial = _table(StudyKind.SPATIAL, [1e-2, 5e-3], [0.25, 0.125])
    assert spatial.rate('phi_linf_h1') == [pytest.approx(1.0)]

    with pytest.raises(KeyError):
        table.rate('pressure')


def test_table_rate_of_vanishing_error_is_nan():
    table = _table(StudyKind.TEMPORAL, [1e-2, 0.0], [0.1, 0.05])
    assert np.isnan(table.rate('combined')[0])


def test_table_rows():
    rows = _table(StudyKind.TEMPORAL, [1e-2, 2.5e-3], [0.1, 0.05]).as_rows()

    assert rows[0][:3] == ['h', 'tau', 'phi_linf_h1']
    assert rows[0][-1] == 'rate_combined'
    assert len(rows) == 3
    assert rows[1][-1] == 'nan'
    assert float(rows[2][-1]) == pytest.approx(2.0)


def test_study_rejects_bad_levels(params):
    solution = TrigonometricSolution(params)

    with pytest.raises(InvalidParameterError):
        ConvergenceStudy(solution, [(0.3, 0.1)], final_time=0.5)

    for kind in (StudyKind.TEMPORAL, StudyKind.TEMPORAL_SELF):
        with pytest.raises(SpaceMismatchError):
            ConvergenceStudy(solution, [(0.25, 0.1), (0.125, 0.05)], kind=kind, final_time=0.5)

    with pytest.raises(InvalidParameterError):
        ConvergenceStudy(solution, [(0.25, 0.1), (0.125, 0.05)], kind=StudyKind.SPATIAL, final_time=0.5)

    with pytest.raises(InvalidParameterError):
        ConvergenceStudy(solution, [], final_time=0.5)


def test_equilibrium_study_has_no_error(params):
    study = ConvergenceStudy(EquilibriumSolution(params), [(0.25, 0.1), (0.125, 0.1)],
                             kind=StudyKind.SPATIAL, final_time=0.3, workers=1)
    table = study.run()

    assert len(table.rows) == 2
    for row in table.rows:
        for value in row.errors:
            assert value <= 1e-10


def test_temporal_study_measures_against_the_exact_solution(params):
    solution = TrigonometricSolution(params)
    table    = run_convergence_study(solution, [(0.25, 0.05), (0.25, 0.025)], final_time=0.1, workers=1)

    assert table.kind is StudyKind.TEMPORAL

    ctx = ProjectionContext(build_structured_mesh(4, 4), eta=params.eta)
    for row in table.rows:
        history = collect_history(solution, ctx, TimeGrid.to_time(row.tau, 0.1), mode=InitMode.EXACT)
        assert tuple(row.errors) == pytest.approx(tuple(error_norms(history, solution, ctx)), rel=1e-12)


def test_temporal_self_study_runs_against_a_reference(params):
    study = ConvergenceStudy(TrigonometricSolution(params), [(0.25, 0.05), (0.25, 0.025)],
                             kind='temporal-self', final_time=0.1, workers=2)
    coarse, fine = study.run().rows

    assert study.kind is StudyKind.TEMPORAL_SELF
    assert fine.errors.combined < coarse.errors.combined


def test_spatial_study_errors_shrink(params):
    study = ConvergenceStudy(TrigonometricSolution(params), [(0.25, 0.05), (0.125, 0.05)],
                             kind=StudyKind.SPATIAL, final_time=0.1, workers=2)
    coarse, fine = study.run().rows

    assert fine.errors.phi_linf_h1 < coarse.errors.phi_linf_h1
    assert fine.errors.combined < coarse.errors.combined


@pytest.mark.slow
def test_temporal_self_rates_are_second_order(params):
    study = ConvergenceStudy(TrigonometricSolution(params), [(1 / 16, 1 / 10), (1 / 16, 1 / 20), (1 / 16, 1 / 40)],
                             kind=StudyKind.TEMPORAL_SELF, final_time=0.5)
    table = study.run()

    rates = table.rate('combined')
    assert rates[-1] >= 1.7
    assert all(np.isfinite(rates))


@pytest.mark.slow
def test_spatial_rates_are_first_order(params):
    study = ConvergenceStudy(TrigonometricSolution(params), [(1 / 4, 1 / 100), (1 / 8, 1 / 100), (1 / 16, 1 / 100)],
                             kind=StudyKind.SPATIAL, final_time=0.05)

    assert study.run().rate('phi_linf_h1')[-1] >= 0.9


def test_rate_shift():
    first  = _table(StudyKind.TEMPORAL, [1e-2, 2.5e-3, 6.25e-4], [0.1, 0.05, 0.025])
    second = _table(StudyKind.TEMPORAL, [2e-2, 5e-3, 1.5e-3], [0.1, 0.05, 0.025])

    assert first.rate_shift(first) == 0.0
    assert second.rate_shift(first) == pytest.approx(2.0 - np.log2(5e-3 / 1.5e-3), rel=1e-12)

    with pytest.raises(InvalidParameterError):
        first.rate_shift(_table(StudyKind.TEMPORAL, [1e-2], [0.1]))


def test_consistency_residual_needs_two_steps(params, ctx):
    with pytest.raises(MissingDataError):
        consistency_residuals(TrigonometricSolution(params), ctx, TimeGrid(tau=0.1, steps=1))


def test_consistency_residual_of_equilibrium_vanishes(params, ctx):
    residuals = consistency_residuals(EquilibriumSolution(params), ctx, TimeGrid(tau=0.1, steps=3))

    assert [r.step for r in residuals] == [2, 3]
    for r in residuals:
        assert r.combined <= 1e-10


def test_consistency_residual_shrinks_under_refinement(params):
    solution = TrigonometricSolution(params)
    largest  = []

    for n, tau in ((4, 0.1), (8, 0.05), (16, 0.025)):
        ctx  = ProjectionContext(build_structured_mesh(n, n), eta=params.eta)
        grid = TimeGrid.to_time(tau, 0.2)
        largest.append(max(r.combined for r in consistency_residuals(solution, ctx, grid)))

    assert largest[0] > largest[1] > largest[2]
    assert np.log2(largest[1] / largest[2]) >= 0.8


@pytest.mark.slow
def test_rates_are_stable_when_final_time_halves(params):
    levels = [(1 / 8, 1 / 40), (1 / 16, 1 / 40)]
    solution = TrigonometricSolution(params)

    full = run_convergence_study(solution, levels, mode=StudyKind.SPATIAL, final_time=0.25)
    half = run_convergence_study(solution, levels, mode=StudyKind.SPATIAL, final_time=0.125)

    assert full.rate_shift(half) < 0.1
