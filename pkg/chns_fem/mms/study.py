"""
File: study.py
Description:
    Error norms against manufactured solutions, convergence-rate tables and the consistency residual of the scheme.

    Four study kinds are supported:

      temporal:
          one mesh, a ladder of τ; errors against the exact solution, exact-mode initialization.

      temporal-self:
          one mesh, a ladder of τ. Errors are measured against a reference run on the same mesh with τ_ref equal to
          a quarter of the smallest τ, so the spatial error cancels and the observed rates are the time-stepping
          order. Both runs start from the same projected t = 0 data and bootstrap level 1.

      spatial:
          one τ, a ladder of meshes; errors against the exact solution, exact-mode initialization.

      coupled:
          τ and h refined together; errors against the exact solution, exact-mode initialization.
"""
# Standard library imports
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

# Third-party imports
import numpy as np

# Inspyre-Softworks imports
from inspy_logger import Loggable

# Package imports
from chns_fem.errors import InvalidParameterError, MissingDataError, SpaceMismatchError
from chns_fem.fem import FieldVector
from chns_fem.helpers import format_float, worker_count
from chns_fem.linear_solver import LinearSystem, solve_spd
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.mesh import UNIT_SQUARE, build_structured_mesh
from chns_fem.mms.solutions import ManufacturedSolution
from chns_fem.projections import ProjectionContext, ritz_project, stokes_project
from chns_fem.scheme import InitialData, InitMode, NewtonSettings, PhysParams, SchemeState, SchemeStepper, TimeGrid
from chns_fem.simulation import Simulation


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('mms.study')

ERROR_COLUMNS = ('phi_linf_h1', 'u_linf_l2', 'mu_l2_h1', 'ubar_l2_h1', 'combined')


class StudyKind(Enum):
    TEMPORAL      = 'temporal'
    TEMPORAL_SELF = 'temporal-self'
    SPATIAL       = 'spatial'
    COUPLED       = 'coupled'

    @property
    def refines_time(self) -> bool:
        """
        Whether the levels share one mesh and differ in τ only.
        """
        return self in (StudyKind.TEMPORAL, StudyKind.TEMPORAL_SELF)


@dataclass
class RunHistory:
    """
    Every level of one run.

    Attributes:
        tau (float):
            Step size.

        phi, u (list):
            φ_h^m and u_h^m for m = 0..M.

        mu_half (list):
            μ_h^{m+½} for m = 0..M−1 (the first entry is the initialization value).
    """
    tau:     float
    phi:     List[FieldVector] = field(default_factory=list)
    u:       List[FieldVector] = field(default_factory=list)
    mu_half: List[FieldVector] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.phi) - 1

    def u_bar(self, m: int) -> FieldVector:
        return 0.5 * self.u[m + 1] + 0.5 * self.u[m]


class ErrorNorms(NamedTuple):
    """
    phi_linf_h1:  max_m ‖∇(φ(t_m) − φ_h^m)‖
    u_linf_l2:    max_m ‖u(t_m) − u_h^m‖
    mu_l2_h1:     (τ Σ_m ‖∇(μ(t_{m+½}) − μ_h^{m+½})‖²)^{½}
    ubar_l2_h1:   (τ Σ_m ‖∇(ū(t_{m+½}) − ū_h^{m+½})‖²)^{½}, ū of the exact solution being the two-level average
    combined:     the sum of the four
    """
    phi_linf_h1: float
    u_linf_l2:   float
    mu_l2_h1:    float
    ubar_l2_h1:  float
    combined:    float


def _scalar_grad_error(v: FieldVector, exact_grad, ctx: ProjectionContext) -> float:
    space  = ctx.phase_space
    pts    = space.tables.points
    gx, gy = exact_grad(pts[..., 0], pts[..., 1])
    diff   = space.gradients_at_quadrature(v.coeffs) - np.stack(
        [np.broadcast_to(gx, pts.shape[:2]), np.broadcast_to(gy, pts.shape[:2])], axis=-1)

    return float(np.einsum('tq,tqd->', space.tables.weights, diff ** 2))


def _vector_l2_error(v: FieldVector, exact, ctx: ProjectionContext) -> float:
    space  = ctx.velocity_space
    pts    = space.tables.points
    e1, e2 = exact(pts[..., 0], pts[..., 1])
    diff   = space.values_at_quadrature(v.coeffs) - np.stack(
        [np.broadcast_to(e1, pts.shape[:2]), np.broadcast_to(e2, pts.shape[:2])], axis=-1)

    return float(np.einsum('tq,tqc->', space.tables.weights, diff ** 2))


def _vector_grad_error(v: FieldVector, exact_grad, ctx: ProjectionContext) -> float:
    space = ctx.velocity_space
    pts   = space.tables.points
    shape = pts.shape[:2]
    grads = exact_grad(pts[..., 0], pts[..., 1])
    exact = np.stack([np.stack([np.broadcast_to(g, shape) for g in row], axis=-1) for row in grads], axis=-2)
    diff  = space.gradients_at_quadrature(v.coeffs) - exact

    return float(np.einsum('tq,tqcd->', space.tables.weights, diff ** 2))


def _averaged(first, second):
    def value(x, y):
        a, b = first(x, y), second(x, y)
        return _combine(a, b)

    return value


def _combine(a, b):
    if isinstance(a, tuple):
        return tuple(_combine(p, q) for p, q in zip(a, b))

    return 0.5 * (a + b)


def error_norms(history: RunHistory, solution: ManufacturedSolution, ctx: ProjectionContext) -> ErrorNorms:
    """
    Total errors of a run against the exact solution.

    Parameters:
        history (RunHistory):
            The discrete levels of the run.

        solution (ManufacturedSolution):
            Exact fields.

        ctx (ProjectionContext):
            Context of the mesh the run used.

    Raises:
        MissingDataError:
            If the history has no steps.
    """
    if history.steps < 1 or len(history.mu_half) < history.steps:
        raise MissingDataError('error norms need at least one completed step with its chemical potential')

    tau = history.tau

    phi_err = max(
        np.sqrt(_scalar_grad_error(history.phi[m], lambda x, y, t=m * tau: solution.phi_grad(x, y, t), ctx))
        for m in range(history.steps + 1)
    )
    u_err = max(
        np.sqrt(_vector_l2_error(history.u[m], lambda x, y, t=m * tau: solution.u(x, y, t), ctx))
        for m in range(history.steps + 1)
    )

    mu_sum, ubar_sum = 0.0, 0.0
    for m in range(history.steps):
        t_half = (m + 0.5) * tau
        mu_sum += _scalar_grad_error(history.mu_half[m], lambda x, y: solution.mu_grad(x, y, t_half), ctx)

        exact_bar = _averaged(lambda x, y: solution.u_grad(x, y, m * tau),
                              lambda x, y: solution.u_grad(x, y, (m + 1) * tau))
        ubar_sum += _vector_grad_error(history.u_bar(m), exact_bar, ctx)

    mu_err   = float(np.sqrt(tau * mu_sum))
    ubar_err = float(np.sqrt(tau * ubar_sum))

    return ErrorNorms(
        phi_linf_h1=float(phi_err),
        u_linf_l2=float(u_err),
        mu_l2_h1=mu_err,
        ubar_l2_h1=ubar_err,
        combined=float(phi_err + u_err + mu_err + ubar_err),
    )


def reference_error_norms(history: RunHistory, reference: RunHistory, ctx: ProjectionContext) -> ErrorNorms:
    """
    Errors of a run against a finer-τ run on the same mesh.

    The reference must take an even whole number `k` of steps per coarse step. μ_ref and ū_ref at a coarse half
    step are the averages of the two reference values adjacent to t_{m+½}.

    Raises:
        InvalidParameterError:
            If the step ratio is not an even integer or the reference is too short.
    """
    ratio = history.tau / reference.tau
    k     = int(round(ratio))
    if k < 2 or k % 2 or abs(ratio - k) > 1e-9 * ratio:
        raise InvalidParameterError(f'reference step ratio must be an even integer, got {ratio!r}')

    if reference.steps < k * history.steps:
        raise InvalidParameterError('reference run does not reach the final time of the coarse run')

    mass, stiff   = ctx.mass, ctx.stiffness
    vmass, vstiff = ctx.velocity_mass, ctx.velocity_stiffness

    def quad(matrix, v):
        return float(v @ (matrix @ v))

    phi_err = max(np.sqrt(quad(stiff, history.phi[m].coeffs - reference.phi[k * m].coeffs))
                  for m in range(history.steps + 1))
    u_err   = max(np.sqrt(quad(vmass, history.u[m].coeffs - reference.u[k * m].coeffs))
                  for m in range(history.steps + 1))

    tau = history.tau
    mu_sum, ubar_sum = 0.0, 0.0
    for m in range(history.steps):
        j      = k * m + k // 2
        mu_ref = 0.5 * (reference.mu_half[j - 1].coeffs + reference.mu_half[j].coeffs)
        u_ref  = 0.5 * (reference.u[k * m].coeffs + reference.u[k * (m + 1)].coeffs)

        mu_sum   += quad(stiff, history.mu_half[m].coeffs - mu_ref)
        ubar_sum += quad(vstiff, history.u_bar(m).coeffs - u_ref)

    mu_err   = float(np.sqrt(tau * mu_sum))
    ubar_err = float(np.sqrt(tau * ubar_sum))

    return ErrorNorms(float(phi_err), float(u_err), mu_err, ubar_err,
                      float(phi_err + u_err + mu_err + ubar_err))


def collect_history(
        solution:   ManufacturedSolution,
        ctx:        ProjectionContext,
        grid:       TimeGrid,
        newton:     Optional[NewtonSettings] = None,
        mode:       InitMode = InitMode.EXACT,
) -> RunHistory:
    """
    Run the forced scheme for `grid.steps` steps and keep every level.
    """
    params  = solution.params
    forcing = solution.forcing()
    stepper = SchemeStepper(ctx, params, grid, newton)

    if mode is InitMode.EXACT:
        data = solution.initial_data(grid.tau)
    else:
        phi0   = ritz_project(solution.phase_field(0.0), ctx)
        u0, p0 = stokes_project(solution.velocity_field(0.0), solution.pressure_field(0.0), ctx)
        data   = InitialData(phi0=phi0, u0=u0, p0=p0)

    state   = stepper.initialize(mode, data, forcing)
    history = RunHistory(tau=grid.tau,
                         phi=[state.phi_prev, state.phi_curr],
                         u=[state.u_prev, state.u_curr],
                         mu_half=[state.mu_half_prev])

    if grid.steps > 1:
        def keep(new_state, mu_half, *_):
            history.phi.append(new_state.phi_curr)
            history.u.append(new_state.u_curr)
            history.mu_half.append(mu_half)

        sim = Simulation(ctx, params, grid, state, newton=newton, forcing=forcing, on_step=keep)
        sim.start()

    return history


@dataclass(frozen=True)
class ConsistencyResidual:
    """
    Dual norms of the scheme residual at one step when every unknown is the projected exact solution.

    Attributes:
        step (int):
            Index m+1 of the level the residual was evaluated at.

        phase, potential, divergence (float):
            ‖M⁻¹r‖_M of the P1 rows.

        momentum (float):
            The same for the free velocity rows.
    """
    step:       int
    phase:      float
    potential:  float
    momentum:   float
    divergence: float

    @property
    def combined(self) -> float:
        return self.phase + self.potential + self.momentum + self.divergence


def _dual_norm(matrix, r: np.ndarray) -> float:
    return float(np.sqrt(max(float(r @ solve_spd(LinearSystem(matrix, r))), 0.0)))


def consistency_residuals(solution: ManufacturedSolution, ctx: ProjectionContext, grid: TimeGrid
                          ) -> List[ConsistencyResidual]:
    """
    Insert the projected exact solution into every second-order step of the forced scheme without solving.

    Levels m−1, m and m+1 are the Ritz projection of φ and the Stokes projection of (u, p); the candidate
    μ^{m+½} is the Ritz projection of μ(t_{m+½}).

    Raises:
        MissingDataError:
            If the grid has fewer than two steps.
    """
    if grid.steps < 2:
        raise MissingDataError('the consistency residual needs at least two steps')

    params  = solution.params
    forcing = solution.forcing()
    stepper = SchemeStepper(ctx, params, grid)

    phi, u, p = [], [], []
    for m in range(grid.steps + 1):
        t = grid.time(m)
        phi.append(ritz_project(solution.phase_field(t), ctx))
        u_m, p_m = stokes_project(solution.velocity_field(t), solution.pressure_field(t), ctx)
        u.append(u_m)
        p.append(p_m)

    mass0 = ctx.mass_of(phi[0])
    out   = []

    for m in range(1, grid.steps):
        state  = SchemeState(m=m, phi_curr=phi[m], phi_prev=phi[m - 1], u_curr=u[m], u_prev=u[m - 1],
                             p_curr=p[m], initial_mass=mass0)
        mu     = ritz_project(solution.mu_field(grid.time(m + 0.5)), ctx)
        blocks = stepper.residual(state, phi[m + 1], mu, u[m + 1], p[m + 1], forcing)

        out.append(ConsistencyResidual(
            step=m + 1,
            phase=_dual_norm(ctx.mass, blocks.phase),
            potential=_dual_norm(ctx.mass, blocks.potential),
            momentum=_dual_norm(ctx.velocity_mass_free, blocks.momentum),
            divergence=_dual_norm(ctx.mass, blocks.divergence),
        ))

    MOD_LOGGER.get_child('consistency_residuals').debug(
        f'Largest consistency residual over {len(out)} steps: {max(r.combined for r in out):.3e}'
    )

    return out


@dataclass(frozen=True)
class StudyRow:
    h:      float
    tau:    float
    errors: ErrorNorms


@dataclass
class ConvergenceTable:
    """
    Errors per refinement level and the observed rates between consecutive levels.

    Attributes:
        kind (StudyKind):
            Which parameter is refined; rates are taken with respect to τ (both temporal kinds) or h (otherwise).

        rows (list):
            One `StudyRow` per level, coarsest first.
    """
    kind: StudyKind
    rows: List[StudyRow] = field(default_factory=list)

    def refinement(self, row: StudyRow) -> float:
        return row.tau if self.kind.refines_time else row.h

    @property
    def rates(self) -> List[Dict[str, float]]:
        """
        log(e_k / e_{k+1}) / log(s_k / s_{k+1}) per error column; NaN where an error vanishes.
        """
        out = []
        for coarse, fine in zip(self.rows, self.rows[1:]):
            scale = np.log(self.refinement(coarse) / self.refinement(fine))
            entry = {}
            for name in ERROR_COLUMNS:
                a, b = getattr(coarse.errors, name), getattr(fine.errors, name)
                entry[name] = float(np.log(a / b) / scale) if a > 0 and b > 0 and scale != 0 else float('nan')
            out.append(entry)

        return out

    def rate(self, column: str) -> List[float]:
        if column not in ERROR_COLUMNS:
            raise KeyError(column)

        return [entry[column] for entry in self.rates]

    def rate_shift(self, other: 'ConvergenceTable') -> float:
        """
        Largest change of any observed rate between this table and `other` (the same ladder run to another T).

        Raises:
            InvalidParameterError:
                If the tables do not have the same number of levels.
        """
        if len(self.rows) != len(other.rows):
            raise InvalidParameterError(
                f'tables need the same number of levels, got {len(self.rows)} and {len(other.rows)}'
            )

        shifts = [abs(mine[name] - theirs[name])
                  for mine, theirs in zip(self.rates, other.rates) for name in ERROR_COLUMNS
                  if np.isfinite(mine[name]) and np.isfinite(theirs[name])]

        return max(shifts, default=0.0)

    def as_rows(self) -> List[List[str]]:
        """
        CSV rows: header, then one row per level with its errors and the rates from the previous level.
        """
        header = ['h', 'tau', *ERROR_COLUMNS, *(f'rate_{name}' for name in ERROR_COLUMNS)]
        rows   = [header]
        rates  = [None, *self.rates]

        for row, rate in zip(self.rows, rates):
            values = [row.h, row.tau, *(getattr(row.errors, name) for name in ERROR_COLUMNS)]
            values += [float('nan')] * len(ERROR_COLUMNS) if rate is None else [rate[n] for n in ERROR_COLUMNS]
            rows.append([format_float(v) for v in values])

        return rows


def _mesh_divisions(h: float) -> int:
    n = int(round(1.0 / h))
    if n < 1 or abs(n * h - 1.0) > 1e-9:
        raise InvalidParameterError(f'h must be 1/n for a whole n, got {h!r}')

    return n


class ConvergenceStudy(Loggable):
    """
    Runs a manufactured-solution study level by level on a thread pool.

    Parameters:
        solution (ManufacturedSolution):
            Exact solution and forcing.

        levels (Sequence[Tuple[float, float]]):
            (h, τ) pairs, coarsest first; h must be 1/n.

        kind (StudyKind):
            Which parameter the levels refine.

        final_time (float):
            T; each τ must divide it.

        newton (Optional[NewtonSettings]):
            Newton settings of every run.

        workers (Optional[int]):
            Thread count (defaults to `worker_count()`).
    """
    def __init__(
            self,
            solution:   ManufacturedSolution,
            levels:     Sequence[Tuple[float, float]],
            kind:       StudyKind = StudyKind.TEMPORAL,
            final_time: float = 0.5,
            newton:     Optional[NewtonSettings] = None,
            workers:    Optional[int] = None,
    ):
        super().__init__(MOD_LOGGER)

        if not isinstance(kind, StudyKind):
            kind = StudyKind(kind)

        levels = [(float(h), float(tau)) for h, tau in levels]
        if len(levels) < 1:
            raise InvalidParameterError('a study needs at least one level')

        for h, tau in levels:
            _mesh_divisions(h)
            TimeGrid.to_time(tau, final_time)

        if kind.refines_time and len({h for h, _ in levels}) != 1:
            raise SpaceMismatchError('a temporal study keeps the mesh fixed; all levels need the same h')

        if kind is StudyKind.SPATIAL and len({tau for _, tau in levels}) != 1:
            raise InvalidParameterError('a spatial study keeps τ fixed; all levels need the same tau')

        self.__solution   = solution
        self.__levels     = levels
        self.__kind       = kind
        self.__final_time = float(final_time)
        self.__newton     = newton
        self.__workers    = workers or worker_count()

    @property
    def kind(self) -> StudyKind:
        return self.__kind

    @property
    def levels(self) -> List[Tuple[float, float]]:
        return list(self.__levels)

    def _grid(self, tau: float) -> TimeGrid:
        grid = TimeGrid.to_time(tau, self.__final_time)
        if abs(grid.final_time - self.__final_time) > 1e-9 * self.__final_time:
            raise InvalidParameterError(f'tau = {tau!r} does not divide T = {self.__final_time!r}')

        return grid

    def _context(self, h: float) -> ProjectionContext:
        n = _mesh_divisions(h)
        return ProjectionContext(build_structured_mesh(n, n, UNIT_SQUARE), eta=self.__solution.params.eta)

    def _run(self, h: float, tau: float, mode: InitMode) -> Tuple[ProjectionContext, RunHistory]:
        ctx     = self._context(h)
        history = collect_history(self.__solution, ctx, self._grid(tau), self.__newton, mode)
        self.class_logger.info(f'Level h = {h:g}, tau = {tau:g} finished ({history.steps} steps)')
        return ctx, history

    def _level(self, h: float, tau: float, reference: Optional[RunHistory]) -> StudyRow:
        if reference is None:
            ctx, history = self._run(h, tau, InitMode.EXACT)
            errors = error_norms(history, self.__solution, ctx)
        else:
            ctx, history = self._run(h, tau, InitMode.BOOTSTRAP)
            errors = reference_error_norms(history, reference, ctx)

        return StudyRow(h=h, tau=tau, errors=errors)

    def run(self) -> ConvergenceTable:
        """
        Run every level and assemble the table.

        Raises:
            NewtonConvergenceError:
                If any level fails; the whole study is aborted.
        """
        log = self.method_logger
        reference = None

        if self.__kind is StudyKind.TEMPORAL_SELF:
            h = self.__levels[0][0]
            tau_ref = min(tau for _, tau in self.__levels) / 4.0
            log.info(f'Temporal study: reference run with tau = {tau_ref:g} on h = {h:g}')
            _, reference = self._run(h, tau_ref, InitMode.BOOTSTRAP)

        with ThreadPoolExecutor(max_workers=max(1, min(self.__workers, len(self.__levels)))) as pool:
            futures = [pool.submit(self._level, h, tau, reference) for h, tau in self.__levels]
            rows    = [future.result() for future in futures]

        table = ConvergenceTable(kind=self.__kind, rows=rows)

        for entry in table.rates:
            log.info('Observed rates: ' + ', '.join(f'{k}={v:.3f}' for k, v in entry.items()))

        return table


def run_convergence_study(
        solution:   ManufacturedSolution,
        levels:     Sequence[Tuple[float, float]],
        params:     Optional[PhysParams] = None,
        mode:       StudyKind = StudyKind.TEMPORAL,
        final_time: float = 0.5,
        newton:     Optional[NewtonSettings] = None,
        workers:    Optional[int] = None,
) -> ConvergenceTable:
    """
    Functional form of `ConvergenceStudy`.

    Parameters:
        params (Optional[PhysParams]):
            When given and different from `solution.params`, the solution is rebuilt for these parameters.
    """
    if params is not None and params != solution.params:
        solution = type(solution)(params)

    return ConvergenceStudy(solution, levels, mode, final_time, newton, workers).run()


__all__ = [
    'ConsistencyResidual',
    'ConvergenceStudy',
    'ConvergenceTable',
    'ERROR_COLUMNS',
    'ErrorNorms',
    'RunHistory',
    'StudyKind',
    'StudyRow',
    'collect_history',
    'consistency_residuals',
    'error_norms',
    'reference_error_norms',
    'run_convergence_study',
]
