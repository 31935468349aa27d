"""
File: runner.py
Description:
    Executes a `RunConfig`: single simulations, manufactured-solution studies, the τ stability ladder and the
    Gronwall self-test. Artefacts land in the configured output directory; a run that does not complete leaves a
    `FAILED` marker next to whatever it managed to write.
"""
# Standard library imports
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

# Third-party imports
import numpy as np

# Inspyre-Softworks imports
from inspy_logger import Loggable

# Package imports
from chns_fem.cli.config import InitKind, RunConfig, RunMode
from chns_fem.cli.output import write_csv, write_energy_csv, write_vtk_legacy
from chns_fem.diagnostics import EnergyReport
from chns_fem.errors import InvariantViolationError, NewtonConvergenceError
from chns_fem.fem import FieldVector
from chns_fem.gronwall import run_selftest
from chns_fem.helpers import format_float
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.mesh import build_structured_mesh
from chns_fem.mms import builtin_solution, run_convergence_study
from chns_fem.projections import ProjectionContext
from chns_fem.scheme import Forcing, InitialData, InitMode, SchemeState, SchemeStepper, StepReport, TimeGrid
from chns_fem.simulation import EXIT_WATCH, Simulation


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('cli.runner')

EXIT_OK        = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG    = 2
EXIT_IO        = 3

FAILURE_MARKER = 'FAILED'

STABILITY_LADDER = (1e-3, 1e-2, 1e-1, 1.0)

STABILITY_COLUMNS = ('tau', 'steps', 'F1', 'F_final', 'max_F_excess', 'max_newton_iters', 'monotone', 'verdict')

RANDOM_AMPLITUDE = 0.05


class RunRecorder(Loggable):
    """
    Keeps track of one run's output directory and marks it as failed unless the run completes.

    Parameters:
        directory (Path):
            Where the artefacts go. Created on `begin()`.
    """
    def __init__(self, directory: Path):
        super().__init__(MOD_LOGGER)

        self.__directory = Path(directory)
        self.__artifacts = []
        self.__completed = False
        self.__failed    = False

    @property
    def directory(self) -> Path:
        return self.__directory

    @property
    def artifacts(self) -> List[Path]:
        return list(self.__artifacts)

    @property
    def completed(self) -> bool:
        return self.__completed

    @property
    def failed(self) -> bool:
        return self.__failed

    @property
    def marker_path(self) -> Path:
        return self.__directory / FAILURE_MARKER

    def begin(self):
        """
        Create the directory, clear a stale marker and arm the exit handler.
        """
        self.__directory.mkdir(parents=True, exist_ok=True)
        if self.marker_path.exists():
            self.marker_path.unlink()

        EXIT_WATCH.watch(self, 'Program exited before the run completed.')
        self.method_logger.debug(f'Recording run into {self.__directory}')

    def artifact(self, path: Path) -> Path:
        self.__artifacts.append(Path(path))
        self.method_logger.info(f'Wrote {path}')
        return path

    def fail(self, reason: str):
        """
        Write the failure marker with `reason` as its content.
        """
        self.__failed = True
        EXIT_WATCH.release(self)
        self.__directory.mkdir(parents=True, exist_ok=True)
        self.marker_path.write_text(reason.rstrip() + '\n')
        self.method_logger.error(f'Run failed: {reason}')

    def complete(self):
        self.__completed = True
        EXIT_WATCH.release(self)

    def on_exit(self, reason: str):
        if not (self.__completed or self.__failed):
            self.fail(reason)


def build_context(config: RunConfig) -> ProjectionContext:
    mesh = build_structured_mesh(config.mesh.nx, config.mesh.ny, config.mesh.rect)
    return ProjectionContext(mesh, eta=config.params.eta)


def random_phase(ctx: ProjectionContext, seed: int, amplitude: float = RANDOM_AMPLITUDE) -> FieldVector:
    """
    Per-vertex uniform values in [−amplitude, amplitude], shifted to nodal mean zero.
    """
    rng    = np.random.default_rng(seed)
    values = rng.uniform(-amplitude, amplitude, size=ctx.phase_space.dof_count)

    return FieldVector(ctx.phase_space, values - values.mean())


def initial_state(config: RunConfig, ctx: ProjectionContext, grid: TimeGrid
                  ) -> Tuple[SchemeState, Optional[Forcing]]:
    """
    The level-1 state for `config.init`, plus the forcing the run needs (manufactured inits only).
    """
    stepper = SchemeStepper(ctx, config.params, grid, config.newton)
    init    = config.init

    if init.kind is InitKind.EXACT_MMS:
        solution = builtin_solution(init.value, config.params)
        forcing  = solution.forcing()
        return stepper.initialize(InitMode.EXACT, solution.initial_data(grid.tau), forcing), forcing

    if init.kind is InitKind.RANDOM_SEED:
        phi0 = random_phase(ctx, init.value)
    else:
        phi0 = ctx.phase_space.constant(init.value)

    return stepper.initialize(InitMode.BOOTSTRAP, InitialData(phi0=phi0)), None


def _snapshot_writer(config: RunConfig, ctx: ProjectionContext, recorder: RunRecorder
                     ) -> Callable[[SchemeState], None]:
    every     = config.output.snapshot_every
    final     = config.grid.steps
    directory = recorder.directory / 'snapshots'

    def write(state: SchemeState):
        if state.m != 1 and state.m % every != 0 and state.m != final:
            return
        path = directory / f'snapshot_{state.m:06d}.vtk'
        write_vtk_legacy(path, ctx.mesh, state.phi_curr, state.mu_half_prev, state.p_curr, state.u_curr,
                         title=f'chns_fem m={state.m} t={format_float(state.m * config.grid.tau)}')
        recorder.artifact(path)

    return write


def _march(config: RunConfig, ctx: ProjectionContext, grid: TimeGrid,
           on_state: Optional[Callable[[SchemeState], None]] = None) -> Simulation:
    state, forcing = initial_state(config, ctx, grid)

    def on_step(new_state: SchemeState, mu_half: FieldVector, report: StepReport, row: EnergyReport):
        if on_state is not None:
            on_state(new_state)

    if on_state is not None:
        on_state(state)

    return Simulation(ctx, config.params, grid, state, newton=config.newton, forcing=forcing, on_step=on_step)


def run_simulate(config: RunConfig, recorder: RunRecorder) -> int:
    log   = MOD_LOGGER.get_child('run_simulate')
    ctx   = build_context(config)
    grid  = config.grid
    fmts  = config.output.formats

    snapshot = _snapshot_writer(config, ctx, recorder) if 'vtk' in fmts else None
    sim = None

    try:
        sim = _march(config, ctx, grid, snapshot)
        sim.start()
    except (NewtonConvergenceError, InvariantViolationError) as exc:
        recorder.fail(f'{type(exc).__name__}: {exc}')
        status = EXIT_NUMERICAL
    else:
        status = EXIT_OK
        log.info(f'Simulation finished: max energy law residual {sim.ledger.max_residual:.3e}')

    if sim is not None and 'csv' in fmts:
        recorder.artifact(write_energy_csv(recorder.directory / 'energy.csv', sim.ledger.history))

    return status


def _sweep_row(tau: float, sim: Optional[Simulation], error: Optional[Exception], tol: float) -> List[str]:
    if sim is None or not sim.ledger.history:
        return [format_float(tau), '0', 'nan', 'nan', 'nan', '0', 'False', f'failed ({type(error).__name__})']

    history  = sim.ledger.history
    F1       = history[0].F
    excess   = max(row.F - F1 for row in history)
    iters    = max((report.newton_iters for report in sim.reports), default=0)
    monotone = excess <= tol * max(1.0, abs(F1))

    if error is not None:
        verdict = f'failed ({type(error).__name__})'
    else:
        verdict = 'stable' if monotone else 'unstable'

    return [format_float(tau), str(sim.steps_taken), format_float(F1), format_float(history[-1].F),
            format_float(excess), str(iters), str(monotone), verdict]


def run_stability_sweep(config: RunConfig, recorder: RunRecorder, ladder=STABILITY_LADDER,
                        tol: float = 1e-10) -> int:
    """
    Repeat the configured simulation for each τ of the ladder with the configured number of steps.
    """
    log  = MOD_LOGGER.get_child('run_stability_sweep')
    ctx  = build_context(config)
    rows = [list(STABILITY_COLUMNS)]
    ok   = True

    for tau in ladder:
        grid  = TimeGrid(tau=tau, steps=config.grid.steps)
        sim   = None
        error = None

        try:
            sim = _march(replace(config, grid=grid), ctx, grid)
            sim.start()
        except (NewtonConvergenceError, InvariantViolationError) as exc:
            error = exc

        row = _sweep_row(tau, sim, error, tol)
        rows.append(row)
        ok = ok and row[-1] == 'stable'
        log.info(f'tau = {tau:g}: {row[-1]}')

        if sim is not None and 'csv' in config.output.formats:
            name = f'energy_tau_{tau:.0e}.csv'
            recorder.artifact(write_energy_csv(recorder.directory / name, sim.ledger.history))

    recorder.artifact(write_csv(recorder.directory / 'stability.csv', rows))

    if not ok:
        recorder.fail('at least one step size did not produce a stable run; see stability.csv')
        return EXIT_NUMERICAL

    return EXIT_OK


def run_mms_study(config: RunConfig, recorder: RunRecorder) -> int:
    study    = config.study
    solution = builtin_solution(study.solution, config.params)

    try:
        table = run_convergence_study(solution, study.levels(), mode=study.kind, final_time=study.final_time,
                                      newton=config.newton)
    except NewtonConvergenceError as exc:
        recorder.fail(f'{type(exc).__name__}: {exc}')
        return EXIT_NUMERICAL

    recorder.artifact(write_csv(recorder.directory / 'rates.csv', table.as_rows()))

    return EXIT_OK


def run_gronwall_selftest(config: RunConfig, recorder: RunRecorder) -> int:
    summary = run_selftest(seed=config.seed)
    recorder.artifact(write_csv(recorder.directory / 'gronwall.csv', summary.as_rows()))

    if not summary.passed:
        recorder.fail('Gronwall property suites reported violations; see gronwall.csv')
        return EXIT_NUMERICAL

    return EXIT_OK


MODES: Dict[RunMode, Callable[[RunConfig, RunRecorder], int]] = {
    RunMode.SIMULATE:          run_simulate,
    RunMode.MMS_STUDY:         run_mms_study,
    RunMode.STABILITY_SWEEP:   run_stability_sweep,
    RunMode.GRONWALL_SELFTEST: run_gronwall_selftest,
}


def run(config: RunConfig) -> int:
    """
    Execute `config` and return the process exit status.

    Returns:
        int:
            0 on success, 1 on a Newton failure, invariant violation or failed check, 3 on an I/O error.
    """
    log      = MOD_LOGGER.get_child('run')
    recorder = RunRecorder(config.output.directory)

    try:
        recorder.begin()
        status = MODES[config.mode](config, recorder)
    except OSError as exc:
        log.error(f'I/O error: {exc}')
        try:
            recorder.fail(f'I/O error: {exc}')
        except OSError:
            pass
        return EXIT_IO

    if status == EXIT_OK:
        recorder.complete()
        log.info(f'{config.mode.value} finished; {len(recorder.artifacts)} artefacts in {recorder.directory}')

    return status


__all__ = [
    'EXIT_CONFIG',
    'EXIT_IO',
    'EXIT_NUMERICAL',
    'EXIT_OK',
    'FAILURE_MARKER',
    'MODES',
    'RunRecorder',
    'STABILITY_COLUMNS',
    'STABILITY_LADDER',
    'build_context',
    'initial_state',
    'random_phase',
    'run',
    'run_gronwall_selftest',
    'run_mms_study',
    'run_simulate',
    'run_stability_sweep',
]
