"""
File: simulation.py
Description:
    The run loop. A `Simulation` owns one `SchemeState` and marches it to the final time of its grid, feeding the
    energy ledger and checking the conservation invariants after every accepted step.
"""
# Standard library imports
import time
import weakref
from dataclasses import replace
from threading import Lock, Thread
from typing import Callable, Dict, List, Optional, Tuple

# Inspyre-Softworks imports
from easy_exit_calls import ExitCallHandler
from inspy_logger import Loggable

# Package imports
from chns_fem.diagnostics import EnergyLedger, EnergyReport
from chns_fem.errors import InvariantViolationError, NewtonConvergenceError, SimulationNotRunningError
from chns_fem.fem import FieldVector
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.projections import ProjectionContext
from chns_fem.scheme import Forcing, NewtonSettings, PhysParams, SchemeState, SchemeStepper, StepReport, TimeGrid


# -- END IMPORTS --

ECH = ExitCallHandler()

MOD_LOGGER = PARENT_LOGGER.get_child('simulation')

StepCallback = Callable[[SchemeState, FieldVector, StepReport, EnergyReport], None]


class ExitWatch:
    """
    Objects to notify when the interpreter exits.

    A single handler is registered with the exit-call handler the first time anything is watched; members join
    while they have work in flight and leave once it is settled. Each member must provide `on_exit(reason)`.

    Parameters:
        handler (ExitCallHandler):
            Where the shared handler is registered.
    """
    def __init__(self, handler: ExitCallHandler):
        self.__handler = handler
        self.__members: Dict[int, Tuple[weakref.ref, str]] = {}
        self.__armed   = False
        self.__lock    = Lock()

    @property
    def armed(self) -> bool:
        return self.__armed

    def __len__(self) -> int:
        return len(self.__members)

    def __contains__(self, member) -> bool:
        entry = self.__members.get(id(member))
        return entry is not None and entry[0]() is member

    def watch(self, member, reason: Optional[str] = None):
        with self.__lock:
            if not self.__armed:
                self.__handler.register_handler(self.notify, kwargs={'reason': 'Program exited.'})
                self.__armed = True

            self.__members[id(member)] = (weakref.ref(member), reason)

    def release(self, member):
        with self.__lock:
            self.__members.pop(id(member), None)

    def notify(self, reason: str):
        """
        Call `on_exit` on every live member with its own reason (or `reason` when it gave none).
        """
        with self.__lock:
            pending = list(self.__members.values())
            self.__members.clear()

        for ref, own in pending:
            member = ref()
            if member is not None:
                member.on_exit(own or reason)


EXIT_WATCH = ExitWatch(ECH)


class Simulation(Loggable):
    """
    March a level-1 state to `grid.steps`.

    Parameters:
        ctx (ProjectionContext):
            Discretisation.

        params (PhysParams):
            ε, η, γ.

        grid (TimeGrid):
            Step size and number of steps.

        state (SchemeState):
            The initialized state at m = 1.

        newton (Optional[NewtonSettings]):
            Newton settings of the stepper.

        forcing (Optional[Forcing]):
            Manufactured forcing; the conservation invariants are only enforced without it.

        on_step (Optional[Callable]):
            Called as `on_step(state, mu_half, step_report, energy_report)` after every accepted step.

        mass_tol (float):
            Allowed |(φ^m − φ^0, 1)| relative to |Ω|.

        energy_tol (float):
            Allowed energy law residual relative to max(1, F¹).

        strict (bool):
            Raise `InvariantViolationError` when an invariant fails (otherwise it is only logged).
    """
    def __init__(
            self,
            ctx:        ProjectionContext,
            params:     PhysParams,
            grid:       TimeGrid,
            state:      SchemeState,
            newton:     Optional[NewtonSettings] = None,
            forcing:    Optional[Forcing] = None,
            on_step:    Optional[StepCallback] = None,
            mass_tol:   float = 1e-9,
            energy_tol: float = 1e-8,
            strict:     bool = True,
    ):
        super().__init__(MOD_LOGGER)

        if not isinstance(state, SchemeState):
            raise TypeError(f'state must be of type `SchemeState`, not {type(state)}')

        if state.m != 1:
            raise ValueError(f'a simulation starts from the level-1 state, got m = {state.m}')

        self.__ctx        = ctx
        self.__grid       = grid
        self.__forcing    = forcing
        self.__on_step    = on_step
        self.__mass_tol   = mass_tol
        self.__energy_tol = energy_tol
        self.__strict     = strict
        self.__stepper    = SchemeStepper(ctx, params, grid, newton)
        self.__ledger     = EnergyLedger(ctx, params, grid.tau)
        self.__state      = state
        self.__reports    = []
        self.__running    = False
        self.__start_time = None
        self.__stop_time  = None
        self.__thread     = None
        self.__stop_reason = None

        self.__ledger.start(state)

    @property
    def grid(self) -> TimeGrid:
        return self.__grid

    @property
    def ledger(self) -> EnergyLedger:
        return self.__ledger

    @property
    def reports(self) -> List[StepReport]:
        return list(self.__reports)

    @property
    def running(self) -> bool:
        """
        Whether the run loop is active.
        """
        return self.__running

    @property
    def state(self) -> SchemeState:
        return self.__state

    @property
    def steps_taken(self) -> int:
        return len(self.__reports)

    @property
    def start_time(self) -> Optional[float]:
        return self.__start_time

    @property
    def stop_time(self) -> Optional[float]:
        """
        (**Read-only property**)

        The time the run was stopped, or `None` while it is still running.
        """
        return self.__stop_time

    @property
    def stop_reason(self) -> Optional[str]:
        return self.__stop_reason

    @property
    def run_time(self) -> float:
        """
        Seconds since `start()`, or between `start()` and `stop()` once stopped.

        Raises:
            SimulationNotRunningError:
                If the simulation was never started.
        """
        if self.__start_time is None:
            raise SimulationNotRunningError('Simulation hasn\'t even been started yet!')

        recent = self.__stop_time if self.__stop_time is not None else time.time()
        return recent - self.__start_time

    @property
    def thread(self) -> Optional[Thread]:
        return self.__thread

    def _check_invariants(self, report: StepReport, row: EnergyReport):
        if self.__forcing is not None:
            return

        log = self.method_logger
        problems = []

        area = self.__ctx.mesh.area
        if abs(report.mass_drift) > self.__mass_tol * area:
            problems.append(f'mass drift {report.mass_drift:.3e} exceeds {self.__mass_tol * area:.1e}')

        bound = self.__energy_tol * max(1.0, abs(self.__ledger.initial_energy))
        if row.energy_law_residual > bound:
            problems.append(f'energy law residual {row.energy_law_residual:.3e} exceeds {bound:.1e}')

        if problems:
            message = f'step {report.step}: ' + '; '.join(problems)
            log.error(message)
            if self.__strict:
                raise InvariantViolationError(message)

    def advance(self) -> StepReport:
        """
        Take one step, update the ledger and check the invariants.
        """
        before = self.__state
        after, mu_half, report = self.__stepper.step(before, self.__forcing)
        row = self.__ledger.record(before, after, mu_half)
        report = replace(report, energy_law_residual=row.energy_law_residual)

        self.__state = after
        self.__reports.append(report)

        self._check_invariants(report, row)

        if self.__on_step is not None:
            self.__on_step(after, mu_half, report, row)

        return report

    def run(self):
        """
        The main loop; called by `start()`.

        Raises:
            RuntimeError:
                If the simulation was not started.
        """
        log = self.method_logger
        if not self.__running:
            log.error('Simulation is not running')
            raise RuntimeError('Simulation is not running. If you want to start it, use the `start` method.')

        log.debug(f'Marching from m = {self.__state.m} to m = {self.__grid.steps}')

        try:
            while self.__running and self.__state.m < self.__grid.steps:
                report = self.advance()

                if self.steps_taken % 10 == 0:
                    log.debug(f'Step count: {self.steps_taken} (last Newton iterations: {report.newton_iters})')
        except (NewtonConvergenceError, InvariantViolationError) as exc:
            self.stop(reason=f'{type(exc).__name__} at m = {self.__state.m}')
            raise

        if self.__running:
            self.stop(reason='Reached final time.')

    def start(self, threaded: bool = False) -> Optional[Thread]:
        """
        Start the run.

        Parameters:
            threaded (bool):
                Run the loop in a daemon thread and return it.

        Raises:
            RuntimeError:
                If the simulation is already running.
        """
        log = self.method_logger

        if self.__running:
            log.warning('Simulation is already running')
            raise RuntimeError('Simulation is already running')

        self.__running    = True
        self.__start_time = time.time()
        self.__stop_time  = None
        log.info(f'Starting simulation: {self.__grid.steps} steps of tau = {self.__grid.tau:g}')

        if threaded:
            EXIT_WATCH.watch(self, 'Program exited.')
            self.__thread = Thread(target=self.run, daemon=True)
            self.__thread.start()
            return self.__thread

        self.run()

    def on_exit(self, reason: str):
        if self.__running:
            self.stop(reason=reason)

    def stop(self, reason: Optional[str] = None):
        """
        Stop the run loop after the current step.

        Raises:
            SimulationNotRunningError:
                If the simulation is not running.
        """
        if not self.__running:
            raise SimulationNotRunningError('Simulation is not running.')

        self.__running     = False
        self.__stop_time   = time.time()
        self.__stop_reason = reason or 'Stopped by caller.'
        EXIT_WATCH.release(self)

        self.method_logger.info(
            f'Simulation stopped after {self.steps_taken} steps ({self.run_time:.2f}s): {self.__stop_reason}'
        )


__all__ = [
    'ECH',
    'EXIT_WATCH',
    'ExitWatch',
    'Simulation',
]
