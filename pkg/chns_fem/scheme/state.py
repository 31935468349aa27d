"""
Records passed between the stepper, the run loop and the diagnostics.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np

from chns_fem.fem import FieldVector
from chns_fem.projections import ScalarField, VectorField


@dataclass(frozen=True)
class SchemeState:
    """
    Two time levels of the phase field and velocity plus the current pressure.

    Attributes:
        m (int):
            Current step index; `phi_curr` is φ^m.

        phi_curr, phi_prev (FieldVector):
            φ^m and φ^{m−1} in S_h.

        u_curr, u_prev (FieldVector):
            u^m and u^{m−1} in X_h.

        p_curr (FieldVector):
            p^m in S̊_h.

        mu_half_prev (Optional[FieldVector]):
            The last computed μ^{m−½}.

        initial_mass (float):
            (φ^0, 1), the reference for mass conservation.
    """
    m:            int
    phi_curr:     FieldVector
    phi_prev:     FieldVector
    u_curr:       FieldVector
    u_prev:       FieldVector
    p_curr:       FieldVector
    mu_half_prev: Optional[FieldVector] = None
    initial_mass: float = 0.0


@dataclass(frozen=True)
class StepReport:
    """
    Outcome of one time step.

    Attributes:
        step (int):
            Index m+1 of the level that was computed.

        newton_iters (int):
            Newton iterations taken.

        final_residual (float):
            Last scaled residual.

        residual_history (tuple):
            Scaled residual before the first and after every accepted iteration.

        mass_drift (float):
            (φ^{m+1} − φ^0, 1).

        divergence_residual (float):
            max over pressure basis q of |c(ū^{m+½}, q)|.

        multipliers (tuple):
            (λ_φ, λ_p) of the bordered system; both vanish at an exact solution.

        converged (bool):
            Whether the residual reached the tolerance.

        energy_law_residual (float):
            Filled in by the run loop once the energy ledger has seen the step; NaN until then.
    """
    step:                int
    newton_iters:        int
    final_residual:      float
    residual_history:    Tuple[float, ...] = field(default_factory=tuple)
    mass_drift:          float = 0.0
    divergence_residual: float = 0.0
    multipliers:         Tuple[float, float] = (0.0, 0.0)
    converged:           bool = True
    energy_law_residual: float = float('nan')


@dataclass(frozen=True)
class ResidualBlocks:
    """
    The scheme residual of a candidate level, split by equation. Each block is an assembled load vector.

    Attributes:
        phase (np.ndarray):
            Phase transport rows, one per P1 DOF.

        potential (np.ndarray):
            Chemical potential rows, one per P1 DOF.

        momentum (np.ndarray):
            Momentum rows on the free velocity DOFs.

        divergence (np.ndarray):
            Incompressibility rows, one per pressure DOF.

        constraints (np.ndarray):
            Phase-mass and pressure-mean rows.
    """
    phase:       np.ndarray
    potential:   np.ndarray
    momentum:    np.ndarray
    divergence:  np.ndarray
    constraints: np.ndarray


@dataclass(frozen=True)
class Forcing:
    """
    Manufactured right-hand sides, callables of (x, y, t).

    Attributes:
        phi (Callable):
            Forcing of the phase transport equation.

        u (Callable):
            Forcing of the momentum equation, returning a pair.
    """
    phi: Callable
    u:   Callable


class InitMode(Enum):
    """
    EXACT:
        Both starting levels come from projections of analytic data at t = 0 and t = τ.

    BOOTSTRAP:
        Only t = 0 data; level 1 comes from one first-order convex-splitting step.
    """
    EXACT     = 'exact'
    BOOTSTRAP = 'bootstrap'


ScalarInput = Union[FieldVector, ScalarField]
VectorInput = Union[FieldVector, VectorField]


@dataclass(frozen=True)
class InitialData:
    """
    Initial fields. Exact mode needs the three `*_tau` entries; bootstrap mode ignores them.
    """
    phi0:    ScalarInput
    u0:      Optional[VectorInput] = None
    p0:      Optional[ScalarInput] = None
    phi_tau: Optional[ScalarInput] = None
    u_tau:   Optional[VectorInput] = None
    p_tau:   Optional[ScalarInput] = None


__all__ = [
    'Forcing',
    'InitMode',
    'InitialData',
    'ResidualBlocks',
    'SchemeState',
    'StepReport',
]
