"""
The convex-splitting time stepper: parameters, state records, averaging operators and the Newton step.
"""
from chns_fem.scheme.averages import BACKWARD_EULER, CRANK_NICOLSON_AB2, Averages, StepCoefficients, averages
from chns_fem.scheme.params import NewtonSettings, PhysParams, TimeGrid
from chns_fem.scheme.state import Forcing, InitialData, InitMode, ResidualBlocks, SchemeState, StepReport
from chns_fem.scheme.stepper import SchemeStepper, initialize, mu_half_initial, rho_half_residual, step


__all__ = [
    'Averages',
    'BACKWARD_EULER',
    'CRANK_NICOLSON_AB2',
    'Forcing',
    'InitMode',
    'InitialData',
    'NewtonSettings',
    'PhysParams',
    'ResidualBlocks',
    'SchemeState',
    'SchemeStepper',
    'StepCoefficients',
    'StepReport',
    'TimeGrid',
    'averages',
    'initialize',
    'mu_half_initial',
    'rho_half_residual',
    'step',
]
