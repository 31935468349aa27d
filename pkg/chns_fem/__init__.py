"""
File: __init__.py
Author: Inspyre-Softworks
Description:
    Energy-stable mixed finite element solver for the Cahn-Hilliard-Navier-Stokes system on rectangles.
"""
# Standard library imports
from typing import Optional

# Package imports
from chns_fem.cli.runner import random_phase
from chns_fem.errors import *
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.mesh import UNIT_SQUARE, Rect, build_structured_mesh
from chns_fem.projections import ProjectionContext
from chns_fem.scheme import InitialData, InitMode, NewtonSettings, PhysParams, SchemeStepper, TimeGrid
from chns_fem.simulation import Simulation


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('main')


def run_simulation(
        nx:     int = 16,
        ny:     int = 16,
        tau:    float = 0.01,
        steps:  int = 100,
        params: Optional[PhysParams] = None,
        seed:   int = 0,
        newton: Optional[NewtonSettings] = None,
        rect:   Rect = UNIT_SQUARE,
) -> Simulation:
    """
    Run an unforced spinodal simulation from a seeded random phase field.

    Parameters:
        nx, ny (int):
            Structured mesh divisions.

        tau (float):
            Time step.

        steps (int):
            Number of steps.

        params (Optional[PhysParams]):
            ε, η, γ (defaults to `PhysParams()`).

        seed (int):
            Seed of the initial field.

        newton (Optional[NewtonSettings]):
            Newton settings.

        rect (Rect):
            The domain.

    Returns:
        Simulation:
            The finished (or interrupted) simulation; its ledger holds the energy history.
    """
    params = params or PhysParams()
    ctx    = ProjectionContext(build_structured_mesh(nx, ny, rect), eta=params.eta)
    grid   = TimeGrid(tau=tau, steps=steps)

    state = SchemeStepper(ctx, params, grid, newton).initialize(
        InitMode.BOOTSTRAP, InitialData(phi0=random_phase(ctx, seed))
    )

    sim = Simulation(ctx, params, grid, state, newton=newton)

    try:
        sim.start()
    except KeyboardInterrupt:
        sim.stop(reason='Interrupted by user.')

    return sim
