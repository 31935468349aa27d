import numpy as np
import pytest

from chns_fem.fem import FieldVector
from chns_fem.mesh import build_structured_mesh
from chns_fem.projections import ProjectionContext
from chns_fem.scheme import InitialData, InitMode, NewtonSettings, PhysParams, SchemeStepper, TimeGrid


@pytest.fixture
def coarse_mesh():
    return build_structured_mesh(4, 4)


@pytest.fixture
def ctx(coarse_mesh):
    return ProjectionContext(coarse_mesh, eta=1.0)


@pytest.fixture
def params():
    return PhysParams(epsilon=0.1, eta=1.0, gamma=1.0)


@pytest.fixture
def newton():
    return NewtonSettings(tol=1e-11, max_iters=30)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_phi(ctx, rng):
    """
    Spinodal-type P1 phase field with zero mean.
    """
    values = rng.uniform(-0.05, 0.05, size=ctx.phase_space.dof_count)
    return FieldVector(ctx.phase_space, values - (ctx.mass_vector @ values) / ctx.mesh.area)


@pytest.fixture
def spinodal_state(ctx, params, newton, random_phi):
    """
    Level-1 state of an unforced run with τ = 0.01 on the coarse mesh.
    """
    grid = TimeGrid(tau=0.01, steps=10)
    return SchemeStepper(ctx, params, grid, newton).initialize(InitMode.BOOTSTRAP, InitialData(phi0=random_phi))
