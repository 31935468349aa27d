"""
File: spaces.py
Description:
    Finite element spaces (degree-of-freedom maps) and the coefficient vectors that live on them.

    S_h   -> P1_SCALAR                (phase field, chemical potential)
    S̊_h   -> P1_SCALAR_MEAN_ZERO      (pressure)
    X_h   -> P2_VECTOR_DIRICHLET      (velocity, component-major numbering)
"""
# Standard library imports
from __future__ import annotations

from enum import Enum
from typing import Callable, Union

# Third-party imports
import numpy as np

# Package imports
from chns_fem.errors import DimensionMismatchError, SpaceMismatchError
from chns_fem.fem.elements import ElementTables, element_tables
from chns_fem.mesh import Mesh


# -- END IMPORTS --


class SpaceKind(Enum):
    P1_SCALAR           = 'P1_scalar'
    P1_SCALAR_MEAN_ZERO = 'P1_scalar_mean_zero'
    P2_VECTOR_DIRICHLET = 'P2_vector_dirichlet'


class FunctionSpace:
    """
    A Lagrange finite element space over a mesh.

    Vector spaces number their degrees of freedom component-major: DOF `c * n + j` is component `c` of scalar
    DOF `j`, where `n` is the scalar DOF count.

    Parameters:
        kind (SpaceKind):
            Which of the three supported spaces to build.

        mesh (Mesh):
            The triangulation the space lives on.
    """
    def __init__(self, kind: SpaceKind, mesh: Mesh):
        if not isinstance(kind, SpaceKind):
            raise TypeError(f'kind must be of type `SpaceKind`, not {type(kind)}')

        if not isinstance(mesh, Mesh):
            raise TypeError(f'mesh must be of type `Mesh`, not {type(mesh)}')

        self.__kind = kind
        self.__mesh = mesh

        nv = mesh.num_vertices

        if kind is SpaceKind.P2_VECTOR_DIRICHLET:
            self.__cell_dofs   = np.hstack([mesh.triangles, nv + mesh.triangle_edges])
            self.__scalar_dofs = nv + mesh.num_edges
            self.__components  = 2
            scalar_coords      = np.vstack([mesh.vertices, mesh.edge_midpoints])
            scalar_mask        = np.zeros(self.__scalar_dofs, dtype=bool)
            scalar_mask[mesh.boundary_vertices] = True
            scalar_mask[nv + mesh.boundary_edge_ids] = True
        else:
            self.__cell_dofs   = mesh.triangles
            self.__scalar_dofs = nv
            self.__components  = 1
            scalar_coords      = mesh.vertices
            scalar_mask        = np.zeros(nv, dtype=bool)

        self.__scalar_coords  = scalar_coords
        self.__dirichlet_mask = np.tile(scalar_mask, self.__components)
        self.__dirichlet_mask.setflags(write=False)
        self.__free_dofs      = np.flatnonzero(~self.__dirichlet_mask)

    @property
    def kind(self) -> SpaceKind:
        return self.__kind

    @property
    def mesh(self) -> Mesh:
        return self.__mesh

    @property
    def cell_dofs(self) -> np.ndarray:
        """
        Scalar local-to-global map, shape (T, 3) for P1 or (T, 6) for P2.
        """
        return self.__cell_dofs

    @property
    def scalar_dof_count(self) -> int:
        return self.__scalar_dofs

    @property
    def num_components(self) -> int:
        return self.__components

    @property
    def dof_count(self) -> int:
        return self.__scalar_dofs * self.__components

    @property
    def scalar_dof_coords(self) -> np.ndarray:
        return self.__scalar_coords

    @property
    def dof_coords(self) -> np.ndarray:
        """
        Coordinates of every DOF, shape (dof_count, 2).
        """
        return np.tile(self.__scalar_coords, (self.__components, 1))

    @property
    def dirichlet_mask(self) -> np.ndarray:
        return self.__dirichlet_mask

    @property
    def free_dofs(self) -> np.ndarray:
        return self.__free_dofs

    @property
    def mean_zero(self) -> bool:
        return self.__kind is SpaceKind.P1_SCALAR_MEAN_ZERO

    @property
    def is_vector(self) -> bool:
        return self.__components == 2

    @property
    def is_p1(self) -> bool:
        return self.__kind is not SpaceKind.P2_VECTOR_DIRICHLET

    @property
    def tables(self) -> ElementTables:
        return element_tables(self.__mesh)

    def basis_values(self) -> np.ndarray:
        """
        Reference scalar basis values at quadrature points, shape (nloc, nq).
        """
        return self.tables.p1 if self.is_p1 else self.tables.p2

    def basis_gradients(self) -> np.ndarray:
        """
        Physical scalar basis gradients at quadrature points, shape (T, nloc, nq, 2).
        """
        tables = self.tables
        if self.is_p1:
            nq = tables.quadrature.num_points
            return np.broadcast_to(tables.p1_grad[:, :, None, :], (len(tables.areas), 3, nq, 2))

        return tables.p2_grad

    def same_mesh(self, other: 'FunctionSpace') -> bool:
        return self.__mesh is other.mesh or self.__mesh.fingerprint == other.mesh.fingerprint

    def require_same_mesh(self, other: 'FunctionSpace', what: str = 'spaces'):
        if not self.same_mesh(other):
            raise SpaceMismatchError(f'{what} live on different meshes')

    def zeros(self) -> 'FieldVector':
        return FieldVector(self, np.zeros(self.dof_count))

    def constant(self, value: float) -> 'FieldVector':
        """
        The constant function `value`. Only the zero constant exists in the Dirichlet velocity space.
        """
        if self.is_vector:
            if value != 0:
                raise SpaceMismatchError('the Dirichlet velocity space contains no nonzero constant')
            return self.zeros()

        return FieldVector(self, np.full(self.dof_count, float(value)))

    def interpolate(self, func: Callable, apply_dirichlet: bool = True) -> 'FieldVector':
        """
        Nodal interpolant of an analytic field.

        Parameters:
            func (Callable):
                `func(x, y)` returning an array (scalar spaces) or a pair of arrays (vector spaces).

            apply_dirichlet (bool):
                Zero the Dirichlet DOFs of the result (vector space only).
        """
        x, y = self.__scalar_coords[:, 0], self.__scalar_coords[:, 1]

        if self.is_vector:
            ux, uy = func(x, y)
            coeffs = np.concatenate([np.broadcast_to(ux, x.shape), np.broadcast_to(uy, x.shape)]).astype(float)
            if apply_dirichlet:
                coeffs[self.__dirichlet_mask] = 0.0
        else:
            coeffs = np.array(np.broadcast_to(func(x, y), x.shape), dtype=float)

        return FieldVector(self, coeffs)

    def split(self, coeffs: np.ndarray) -> np.ndarray:
        """
        View coefficients as (components, scalar DOFs).
        """
        return np.asarray(coeffs).reshape(self.__components, self.__scalar_dofs)

    def values_at_quadrature(self, coeffs: np.ndarray) -> np.ndarray:
        """
        Evaluate a coefficient vector at every quadrature point.

        Returns:
            np.ndarray:
                Shape (T, nq) for scalar spaces and (T, nq, 2) for vector spaces.
        """
        basis = self.basis_values()
        comps = [np.einsum('tj,jq->tq', c[self.__cell_dofs], basis) for c in self.split(coeffs)]

        return comps[0] if not self.is_vector else np.stack(comps, axis=-1)

    def gradients_at_quadrature(self, coeffs: np.ndarray) -> np.ndarray:
        """
        Evaluate gradients at every quadrature point.

        Returns:
            np.ndarray:
                Shape (T, nq, 2) for scalar spaces and (T, nq, 2, 2) for vector spaces, indexed
                [triangle, point, component, derivative].
        """
        grads = self.basis_gradients()
        comps = [np.einsum('tj,tjqd->tqd', c[self.__cell_dofs], grads) for c in self.split(coeffs)]

        return comps[0] if not self.is_vector else np.stack(comps, axis=2)

    def __repr__(self):
        return f'FunctionSpace({self.__kind.value}, dofs={self.dof_count})'


def p1_space(mesh: Mesh) -> FunctionSpace:
    return FunctionSpace(SpaceKind.P1_SCALAR, mesh)


def p1_mean_zero_space(mesh: Mesh) -> FunctionSpace:
    return FunctionSpace(SpaceKind.P1_SCALAR_MEAN_ZERO, mesh)


def p2_vector_space(mesh: Mesh) -> FunctionSpace:
    return FunctionSpace(SpaceKind.P2_VECTOR_DIRICHLET, mesh)


class FieldVector:
    """
    Coefficients of one finite element function.

    Supports the coefficientwise linear combinations the time stepper needs (`+`, `-`, scalar `*`).

    Parameters:
        space (FunctionSpace):
            The space the function belongs to.

        coeffs (np.ndarray):
            Real coefficients, length `space.dof_count`.

    Raises:
        DimensionMismatchError:
            If the coefficient count does not match the space.
    """
    __array_priority__ = 100

    def __init__(self, space: FunctionSpace, coeffs):
        if not isinstance(space, FunctionSpace):
            raise TypeError(f'space must be of type `FunctionSpace`, not {type(space)}')

        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if coeffs.shape[0] != space.dof_count:
            raise DimensionMismatchError(
                f'{space!r} expects {space.dof_count} coefficients, got {coeffs.shape[0]}'
            )

        self.__space  = space
        self.__coeffs = coeffs

    @property
    def space(self) -> FunctionSpace:
        return self.__space

    @property
    def coeffs(self) -> np.ndarray:
        return self.__coeffs

    def copy(self) -> 'FieldVector':
        return FieldVector(self.__space, self.__coeffs.copy())

    def with_coeffs(self, coeffs) -> 'FieldVector':
        return FieldVector(self.__space, coeffs)

    def components(self) -> np.ndarray:
        return self.__space.split(self.__coeffs)

    def integral(self) -> Union[float, np.ndarray]:
        """
        ∫ f by quadrature (a pair for vector fields).
        """
        values  = self.__space.values_at_quadrature(self.__coeffs)
        weights = self.__space.tables.weights

        if self.__space.is_vector:
            return np.einsum('tq,tqc->c', weights, values)

        return float(np.einsum('tq,tq->', weights, values))

    def mean(self) -> Union[float, np.ndarray]:
        return self.integral() / self.__space.mesh.area

    def _check(self, other: 'FieldVector'):
        if not isinstance(other, FieldVector):
            raise TypeError(f'expected `FieldVector`, not {type(other)}')

        if other.space.kind is not self.__space.kind and not (
                self.__space.is_p1 and other.space.is_p1):
            raise SpaceMismatchError(f'{self.__space!r} vs {other.space!r}')

        self.__space.require_same_mesh(other.space, 'fields')

    def __add__(self, other: 'FieldVector') -> 'FieldVector':
        self._check(other)
        return FieldVector(self.__space, self.__coeffs + other.coeffs)

    def __sub__(self, other: 'FieldVector') -> 'FieldVector':
        self._check(other)
        return FieldVector(self.__space, self.__coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> 'FieldVector':
        if isinstance(scalar, FieldVector):
            raise TypeError('FieldVector only supports scalar multiplication')
        return FieldVector(self.__space, float(scalar) * self.__coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> 'FieldVector':
        return FieldVector(self.__space, -self.__coeffs)

    def __truediv__(self, scalar: float) -> 'FieldVector':
        return FieldVector(self.__space, self.__coeffs / float(scalar))

    def __repr__(self):
        return f'FieldVector({self.__space.kind.value}, n={len(self.__coeffs)})'


__all__ = [
    'FieldVector',
    'FunctionSpace',
    'SpaceKind',
    'p1_mean_zero_space',
    'p1_space',
    'p2_vector_space',
]
