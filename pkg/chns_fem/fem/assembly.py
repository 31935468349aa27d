"""
File: assembly.py
Description:
    Vectorized assembly of the bilinear and frozen-coefficient trilinear forms of the CHNS system.

    Element matrices are evaluated for all triangles at once over the shared degree-6 quadrature and scattered
    into compressed sparse row storage. Symmetric forms are symmetrized after summation and the skew form is
    built as ½(N − Nᵀ), so both structural identities hold exactly in floating point.

    Forms:
        (u, v)               mass
        a(u, v) = (∇u, ∇v)   stiffness
        c(v, q) = (∇·v, q)   divergence
        b(ψ, v, ν)           phase convection, first slot frozen
        B(ũ, v, w)           skew-symmetric convection, first slot frozen
"""
# Standard library imports
from typing import Callable, Tuple

# Third-party imports
import numpy as np
import scipy.sparse as sp

# Package imports
from chns_fem.errors import SpaceMismatchError
from chns_fem.fem.nonlinear import Splitting
from chns_fem.fem.spaces import FieldVector, FunctionSpace, SpaceKind
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('fem.assembly')


def scatter_matrix(row_map: np.ndarray, col_map: np.ndarray, local: np.ndarray, shape) -> sp.csr_matrix:
    """
    Sum element matrices into a global sparse matrix.

    Parameters:
        row_map (np.ndarray):
            Global row of each local row, shape (T, a).

        col_map (np.ndarray):
            Global column of each local column, shape (T, b).

        local (np.ndarray):
            Element matrices, shape (T, a, b).

        shape (tuple):
            Global shape.
    """
    rows = np.broadcast_to(row_map[:, :, None], local.shape)
    cols = np.broadcast_to(col_map[:, None, :], local.shape)

    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


def scatter_vector(dof_map: np.ndarray, local: np.ndarray, size: int) -> np.ndarray:
    return np.bincount(dof_map.ravel(), weights=local.ravel(), minlength=size)


def symmetrize(matrix: sp.spmatrix) -> sp.csr_matrix:
    return (0.5 * (matrix + matrix.T)).tocsr()


def _component_maps(space: FunctionSpace) -> np.ndarray:
    """
    Local-to-global map covering every component, shape (T, nloc * ncomp).
    """
    cd = space.cell_dofs
    return np.hstack([c * space.scalar_dof_count + cd for c in range(space.num_components)])


def _expand_components(space: FunctionSpace, scalar: sp.spmatrix) -> sp.csr_matrix:
    if space.num_components == 1:
        return scalar.tocsr()

    return sp.block_diag([scalar] * space.num_components, format='csr')


def p1_gradient(space: FunctionSpace, coeffs: np.ndarray) -> np.ndarray:
    """
    Per-triangle gradient of a P1 function, shape (T, 2). Exactly zero for constant coefficients.
    """
    if not space.is_p1:
        raise SpaceMismatchError(f'p1_gradient needs a P1 space, got {space!r}')

    vals = np.asarray(coeffs)[space.cell_dofs]
    grad = space.tables.p1_grad

    return ((vals[:, 1] - vals[:, 0])[:, None] * grad[:, 1]
            + (vals[:, 2] - vals[:, 0])[:, None] * grad[:, 2])


def local_mass_matrices(space: FunctionSpace) -> np.ndarray:
    """
    Scalar element mass matrices, shape (T, nloc, nloc).
    """
    basis = space.basis_values()
    local = np.einsum('tq,iq,jq->tij', space.tables.weights, basis, basis)

    return 0.5 * (local + local.transpose(0, 2, 1))


def assemble_mass(space: FunctionSpace) -> sp.csr_matrix:
    """
    Mass matrix M with x·M·y = ∫ f_x f_y (exact to quadrature).

    Returns:
        scipy.sparse.csr_matrix:
            Symmetric positive definite matrix of size `space.dof_count`.
    """
    n      = space.scalar_dof_count
    scalar = scatter_matrix(space.cell_dofs, space.cell_dofs, local_mass_matrices(space), (n, n))

    return _expand_components(space, symmetrize(scalar))


def assemble_stiffness(space: FunctionSpace) -> sp.csr_matrix:
    """
    Stiffness matrix A of a(u, v) = (∇u, ∇v). Dirichlet DOFs are kept; constraints are applied at solve time.
    """
    grads = space.basis_gradients()
    local = np.einsum('tq,tiqd,tjqd->tij', space.tables.weights, grads, grads)
    local = 0.5 * (local + local.transpose(0, 2, 1))

    n      = space.scalar_dof_count
    scalar = scatter_matrix(space.cell_dofs, space.cell_dofs, local, (n, n))

    return _expand_components(space, symmetrize(scalar))


def _require_velocity(vel: FunctionSpace):
    if not isinstance(vel, FunctionSpace) or vel.kind is not SpaceKind.P2_VECTOR_DIRICHLET:
        raise SpaceMismatchError(f'expected the P2 vector velocity space, got {vel!r}')


def _require_p1(space: FunctionSpace, what: str):
    if not isinstance(space, FunctionSpace) or not space.is_p1:
        raise SpaceMismatchError(f'{what} must be a P1 space, got {space!r}')


def assemble_divergence(vel: FunctionSpace, pres: FunctionSpace) -> sp.csr_matrix:
    """
    Divergence matrix C with C[q, v] = ∫ (∇·φ_v) ψ_q.

    Parameters:
        vel (FunctionSpace):
            The P2 vector velocity space.

        pres (FunctionSpace):
            A P1 space on the same mesh (the pressure space).

    Returns:
        scipy.sparse.csr_matrix:
            Shape (pres.dof_count, vel.dof_count); Dirichlet velocity columns included.
    """
    _require_velocity(vel)
    _require_p1(pres, 'pres')
    vel.require_same_mesh(pres)

    weights = vel.tables.weights
    grads   = vel.basis_gradients()
    test    = pres.basis_values()

    local = np.concatenate(
        [np.einsum('tq,iq,tjq->tij', weights, test, grads[..., c]) for c in range(2)],
        axis=2,
    )

    return scatter_matrix(pres.cell_dofs, _component_maps(vel), local, (pres.dof_count, vel.dof_count))


def assemble_phase_convection(psi: FieldVector, vel: FunctionSpace, test: FunctionSpace) -> sp.csr_matrix:
    """
    Matrix of (v, ν) ↦ b(ψ, v, ν) = (∇ψ·v, ν) with ψ frozen.

    Parameters:
        psi (FieldVector):
            The frozen phase field, in a P1 space.

        vel (FunctionSpace):
            The P2 vector velocity space (columns).

        test (FunctionSpace):
            P1 test space (rows).

    Returns:
        scipy.sparse.csr_matrix:
            Shape (test.dof_count, vel.dof_count).
    """
    _require_p1(psi.space, 'psi')
    _require_velocity(vel)
    _require_p1(test, 'test')
    vel.require_same_mesh(psi.space)
    vel.require_same_mesh(test)

    grad_psi = p1_gradient(psi.space, psi.coeffs)
    weights  = vel.tables.weights
    trial    = vel.basis_values()
    rows     = test.basis_values()

    local = np.concatenate(
        [np.einsum('tq,t,iq,jq->tij', weights, grad_psi[:, c], rows, trial) for c in range(2)],
        axis=2,
    )

    return scatter_matrix(test.cell_dofs, _component_maps(vel), local, (test.dof_count, vel.dof_count))


def assemble_skew_convection(u_tilde: FieldVector) -> sp.csr_matrix:
    """
    Matrix K of (v, w) ↦ B(ũ, v, w) = ½[(ũ·∇v, w) − (ũ·∇w, v)], with K[w, v] the entry for test w, trial v.

    Returns:
        scipy.sparse.csr_matrix:
            Exactly antisymmetric matrix of size `u_tilde.space.dof_count`.
    """
    space = u_tilde.space
    _require_velocity(space)

    frozen = space.values_at_quadrature(u_tilde.coeffs)
    grads  = space.basis_gradients()
    basis  = space.basis_values()

    local = np.einsum('tq,tqd,tjqd,iq->tij', space.tables.weights, frozen, grads, basis)

    n         = space.scalar_dof_count
    transport = scatter_matrix(space.cell_dofs, space.cell_dofs, local, (n, n))
    skew      = (0.5 * (transport - transport.T)).tocsr()

    return _expand_components(space, skew)


def assemble_nonlinear_residual_and_jacobian(
        phi_new:   FieldVector,
        phi_old:   FieldVector,
        test:      FunctionSpace,
        splitting: Splitting = Splitting.CHI,
) -> Tuple[FieldVector, sp.csr_matrix]:
    """
    Residual (g(φ_new, φ_old), ψ_i) and its Jacobian with respect to φ_new for an implicit convex term `g`.

    The nonlinearity is evaluated at quadrature points from the interpolated P1 values.
    """
    for field, name in ((phi_new, 'phi_new'), (phi_old, 'phi_old')):
        _require_p1(field.space, name)
        test.require_same_mesh(field.space)

    _require_p1(test, 'test')

    a = phi_new.space.values_at_quadrature(phi_new.coeffs)
    b = phi_old.space.values_at_quadrature(phi_old.coeffs)
    value, slope = splitting.evaluate(a, b)

    weights = test.tables.weights
    basis   = test.basis_values()
    n       = test.dof_count

    residual = scatter_vector(test.cell_dofs, np.einsum('tq,tq,iq->ti', weights, value, basis), n)

    local    = np.einsum('tq,tq,iq,jq->tij', weights, slope, basis, basis)
    local    = 0.5 * (local + local.transpose(0, 2, 1))
    jacobian = symmetrize(scatter_matrix(test.cell_dofs, test.cell_dofs, local, (n, n)))

    return FieldVector(test, residual), jacobian


def assemble_chi_residual_and_jacobian(
        phi_new: FieldVector,
        phi_old: FieldVector,
        test:    FunctionSpace,
) -> Tuple[FieldVector, sp.csr_matrix]:
    """
    Residual (χ(φ_new, φ_old), ψ_i) and Jacobian ∂/∂φ_new, with χ(a, b) = ½(a² + b²)(a + b)/2.

    Examples:
        With φ_new = φ_old ≡ c the residual equals c³ times the mass-matrix row sums.
    """
    return assemble_nonlinear_residual_and_jacobian(phi_new, phi_old, test, Splitting.CHI)


def assemble_load(space: FunctionSpace, func: Callable) -> np.ndarray:
    """
    Load vector (f, ψ_i) by quadrature.

    Parameters:
        func (Callable):
            `func(x, y)` evaluated at arrays of physical quadrature points; returns an array (scalar spaces) or a
            pair of arrays (vector spaces).
    """
    pts     = space.tables.points
    weights = space.tables.weights
    basis   = space.basis_values()
    n       = space.scalar_dof_count

    values = func(pts[..., 0], pts[..., 1])
    if not space.is_vector:
        values = (values,)

    parts = [
        scatter_vector(space.cell_dofs,
                       np.einsum('tq,tq,iq->ti', weights, np.broadcast_to(v, weights.shape), basis), n)
        for v in values
    ]

    return np.concatenate(parts)


def assemble_gradient_load(space: FunctionSpace, grad_func: Callable) -> np.ndarray:
    """
    Load vector (∇f, ∇ψ_i) by quadrature.

    Parameters:
        grad_func (Callable):
            `grad_func(x, y)` returning (∂x f, ∂y f) for scalar spaces, or ((∂x u1, ∂y u1), (∂x u2, ∂y u2)) for
            vector spaces.
    """
    pts     = space.tables.points
    weights = space.tables.weights
    grads   = space.basis_gradients()
    n       = space.scalar_dof_count

    values = grad_func(pts[..., 0], pts[..., 1])
    if not space.is_vector:
        values = (values,)

    parts = []
    for gx, gy in values:
        g = np.stack([np.broadcast_to(gx, weights.shape), np.broadcast_to(gy, weights.shape)], axis=-1)
        parts.append(scatter_vector(space.cell_dofs, np.einsum('tq,tqd,tiqd->ti', weights, g, grads), n))

    return np.concatenate(parts)


def integrate(space: FunctionSpace, func: Callable) -> float:
    """
    ∫ f over the mesh of `space` by quadrature.
    """
    pts = space.tables.points
    return float(np.einsum('tq,tq->', space.tables.weights,
                           np.broadcast_to(func(pts[..., 0], pts[..., 1]), space.tables.weights.shape)))


__all__ = [
    'assemble_chi_residual_and_jacobian',
    'assemble_divergence',
    'assemble_gradient_load',
    'assemble_load',
    'assemble_mass',
    'assemble_nonlinear_residual_and_jacobian',
    'assemble_phase_convection',
    'assemble_skew_convection',
    'assemble_stiffness',
    'integrate',
    'local_mass_matrices',
    'p1_gradient',
    'scatter_matrix',
    'scatter_vector',
    'symmetrize',
]
