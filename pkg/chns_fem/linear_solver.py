"""
File: linear_solver.py
Description:
    Sparse direct solves for the Newton saddle-point systems (LU with pivoting) and for the symmetric positive
    definite systems of the projections and discrete operators (symmetric-mode LU with a positivity check on every
    pivot).

    Mean-value constraints are carried as `MeanConstraint` records. The general solver borders the matrix with one
    multiplier row/column per constraint; the SPD solver removes the kernel of a semidefinite matrix by pinning
    one unknown and restoring the constraint with a kernel shift, which reproduces the bordered solution exactly.
"""
# Standard library imports
from dataclasses import dataclass, field
from typing import Optional, Tuple

# Third-party imports
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

# Package imports
from chns_fem.errors import DimensionMismatchError, NotPositiveDefiniteError, SingularSystemError
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('linear_solver')

PIVOT_RTOL     = 1e-13
SYMMETRY_RTOL  = 1e-12


@dataclass(frozen=True, eq=False)
class MeanConstraint:
    """
    A linear side condition `weights · x = target`.

    Attributes:
        weights (np.ndarray):
            Full-length weight vector (typically ∫ψ_i over a block of unknowns, zeros elsewhere).

        target (float):
            Required value of `weights · x`.

        kernel (Optional[np.ndarray]):
            Null vector of the (semidefinite) matrix the constraint removes. Used by `solve_spd` only; defaults to
            the indicator of the constraint's support.
    """
    weights: np.ndarray
    target:  float = 0.0
    kernel:  Optional[np.ndarray] = None

    def kernel_vector(self) -> np.ndarray:
        if self.kernel is not None:
            return np.asarray(self.kernel, dtype=float)

        return (np.asarray(self.weights) != 0).astype(float)


@dataclass(eq=False)
class LinearSystem:
    """
    A sparse square system with optional mean constraints.

    Attributes:
        matrix (scipy.sparse.spmatrix):
            Square system matrix.

        rhs (np.ndarray):
            Right-hand side.

        constraints (tuple):
            `MeanConstraint` records, each adding one bordering multiplier.
    """
    matrix:      sp.spmatrix
    rhs:         np.ndarray
    constraints: Tuple[MeanConstraint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not sp.issparse(self.matrix):
            self.matrix = sp.csr_matrix(np.atleast_2d(np.asarray(self.matrix, dtype=float)))

        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        rows, cols = self.matrix.shape

        if rows != cols:
            raise DimensionMismatchError(f'matrix must be square, got {self.matrix.shape}')

        if self.rhs.shape[0] != rows:
            raise DimensionMismatchError(f'rhs has length {self.rhs.shape[0]}, matrix has {rows} rows')

        for constraint in self.constraints:
            if np.asarray(constraint.weights).shape != (rows,):
                raise DimensionMismatchError(
                    f'constraint weights have shape {np.asarray(constraint.weights).shape}, expected ({rows},)'
                )

        self.constraints = tuple(self.constraints)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def bordered(self) -> Tuple[sp.csc_matrix, np.ndarray]:
        """
        The matrix and rhs augmented by one multiplier per constraint:

            [ A   G ] [x]   [b]
            [ Gᵀ  0 ] [λ] = [t]
        """
        if not self.constraints:
            return self.matrix.tocsc(), self.rhs

        g = sp.csc_matrix(np.column_stack([np.asarray(c.weights, dtype=float) for c in self.constraints]))
        k = len(self.constraints)
        matrix = sp.bmat([[self.matrix, g], [g.T, sp.csc_matrix((k, k))]], format='csc')
        rhs    = np.concatenate([self.rhs, [float(c.target) for c in self.constraints]])

        return matrix, rhs


def residual_norm(system: LinearSystem, x: np.ndarray) -> Tuple[float, float]:
    """
    ‖A x − b‖∞ and the contract scale ‖A‖∞ ‖x‖∞ + ‖b‖∞.
    """
    a = system.matrix
    r = a @ x - system.rhs
    scale = abs(a).sum(axis=1).max() * np.abs(x).max(initial=0.0) + np.abs(system.rhs).max(initial=0.0)

    return float(np.abs(r).max(initial=0.0)), float(scale)


def _original_column(lu, position: int) -> int:
    return int(np.argsort(lu.perm_c)[position])


def _empty_line(matrix: sp.spmatrix) -> Optional[int]:
    """
    Index of the first all-zero row or column, if any.
    """
    csr = matrix.tocsr()
    nnz_rows = np.diff(csr.indptr)
    nnz_cols = np.diff(csr.tocsc().indptr)
    for counts in (nnz_rows, nnz_cols):
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            return int(empty[0])

    return None


def solve_direct(system: LinearSystem, return_multipliers: bool = False) -> np.ndarray:
    """
    Solve a general sparse system by LU factorization with partial pivoting.

    Parameters:
        system (LinearSystem):
            The system, bordered internally when it carries constraints.

        return_multipliers (bool):
            Append the constraint multipliers to the returned vector.

    Returns:
        np.ndarray:
            The solution (and multipliers when requested).

    Raises:
        SingularSystemError:
            If the factorization meets a zero (or negligible) pivot; `pivot` holds its column when known.

    Examples:
        >>> solve_direct(LinearSystem(sp.diags([2.0, 4.0]), np.array([2.0, 8.0])))
        array([1., 2.])
    """
    log = MOD_LOGGER.get_child('solve_direct')
    matrix, rhs = system.bordered()

    try:
        lu = splu(matrix)
    except RuntimeError as err:
        pivot = _empty_line(matrix)
        log.error(f'Factorization failed: {err}')
        raise SingularSystemError(str(err), pivot=pivot) from err

    diag = np.abs(lu.U.diagonal())
    small = np.flatnonzero(diag <= PIVOT_RTOL * diag.max(initial=0.0))
    if len(small):
        pivot = _original_column(lu, int(small[0]))
        log.error(f'Negligible pivot {diag[small[0]]!r} at column {pivot}')
        raise SingularSystemError(f'pivot magnitude {diag[small[0]]!r}', pivot=pivot)

    solution = lu.solve(rhs)
    log.debug(f'Solved system of size {matrix.shape[0]} ({len(system.constraints)} constraints)')

    return solution if return_multipliers else solution[:system.size]


def _solve_spd_factored(matrix: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """
    Symmetric-mode factorization. When SuperLU kept diagonal pivots (a symmetric permutation), the pivots are the
    LDLᵀ diagonal and must all be positive; otherwise positivity is checked on the energy of the solution.
    """
    csc = matrix.tocsc()
    try:
        lu = splu(csc, permc_spec='MMD_AT_PLUS_A', diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True, Equil=False))
    except RuntimeError as err:
        raise NotPositiveDefiniteError(str(err), pivot=_empty_line(csc)) from err

    if np.array_equal(lu.perm_r, lu.perm_c):
        diag = lu.U.diagonal()
        bad  = np.flatnonzero(diag <= PIVOT_RTOL * np.abs(diag).max(initial=0.0))
        if len(bad):
            raise NotPositiveDefiniteError(f'pivot value {diag[bad[0]]!r}',
                                           pivot=_original_column(lu, int(bad[0])))
        return lu.solve(rhs)

    x = lu.solve(rhs)
    if np.any(rhs) and float(rhs @ x) <= 0.0:
        raise NotPositiveDefiniteError('non-positive energy of the computed solution')

    return x


def solve_spd(system: LinearSystem) -> np.ndarray:
    """
    Solve a symmetric positive definite system (positive definite on the constrained subspace).

    A single `MeanConstraint` is supported: the matrix is then assumed semidefinite with the constraint's kernel
    vector spanning its null space (a Neumann stiffness matrix and the constants). The solution coincides with
    the one of the bordered system.

    Raises:
        NotPositiveDefiniteError:
            If the matrix is not symmetric or a pivot of the symmetric factorization is not positive.

    Examples:
        >>> solve_spd(LinearSystem(sp.csr_matrix([[4.0]]), np.array([8.0])))
        array([2.])
    """
    log    = MOD_LOGGER.get_child('solve_spd')
    matrix = system.matrix.tocsr()
    scale  = abs(matrix).max() if matrix.nnz else 0.0

    if matrix.nnz and abs(matrix - matrix.T).max() > SYMMETRY_RTOL * scale:
        raise NotPositiveDefiniteError('matrix is not symmetric')

    if len(system.constraints) > 1:
        raise DimensionMismatchError('solve_spd supports at most one mean constraint')

    if not system.constraints:
        return _solve_spd_factored(matrix, system.rhs)

    constraint = system.constraints[0]
    g = np.asarray(constraint.weights, dtype=float)
    k = constraint.kernel_vector()

    gk = float(g @ k)
    if gk == 0.0:
        raise NotPositiveDefiniteError('constraint weights annihilate the kernel vector')

    multiplier = float(k @ system.rhs) / gk
    rhs = system.rhs - multiplier * g

    pin  = int(np.argmax(np.abs(k)))
    keep = np.setdiff1d(np.arange(system.size), [pin])

    reduced = matrix[keep][:, keep]
    x = np.zeros(system.size)
    x[keep] = _solve_spd_factored(reduced, rhs[keep])

    x += (float(constraint.target) - float(g @ x)) / gk * k
    log.debug(f'Solved constrained SPD system of size {system.size} (multiplier {multiplier:.3e})')

    return x


__all__ = [
    'LinearSystem',
    'MeanConstraint',
    'residual_norm',
    'solve_direct',
    'solve_spd',
]
