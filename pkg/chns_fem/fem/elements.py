"""
Lagrange reference elements (P1, P2) on triangles and the per-mesh geometric tables used by assembly.

Local P2 numbering: the three vertices, then the midpoints of local edges (0-1), (1-2), (2-0).
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from chns_fem.fem.quadrature import DEFAULT_QUADRATURE, Quadrature
from chns_fem.mesh import LOCAL_EDGES, Mesh


def p1_values(bary: np.ndarray) -> np.ndarray:
    """
    P1 basis values at barycentric points, shape (3, npts).
    """
    return np.asarray(bary, dtype=float).T.copy()


def p2_values(bary: np.ndarray) -> np.ndarray:
    """
    P2 basis values at barycentric points, shape (6, npts).
    """
    lam  = np.asarray(bary, dtype=float).T
    vals = [lam[i] * (2.0 * lam[i] - 1.0) for i in range(3)]
    vals += [4.0 * lam[a] * lam[b] for a, b in LOCAL_EDGES]

    return np.array(vals)


def barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """
    Physical gradients of the barycentric coordinates on every triangle, shape (T, 3, 2).
    """
    corners = mesh.vertices[mesh.triangles]
    j00 = corners[:, 1, 0] - corners[:, 0, 0]
    j01 = corners[:, 2, 0] - corners[:, 0, 0]
    j10 = corners[:, 1, 1] - corners[:, 0, 1]
    j11 = corners[:, 2, 1] - corners[:, 0, 1]
    det = j00 * j11 - j01 * j10

    grad = np.empty((mesh.num_triangles, 3, 2))
    grad[:, 1, 0] =  j11 / det
    grad[:, 1, 1] = -j01 / det
    grad[:, 2, 0] = -j10 / det
    grad[:, 2, 1] =  j00 / det
    grad[:, 0]    = -grad[:, 1] - grad[:, 2]

    return grad


def p2_gradients(lam_grad: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """
    Physical P2 basis gradients at barycentric points, shape (T, 6, npts, 2).
    """
    lam = np.asarray(bary, dtype=float).T
    out = np.empty((lam_grad.shape[0], 6, lam.shape[1], 2))

    for i in range(3):
        out[:, i] = (4.0 * lam[i] - 1.0)[None, :, None] * lam_grad[:, i, None, :]

    for k, (a, b) in enumerate(LOCAL_EDGES):
        out[:, 3 + k] = 4.0 * (lam[a][None, :, None] * lam_grad[:, b, None, :]
                               + lam[b][None, :, None] * lam_grad[:, a, None, :])

    return out


@dataclass(frozen=True, eq=False)
class ElementTables:
    """
    Quadrature-point tables shared by every assembly routine on one mesh.

    Attributes:
        quadrature (Quadrature):
            The rule all forms use.

        areas (np.ndarray):
            Triangle areas, shape (T,).

        points (np.ndarray):
            Physical quadrature points, shape (T, nq, 2).

        p1 (np.ndarray):
            P1 values, shape (3, nq).

        p1_grad (np.ndarray):
            P1 gradients (constant per triangle), shape (T, 3, 2).

        p2 (np.ndarray):
            P2 values, shape (6, nq).

        p2_grad (np.ndarray):
            P2 gradients, shape (T, 6, nq, 2).
    """
    quadrature: Quadrature
    areas:      np.ndarray
    points:     np.ndarray
    p1:         np.ndarray
    p1_grad:    np.ndarray
    p2:         np.ndarray
    p2_grad:    np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """
        Quadrature weights scaled by triangle area, shape (T, nq).
        """
        return self.areas[:, None] * self.quadrature.weights[None, :]


@lru_cache(maxsize=16)
def element_tables(mesh: Mesh, quadrature: Quadrature = DEFAULT_QUADRATURE) -> ElementTables:
    """
    Build (once per mesh) the reference and physical basis tables at quadrature points.
    """
    bary     = quadrature.points
    lam_grad = barycentric_gradients(mesh)
    corners  = mesh.vertices[mesh.triangles]
    points   = np.einsum('qk,tkd->tqd', bary, corners)

    return ElementTables(
        quadrature=quadrature,
        areas=mesh.areas,
        points=points,
        p1=p1_values(bary),
        p1_grad=lam_grad,
        p2=p2_values(bary),
        p2_grad=p2_gradients(lam_grad, bary),
    )


__all__ = [
    'ElementTables',
    'barycentric_gradients',
    'element_tables',
    'p1_values',
    'p2_gradients',
    'p2_values',
]
