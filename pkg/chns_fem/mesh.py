"""
File: mesh.py
Description:
    Conforming triangulations of axis-aligned rectangles: structured construction, uniform (red) refinement,
    edge numbering and boundary identification.
"""
# Standard library imports
from typing import Optional, Tuple

# Third-party imports
import numpy as np

# Package imports
from chns_fem.errors import MeshError
from chns_fem.helpers import fingerprint_arrays
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('mesh')

UNIT_SQUARE = (0.0, 0.0, 1.0, 1.0)

# Local edge k of a triangle joins local vertices LOCAL_EDGES[k].
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])

Rect = Tuple[float, float, float, float]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class Mesh:
    """
    An immutable triangulation.

    Triangles are stored counter-clockwise. Edges are identified by sorted vertex-index pairs and numbered in
    lexicographic order of those pairs.

    Parameters:
        vertices (np.ndarray):
            Array of shape (V, 2) holding vertex coordinates.

        triangles (np.ndarray):
            Integer array of shape (T, 3) of vertex indices with positive orientation.

        rect (Optional[Rect]):
            The rectangle (x0, y0, x1, y1) the mesh covers, when known.

    Raises:
        MeshError:
            If any triangle has non-positive signed area or references a missing vertex.
    """
    def __init__(self, vertices: np.ndarray, triangles: np.ndarray, rect: Optional[Rect] = None):
        vertices  = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)

        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError(f'vertices must have shape (V, 2), got {vertices.shape}')

        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f'triangles must have shape (T, 3), got {triangles.shape}')

        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError('triangle references a vertex index out of range')

        self.__vertices  = _frozen(vertices)
        self.__triangles = _frozen(triangles)
        self.__rect      = None if rect is None else tuple(float(c) for c in rect)

        corners = vertices[triangles]
        e1 = corners[:, 1] - corners[:, 0]
        e2 = corners[:, 2] - corners[:, 0]
        signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

        if np.any(signed <= 0.0):
            bad = int(np.argmax(signed <= 0.0))
            raise MeshError(f'triangle {bad} has non-positive signed area {signed[bad]!r}')

        self.__areas = _frozen(signed)

        oriented = triangles[:, LOCAL_EDGES].reshape(-1, 2)
        keyed    = np.sort(oriented, axis=1)

        edges, inverse, counts = np.unique(keyed, axis=0, return_inverse=True, return_counts=True)
        inverse = np.asarray(inverse).reshape(-1)

        self.__edges          = _frozen(edges)
        self.__triangle_edges = _frozen(inverse.reshape(-1, 3))

        on_boundary = counts[inverse] == 1
        self.__boundary_edges    = _frozen(oriented[on_boundary])
        self.__boundary_edge_ids = _frozen(np.unique(inverse[on_boundary]))
        self.__boundary_vertices = _frozen(np.unique(self.__boundary_edges))

        lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
        self.__edge_lengths = _frozen(lengths)
        self.__h_max        = float(lengths.max()) if len(lengths) else 0.0

        self.__fingerprint = fingerprint_arrays(self.__vertices, self.__triangles)

    @property
    def vertices(self) -> np.ndarray:
        return self.__vertices

    @property
    def triangles(self) -> np.ndarray:
        return self.__triangles

    @property
    def rect(self) -> Optional[Rect]:
        """
        The rectangle (x0, y0, x1, y1) this mesh covers, or `None` for meshes built from raw arrays.
        """
        return self.__rect

    @property
    def edges(self) -> np.ndarray:
        """
        Sorted vertex-index pairs, shape (E, 2), in lexicographic order.
        """
        return self.__edges

    @property
    def triangle_edges(self) -> np.ndarray:
        """
        Global edge id of the local edges (0-1, 1-2, 2-0) of every triangle, shape (T, 3).
        """
        return self.__triangle_edges

    @property
    def boundary_edges(self) -> np.ndarray:
        """
        Boundary edges as oriented vertex pairs (counter-clockwise along the boundary), shape (B, 2).
        """
        return self.__boundary_edges

    @property
    def boundary_edge_ids(self) -> np.ndarray:
        return self.__boundary_edge_ids

    @property
    def boundary_vertices(self) -> np.ndarray:
        """
        Sorted indices of vertices lying on a boundary edge.
        """
        return self.__boundary_vertices

    @property
    def areas(self) -> np.ndarray:
        return self.__areas

    @property
    def area(self) -> float:
        return float(self.__areas.sum())

    @property
    def edge_lengths(self) -> np.ndarray:
        return self.__edge_lengths

    @property
    def h_max(self) -> float:
        """
        The mesh size: length of the longest edge.
        """
        return self.__h_max

    @property
    def diameters(self) -> np.ndarray:
        """
        Per-triangle diameter (longest of its three edges).
        """
        return self.__edge_lengths[self.__triangle_edges].max(axis=1)

    @property
    def edge_midpoints(self) -> np.ndarray:
        v = self.__vertices
        return 0.5 * (v[self.__edges[:, 0]] + v[self.__edges[:, 1]])

    @property
    def fingerprint(self) -> str:
        return self.__fingerprint

    @property
    def num_vertices(self) -> int:
        return len(self.__vertices)

    @property
    def num_edges(self) -> int:
        return len(self.__edges)

    @property
    def num_triangles(self) -> int:
        return len(self.__triangles)

    def euler_characteristic(self) -> int:
        """
        V - E + T (equal to 1 for a simply connected planar triangulation).
        """
        return self.num_vertices - self.num_edges + self.num_triangles

    def __repr__(self):
        return (f'Mesh(vertices={self.num_vertices}, triangles={self.num_triangles}, '
                f'h_max={self.h_max:.6g})')


def _check_rect(rect) -> Rect:
    try:
        x0, y0, x1, y1 = (float(c) for c in rect)
    except (TypeError, ValueError) as err:
        raise MeshError(f'rect must be four reals (x0, y0, x1, y1), got {rect!r}') from err

    if not (x1 > x0 and y1 > y0):
        raise MeshError(f'degenerate rectangle {rect!r}; need x1 > x0 and y1 > y0')

    return x0, y0, x1, y1


def build_structured_mesh(nx: int, ny: int, rect: Rect = UNIT_SQUARE) -> Mesh:
    """
    Build a structured triangulation of a rectangle.

    Every one of the `nx` by `ny` cells is split along its lower-left to upper-right diagonal.

    Parameters:
        nx (int):
            Number of cells in the x direction (>= 1).

        ny (int):
            Number of cells in the y direction (>= 1).

        rect (Rect):
            The rectangle (x0, y0, x1, y1). Defaults to the unit square.

    Returns:
        Mesh:
            A mesh with (nx+1)(ny+1) vertices and 2*nx*ny triangles.

    Raises:
        MeshError:
            If a cell count is not a positive integer or the rectangle is degenerate.

    Examples:
        >>> build_structured_mesh(1, 1).num_triangles
        2
    """
    log = MOD_LOGGER.get_child('build_structured_mesh')

    for name, count in (('nx', nx), ('ny', ny)):
        if isinstance(count, bool) or not isinstance(count, (int, np.integer)) or count < 1:
            raise MeshError(f'{name} must be a positive integer, got {count!r}')

    x0, y0, x1, y1 = _check_rect(rect)

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    v00 = jj * (nx + 1) + ii
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1

    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    mesh = Mesh(vertices, triangles, rect=(x0, y0, x1, y1))
    log.debug(f'Built {mesh!r}')

    return mesh


def refine_uniform(mesh: Mesh) -> Mesh:
    """
    Split every triangle into four through its edge midpoints.

    New vertices are appended after the old ones, midpoint of edge `e` receiving index `V + e`.

    Parameters:
        mesh (Mesh):
            The mesh to refine.

    Returns:
        Mesh:
            The refined mesh; its `h_max` is half the input's.
    """
    if not isinstance(mesh, Mesh):
        raise TypeError(f'mesh must be of type `Mesh`, not {type(mesh)}')

    nv  = mesh.num_vertices
    tri = mesh.triangles
    mid = nv + mesh.triangle_edges

    a, b, c       = tri[:, 0], tri[:, 1], tri[:, 2]
    mab, mbc, mca = mid[:, 0], mid[:, 1], mid[:, 2]

    children = np.stack([
        np.column_stack([a, mab, mca]),
        np.column_stack([mab, b, mbc]),
        np.column_stack([mca, mbc, c]),
        np.column_stack([mab, mbc, mca]),
    ], axis=1).reshape(-1, 3)

    vertices = np.vstack([mesh.vertices, mesh.edge_midpoints])

    refined = Mesh(vertices, children, rect=mesh.rect)
    MOD_LOGGER.get_child('refine_uniform').debug(f'Refined {mesh!r} -> {refined!r}')

    return refined


def vertices_on_rect_boundary(mesh: Mesh, tol: float = 1e-12) -> np.ndarray:
    """
    Indices of vertices whose coordinates lie on the mesh's rectangle boundary.

    Raises:
        MeshError:
            If the mesh does not know its rectangle.
    """
    if mesh.rect is None:
        raise MeshError('mesh was not built on a known rectangle')

    x0, y0, x1, y1 = mesh.rect
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    scale = max(x1 - x0, y1 - y0)
    hit = ((np.abs(x - x0) <= tol * scale) | (np.abs(x - x1) <= tol * scale)
           | (np.abs(y - y0) <= tol * scale) | (np.abs(y - y1) <= tol * scale))

    return np.flatnonzero(hit)


__all__ = [
    'Mesh',
    'UNIT_SQUARE',
    'build_structured_mesh',
    'refine_uniform',
    'vertices_on_rect_boundary',
]
