"""
File: output.py
Description:
    Artefact writers: CSV tables with 17-significant-digit reals and VTK legacy (3.0, ASCII) snapshots of the
    fields on the vertex set. A small reader parses the snapshots back for self-checks.
"""
# Standard library imports
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

# Third-party imports
import numpy as np

# Package imports
from chns_fem.diagnostics import EnergyReport
from chns_fem.errors import SpaceMismatchError, VtkFormatError
from chns_fem.fem import FieldVector
from chns_fem.helpers import format_float
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.mesh import Mesh


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('cli.output')

ENERGY_COLUMNS = ('m', 't', 'E', 'F', 'grad_mu_sq', 'grad_ubar_sq', 'energy_law_residual', 'mass', 'linf_phi')

VTK_TRIANGLE = 5


def write_csv(path: Union[str, Path], rows: Iterable[Sequence]) -> Path:
    """
    Write rows (header first) with Unix line endings.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open('w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerows(rows)

    MOD_LOGGER.get_child('write_csv').debug(f'Wrote {path}')

    return path


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with Path(path).open(newline='') as fh:
        return list(csv.DictReader(fh))


def energy_rows(history: Sequence[EnergyReport]) -> List[List[str]]:
    """
    The energy time series, one row per level.
    """
    rows = [list(ENERGY_COLUMNS)]
    for report in history:
        rows.append([str(report.m)] + [format_float(getattr(report, name)) for name in ENERGY_COLUMNS[1:]])

    return rows


def write_energy_csv(path: Union[str, Path], history: Sequence[EnergyReport]) -> Path:
    return write_csv(path, energy_rows(history))


def _vertex_values(v: FieldVector, mesh: Mesh) -> np.ndarray:
    """
    Nodal values at the mesh vertices; P2 vectors are restricted to their vertex DOFs, shape (V, 2).
    """
    space = v.space
    if space.mesh is not mesh and space.mesh.fingerprint != mesh.fingerprint:
        raise SpaceMismatchError('snapshot field lives on another mesh')

    nv = mesh.num_vertices
    comps = space.split(v.coeffs)
    if space.is_vector:
        return np.stack([c[:nv] for c in comps], axis=1)

    return comps[0][:nv]


def write_vtk_legacy(
        path:  Union[str, Path],
        mesh:  Mesh,
        phi:   FieldVector,
        mu:    Optional[FieldVector] = None,
        p:     Optional[FieldVector] = None,
        u:     Optional[FieldVector] = None,
        title: str = 'chns_fem snapshot',
) -> Path:
    """
    Write an ASCII VTK legacy unstructured grid.

    Parameters:
        path (Union[str, Path]):
            Target file.

        mesh (Mesh):
            The triangulation; points are written with z = 0.

        phi, mu, p (FieldVector):
            P1 scalars written as POINT_DATA SCALARS. `mu` and `p` are optional.

        u (Optional[FieldVector]):
            P2 velocity, written as VECTORS sampled at the vertices.

        title (str):
            Header title line (newlines are stripped).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    nv, nt = mesh.num_vertices, mesh.num_triangles
    lines = [
        '# vtk DataFile Version 3.0',
        title.replace('\n', ' ')[:255],
        'ASCII',
        'DATASET UNSTRUCTURED_GRID',
        f'POINTS {nv} double',
    ]
    lines += [f'{format_float(x)} {format_float(y)} {format_float(0.0)}' for x, y in mesh.vertices]

    lines.append(f'CELLS {nt} {4 * nt}')
    lines += [f'3 {a} {b} {c}' for a, b, c in mesh.triangles]

    lines.append(f'CELL_TYPES {nt}')
    lines += [str(VTK_TRIANGLE)] * nt

    lines.append(f'POINT_DATA {nv}')
    for name, field_ in (('phi', phi), ('mu', mu), ('p', p)):
        if field_ is None:
            continue
        lines += [f'SCALARS {name} double 1', 'LOOKUP_TABLE default']
        lines += [format_float(value) for value in _vertex_values(field_, mesh)]

    if u is not None:
        lines.append('VECTORS u double')
        lines += [f'{format_float(a)} {format_float(b)} {format_float(0.0)}' for a, b in _vertex_values(u, mesh)]

    path.write_text('\n'.join(lines) + '\n')
    MOD_LOGGER.get_child('write_vtk_legacy').debug(f'Wrote {path} ({nv} points, {nt} cells)')

    return path


@dataclass
class VtkData:
    """
    What `read_vtk_legacy` recovers from a file.
    """
    version:    str
    title:      str
    points:     np.ndarray
    cells:      List[List[int]]
    cell_types: np.ndarray
    point_data: Dict[str, np.ndarray] = field(default_factory=dict)


def read_vtk_legacy(path: Union[str, Path]) -> VtkData:
    """
    Parse an ASCII VTK legacy unstructured grid with point scalars and vectors.

    Raises:
        VtkFormatError:
            If a header, keyword or count does not match what the file declares.
    """
    lines = Path(path).read_text().splitlines()
    if len(lines) < 4 or not lines[0].startswith('# vtk DataFile Version'):
        raise VtkFormatError(f'{path}: missing VTK header')

    version = lines[0].rsplit(' ', 1)[-1]
    title   = lines[1]

    if lines[2].strip() != 'ASCII':
        raise VtkFormatError(f'{path}: only ASCII files are supported')
    if lines[3].strip() != 'DATASET UNSTRUCTURED_GRID':
        raise VtkFormatError(f'{path}: expected an unstructured grid')

    tokens = ' '.join(lines[4:]).split()
    pos = 0

    def take(count: int) -> List[str]:
        nonlocal pos
        if pos + count > len(tokens):
            raise VtkFormatError(f'{path}: truncated file')
        out = tokens[pos:pos + count]
        pos += count
        return out

    def expect(keyword: str):
        (word,) = take(1)
        if word != keyword:
            raise VtkFormatError(f'{path}: expected {keyword}, found {word}')

    expect('POINTS')
    n_points = int(take(2)[0])
    points = np.array(take(3 * n_points), dtype=float).reshape(n_points, 3)

    expect('CELLS')
    n_cells, size = (int(t) for t in take(2))
    cells, used = [], 0
    for _ in range(n_cells):
        (k,) = take(1)
        cells.append([int(t) for t in take(int(k))])
        used += int(k) + 1
    if used != size:
        raise VtkFormatError(f'{path}: CELLS size {size} does not match its {used} entries')

    expect('CELL_TYPES')
    if int(take(1)[0]) != n_cells:
        raise VtkFormatError(f'{path}: CELL_TYPES count differs from CELLS')
    cell_types = np.array(take(n_cells), dtype=int)

    point_data = {}
    if pos < len(tokens):
        expect('POINT_DATA')
        if int(take(1)[0]) != n_points:
            raise VtkFormatError(f'{path}: POINT_DATA count differs from POINTS')

        while pos < len(tokens):
            (kind,) = take(1)
            if kind == 'SCALARS':
                name, _, ncomp = take(3)
                expect('LOOKUP_TABLE')
                take(1)
                width = int(ncomp)
                values = np.array(take(width * n_points), dtype=float)
                point_data[name] = values if width == 1 else values.reshape(n_points, width)
            elif kind == 'VECTORS':
                name, _ = take(2)
                point_data[name] = np.array(take(3 * n_points), dtype=float).reshape(n_points, 3)
            else:
                raise VtkFormatError(f'{path}: unsupported section {kind}')

    return VtkData(version=version, title=title, points=points, cells=cells, cell_types=cell_types,
                   point_data=point_data)


__all__ = [
    'ENERGY_COLUMNS',
    'VtkData',
    'VtkFormatError',
    'energy_rows',
    'read_csv',
    'read_vtk_legacy',
    'write_csv',
    'write_energy_csv',
    'write_vtk_legacy',
]
