"""Structured triangulations of axis-aligned rectangles.

Every mesh is an nx-by-ny grid of rectangles, each split into two triangles
along the diagonal from the lower-left to the upper-right corner.  The split
direction is fixed so that repeated runs produce identical meshes.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a rectangle.

    Attributes
    ----------
    vertices : (nv, 2) float array of vertex coordinates.
    cells : (nc, 3) int array; each row lists vertex indices with positive
        orientation (counterclockwise).
    boundary_edges : (nbe, 2) int array of vertex index pairs on the boundary.
    bbox : (x_min, x_max, y_min, y_max).
    nx, ny : grid resolution the mesh was built from.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_edges: np.ndarray
    bbox: tuple
    nx: int
    ny: int

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]


def build_structured_mesh(nx, ny, bbox=(0.0, 1.0, 0.0, 1.0)):
    """Triangulate the rectangle ``bbox`` with a 2*nx*ny-cell grid.

    Parameters
    ----------
    nx, ny : number of grid squares per direction (>= 1).
    bbox : (x_min, x_max, y_min, y_max) with x_min < x_max, y_min < y_max.
    """
    if not (isinstance(nx, (int, np.integer)) and isinstance(ny, (int, np.integer))):
        raise ValueError("nx and ny must be integers")
    if nx < 1 or ny < 1:
        raise ValueError(f"grid resolution must be >= 1, got nx={nx}, ny={ny}")
    x_min, x_max, y_min, y_max = map(float, bbox)
    if not (x_min < x_max and y_min < y_max):
        raise ValueError(f"degenerate bounding box {bbox}")

    xs = np.linspace(x_min, x_max, nx + 1)
    ys = np.linspace(y_min, y_max, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    cells = np.empty((2 * nx * ny, 3), dtype=np.int64)
    k = 0
    for j in range(ny):
        for i in range(nx):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            cells[k] = (v00, v10, v11)      # below the diagonal
            cells[k + 1] = (v00, v11, v01)  # above the diagonal
            k += 2

    edges = []
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        edges.append((vid(i + 1, ny), vid(i, ny)))
    for j in range(ny):
        edges.append((vid(nx, j), vid(nx, j + 1)))
        edges.append((vid(0, j + 1), vid(0, j)))
    boundary_edges = np.asarray(edges, dtype=np.int64)

    return Mesh(vertices, cells, boundary_edges, (x_min, x_max, y_min, y_max), int(nx), int(ny))


def cell_areas(mesh):
    """Signed areas of all cells (positive for valid meshes)."""
    p = mesh.vertices[mesh.cells]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def mesh_size(mesh):
    """Largest cell diameter (max vertex-pair distance over all cells)."""
    p = mesh.vertices[mesh.cells]
    d = [np.linalg.norm(p[:, a] - p[:, b], axis=1) for a, b in ((0, 1), (1, 2), (0, 2))]
    return float(np.max(d))


def edge_use_counts(mesh):
    """Map from sorted vertex-index pair to the number of cells sharing it."""
    counts = {}
    for tri in mesh.cells:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            counts[key] = counts.get(key, 0) + 1
    return counts
