"""
Cross-section triangulation and its assembled P1 matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Triangulation of the cross-section S.

    vertices: (nv, 2) coordinates; triangles: (nt, 3) positively oriented
    vertex indices; boundary: (nv,) flags for vertices on the boundary of S.
    A mesh produced by uniform refinement keeps a link to its parent and
    carries nested=True.
    """

    vertices: NDArray[np.float64]
    triangles: NDArray[np.int64]
    boundary: NDArray[np.bool_]
    kind: str = "custom"
    h: float = 0.0
    parent: Mesh | None = field(default=None, repr=False)
    nested: bool = False

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def interior(self) -> NDArray[np.int64]:
        """Indices of interior (Dirichlet-free) vertices, ascending."""
        return np.flatnonzero(~self.boundary)

    @property
    def n_dofs(self) -> int:
        return int(self.interior.size)

    @cached_property
    def signed_areas(self) -> NDArray[np.float64]:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def edges(self) -> NDArray[np.int64]:
        """Unique undirected edges as sorted (i, j) pairs."""
        t = self.triangles
        all_edges = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        return np.unique(all_edges, axis=0)

    @property
    def area(self) -> float:
        return float(self.signed_areas.sum())

    @property
    def h_max(self) -> float:
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).max())

    @property
    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in radians."""
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return float(np.min(angles))

    def stats(self) -> dict:
        """Summary embedded in reports."""
        return {
            "kind": self.kind,
            "h": self.h,
            "h_max": self.h_max,
            "n_vertices": self.n_vertices,
            "n_triangles": self.n_triangles,
            "n_dofs": self.n_dofs,
            "min_angle_deg": float(np.degrees(self.min_angle)),
            "nested": self.nested,
        }

    def to_off(self) -> str:
        """OFF-like text: counts line, coordinates, then index triples."""
        lines = ["OFF", f"{self.n_vertices} {self.n_triangles} 0"]
        lines += [f"{x!r} {y!r} 0.0" for x, y in self.vertices]
        lines += [f"3 {a} {b} {c}" for a, b, c in self.triangles]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class FemMatrices:
    """
    P1 matrices of a mesh.

    With restricted=True every matrix acts on interior DOFs only (row/column
    k corresponds to mesh.interior[k]); otherwise on all vertices.
    """

    mesh: Mesh
    M: sp.csr_matrix
    S: sp.csr_matrix
    D11: sp.csr_matrix
    D22: sp.csr_matrix
    D12: sp.csr_matrix
    C1: sp.csr_matrix
    C2: sp.csr_matrix
    Y1M: sp.csr_matrix
    Y1D11: sp.csr_matrix
    Y2M: sp.csr_matrix
    Y2D22: sp.csr_matrix
    restricted: bool = True

    @property
    def n(self) -> int:
        return int(self.M.shape[0])

    @cached_property
    def coords(self) -> NDArray[np.float64]:
        """Coordinates of the DOF vertices."""
        if self.restricted:
            return self.mesh.vertices[self.mesh.interior]
        return self.mesh.vertices

    def interpolate(self, fn) -> NDArray[np.float64]:
        """Nodal interpolant of fn(y1, y2) on the DOF vertices."""
        c = self.coords
        return np.asarray(fn(c[:, 0], c[:, 1]), dtype=np.float64)
