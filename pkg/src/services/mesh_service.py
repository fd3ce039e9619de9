"""
Mesh service - cross-section triangulations and P1 assembly.
"""

import math

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.spatial import Delaunay

from src.core.exceptions import MeshError
from src.core.logging import get_logger
from src.domain.models import FemMatrices, Mesh
from src.domain.schemas.config import CrossSectionConfig

logger = get_logger(__name__)

# Exact integrals of products of three barycentric coordinates, in units of area
_DELTA = np.eye(3)
_TRIPLE = (
    1.0
    + _DELTA[:, :, None]
    + _DELTA[:, None, :]
    + _DELTA[None, :, :]
    + 2.0 * np.einsum("ij,jk->ijk", _DELTA, _DELTA)
) / 60.0


def _topological_boundary(n_vertices: int, triangles: NDArray[np.int64]) -> NDArray[np.bool_]:
    """Vertices on edges that belong to exactly one triangle."""
    t = triangles
    edges = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    flags = np.zeros(n_vertices, dtype=bool)
    flags[uniq[counts == 1].ravel()] = True
    return flags


def _signed_areas(vertices: NDArray, triangles: NDArray) -> NDArray[np.float64]:
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _orient(vertices: NDArray, triangles: NDArray) -> NDArray[np.int64]:
    """Flip negatively oriented triangles."""
    t = np.array(triangles, dtype=np.int64)
    neg = _signed_areas(vertices, t) < 0
    t[neg] = t[neg][:, [0, 2, 1]]
    return t


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _points_in_polygon(points: NDArray, poly: NDArray) -> NDArray[np.bool_]:
    """Even-odd ray casting, vectorised over points."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(points.shape[0], dtype=bool)
    n = poly.shape[0]
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < x_int)
    return inside


def _distance_to_polygon(points: NDArray, poly: NDArray) -> NDArray[np.float64]:
    dist = np.full(points.shape[0], np.inf)
    n = poly.shape[0]
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        ab = b - a
        t = np.clip(((points - a) @ ab) / (ab @ ab), 0.0, 1.0)
        proj = a + t[:, None] * ab
        dist = np.minimum(dist, np.linalg.norm(points - proj, axis=1))
    return dist


class MeshService:
    """Generates, refines and assembles cross-section meshes."""

    def make_rectangle(
        self,
        a: float,
        b: float,
        h: float,
        origin: tuple[float, float] = (0.0, 0.0),
    ) -> Mesh:
        """
        Structured triangulation of origin + (0,a) x (0,b).

        h bounds the axis-parallel edges. Cells are cut along alternating
        diagonals (cell (i, j) rising when i + j is even), so with an even
        number of cells per side the mesh is mirror-symmetric in both axes.
        """
        if a <= 0 or b <= 0:
            raise MeshError(f"rectangle needs positive sides, got a={a}, b={b}")
        if not 0 < h < min(a, b):
            raise MeshError(f"mesh size h={h} must lie in (0, min(a, b))")

        nx = math.ceil(a / h - 1e-9)
        ny = math.ceil(b / h - 1e-9)
        xs = origin[0] + a * np.arange(nx + 1) / nx
        ys = origin[1] + b * np.arange(ny + 1) / ny
        gx, gy = np.meshgrid(xs, ys)
        vertices = np.column_stack([gx.ravel(), gy.ravel()])

        i, j = np.meshgrid(np.arange(nx), np.arange(ny))
        v00 = (j * (nx + 1) + i).ravel()
        v10 = v00 + 1
        v01 = v00 + nx + 1
        v11 = v01 + 1
        rising = ((i + j) % 2 == 0).ravel()[:, None]
        first = np.where(
            rising, np.column_stack([v00, v10, v11]), np.column_stack([v00, v10, v01])
        )
        second = np.where(
            rising, np.column_stack([v00, v11, v01]), np.column_stack([v10, v11, v01])
        )
        triangles = np.vstack([first, second]).astype(np.int64)

        ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
        boundary = ((ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)).ravel()

        mesh = Mesh(vertices, triangles, boundary, kind="rectangle", h=float(h))
        logger.debug("mesh_generated", **mesh.stats())
        return mesh

    def make_disk(
        self,
        r: float,
        h: float,
        center: tuple[float, float] = (0.0, 0.0),
    ) -> Mesh:
        """Concentric-ring triangulation of the disk; ring k carries 6k points."""
        if r <= 0:
            raise MeshError(f"disk radius must be positive, got r={r}")
        if not 0 < h < r:
            raise MeshError(f"mesh size h={h} must lie in (0, r)")

        n = math.ceil(r / h - 1e-9)
        points = [np.zeros((1, 2))]
        for k in range(1, n + 1):
            theta = 2.0 * np.pi * np.arange(6 * k) / (6 * k)
            rk = r * k / n
            points.append(np.column_stack([rk * np.cos(theta), rk * np.sin(theta)]))
        local = np.vstack(points)
        vertices = local + np.asarray(center, dtype=np.float64)

        tri = Delaunay(local, qhull_options="QJ")
        triangles = self._clean(local, tri.simplices, h)
        boundary = _topological_boundary(vertices.shape[0], triangles)
        on_circle = np.abs(np.hypot(local[:, 0], local[:, 1]) - r) <= 1e-12
        if not np.array_equal(boundary, on_circle):
            raise MeshError("disk triangulation does not conform to the circle")

        mesh = Mesh(vertices, triangles, boundary, kind="disk", h=float(h))
        logger.debug("mesh_generated", **mesh.stats())
        return mesh

    def make_polygon(self, pts, h: float) -> Mesh:
        """
        Triangulate a simple, positively oriented polygon.

        The boundary is sampled with spacing <= h per edge and the interior
        with a bbox-aligned lattice of spacing <= h; lattice points closer
        than h/2 to the boundary are dropped.
        """
        poly = self.validate_polygon(pts)
        if h <= 0:
            raise MeshError(f"mesh size must be positive, got h={h}")

        boundary_pts = []
        n_edges = poly.shape[0]
        for i in range(n_edges):
            p, q = poly[i], poly[(i + 1) % n_edges]
            m = max(1, math.ceil(np.linalg.norm(q - p) / h - 1e-9))
            t = np.arange(m)[:, None] / m
            boundary_pts.append(p + t * (q - p))
        bpts = np.vstack(boundary_pts)

        lo, hi = poly.min(axis=0), poly.max(axis=0)
        nx = max(1, math.ceil((hi[0] - lo[0]) / h - 1e-9))
        ny = max(1, math.ceil((hi[1] - lo[1]) / h - 1e-9))
        xs = lo[0] + (hi[0] - lo[0]) * np.arange(1, nx) / nx
        ys = lo[1] + (hi[1] - lo[1]) * np.arange(1, ny) / ny
        gx, gy = np.meshgrid(xs, ys)
        lattice = np.column_stack([gx.ravel(), gy.ravel()])
        if lattice.size:
            keep = _points_in_polygon(lattice, poly) & (
                _distance_to_polygon(lattice, poly) >= 0.5 * h
            )
            lattice = lattice[keep]

        vertices = np.vstack([bpts, lattice]) if lattice.size else bpts
        tri = Delaunay(vertices, qhull_options="QJ")
        triangles = self._clean(vertices, tri.simplices, h)
        centroids = vertices[triangles].mean(axis=1)
        triangles = triangles[_points_in_polygon(centroids, poly)]

        boundary = _topological_boundary(vertices.shape[0], triangles)
        on_poly = _distance_to_polygon(vertices, poly) <= 1e-12
        if not np.array_equal(boundary, on_poly):
            raise MeshError("polygon triangulation does not conform to the boundary")

        mesh = Mesh(vertices, triangles, boundary, kind="polygon", h=float(h))
        logger.debug("mesh_generated", **mesh.stats())
        return mesh

    @staticmethod
    def validate_polygon(pts) -> NDArray[np.float64]:
        """Check a polygon is simple and counter-clockwise; return it as an array."""
        poly = np.asarray(pts, dtype=np.float64)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
            raise MeshError("polygon needs at least 3 points in the plane")
        if np.allclose(poly[0], poly[-1]):
            poly = poly[:-1]

        n = poly.shape[0]
        for i in range(n):
            if np.allclose(poly[i], poly[(i + 1) % n]):
                raise MeshError(f"polygon has repeated consecutive vertex {i}")
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]):
                    raise MeshError(f"polygon edges {i} and {j} intersect")

        x, y = poly[:, 0], poly[:, 1]
        area = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        if area <= 0:
            raise MeshError("polygon must be positively oriented (counter-clockwise)")
        return poly

    @staticmethod
    def _clean(vertices: NDArray, simplices: NDArray, h: float) -> NDArray[np.int64]:
        """Orient positively and drop hull slivers of (near) zero area."""
        t = _orient(vertices, simplices)
        return t[_signed_areas(vertices, t) > 1e-10 * h * h]

    def refine_uniform(self, m: Mesh) -> Mesh:
        """Split every triangle into four congruent children at edge midpoints."""
        t = m.triangles
        nt = t.shape[0]
        nv = m.n_vertices
        stacked = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        edges, inverse = np.unique(stacked, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1).reshape(3, nt) + nv
        m01, m12, m20 = inverse

        midpoints = 0.5 * (m.vertices[edges[:, 0]] + m.vertices[edges[:, 1]])
        vertices = np.vstack([m.vertices, midpoints])
        v0, v1, v2 = t[:, 0], t[:, 1], t[:, 2]
        triangles = np.vstack(
            [
                np.column_stack([v0, m01, m20]),
                np.column_stack([m01, v1, m12]),
                np.column_stack([m20, m12, v2]),
                np.column_stack([m01, m12, m20]),
            ]
        ).astype(np.int64)
        boundary = _topological_boundary(vertices.shape[0], triangles)

        return Mesh(
            vertices,
            triangles,
            boundary,
            kind=m.kind,
            h=m.h / 2.0,
            parent=m,
            nested=True,
        )

    def build(self, cfg: CrossSectionConfig) -> Mesh:
        """Mesh described by a cross_section config block, refinements applied."""
        match cfg.kind:
            case "rectangle":
                mesh = self.make_rectangle(cfg.a, cfg.b, cfg.h, cfg.origin)
            case "disk":
                mesh = self.make_disk(cfg.r, cfg.h, cfg.origin)
            case "polygon":
                mesh = self.make_polygon(cfg.points, cfg.h)
        for _ in range(cfg.refinements):
            mesh = self.refine_uniform(mesh)
        logger.info("mesh_ready", **mesh.stats())
        return mesh

    def assemble_p1(self, m: Mesh, restrict: bool = True) -> FemMatrices:
        """
        Assemble all P1 matrices with exact element integrals.

        With restrict=True, boundary rows and columns are eliminated. All
        matrices share the sparsity pattern of the vertex graph.
        """
        p = m.vertices[m.triangles]  # (nt, 3, 2)
        area = np.abs(_signed_areas(m.vertices, m.triangles))
        x, y = p[:, :, 0], p[:, :, 1]

        # Gradients of the barycentric coordinates
        two_a = 2.0 * area[:, None]
        b = (np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)) / two_a
        c = (np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)) / two_a
        # orientation-independent sign
        sign = np.sign(_signed_areas(m.vertices, m.triangles))[:, None]
        b, c = b * sign, c * sign

        A = area[:, None, None]
        local = {
            "M": A * (1.0 + _DELTA) / 12.0,
            "D11": A * b[:, :, None] * b[:, None, :],
            "D22": A * c[:, :, None] * c[:, None, :],
            "D12": A * b[:, :, None] * c[:, None, :],
            "C1": np.broadcast_to(A / 3.0 * b[:, None, :], (len(area), 3, 3)),
            "C2": np.broadcast_to(A / 3.0 * c[:, None, :], (len(area), 3, 3)),
            "Y1M": A * np.einsum("ijk,tk->tij", _TRIPLE, x),
            "Y2M": A * np.einsum("ijk,tk->tij", _TRIPLE, y),
            "Y1D11": (A * x.mean(axis=1)[:, None, None]) * b[:, :, None] * b[:, None, :],
            "Y2D22": (A * y.mean(axis=1)[:, None, None]) * c[:, :, None] * c[:, None, :],
        }

        rows = np.repeat(m.triangles, 3, axis=1).ravel()
        cols = np.tile(m.triangles, (1, 3)).ravel()
        nv = m.n_vertices
        idx = m.interior

        def to_csr(values: NDArray) -> sp.csr_matrix:
            mat = sp.coo_matrix((values.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
            mat.sum_duplicates()
            mat.sort_indices()
            if restrict:
                mat = mat[idx][:, idx].tocsr()
                mat.sort_indices()
            return mat

        mats = {name: to_csr(values) for name, values in local.items()}
        stiffness = (mats["D11"] + mats["D22"]).tocsr()
        stiffness.sort_indices()

        fem = FemMatrices(
            mesh=m,
            M=mats["M"],
            S=stiffness,
            D11=mats["D11"],
            D22=mats["D22"],
            D12=mats["D12"],
            C1=mats["C1"],
            C2=mats["C2"],
            Y1M=mats["Y1M"],
            Y1D11=mats["Y1D11"],
            Y2M=mats["Y2M"],
            Y2D22=mats["Y2D22"],
            restricted=restrict,
        )
        logger.debug("p1_assembled", n_dofs=fem.n, nnz=int(fem.S.nnz), restricted=restrict)
        return fem

    def export_off(self, m: Mesh) -> str:
        return m.to_off()


def get_mesh_service() -> MeshService:
    """Get mesh service instance."""
    return MeshService()
