"""Deterministic triangulation of star-shaped domains.

The mesh is a concentric-ring (advancing-ring) triangulation of the unit
parameter disk, mapped through (r, theta) -> center + r * rho(theta) e_r.
Ring j of M carries 6j vertices at uniform angles, which makes boundary
spacing and radial spacing nearly equal and keeps the construction fully
deterministic: identical inputs give bit-identical arrays.  Boundary
vertices evaluate rho exactly, so they sit on the curve to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError
from .geometry import BoundaryCurve, BoundaryFrame, boundary_frame, total_length

TWO_PI = 2.0 * np.pi

MIN_ANGLE_DEG = 20.0


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with an exact boundary-theta correspondence."""

    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3) CCW vertex triples
    boundary_vertices: np.ndarray  # (nb,) ordered by theta
    boundary_thetas: np.ndarray    # (nb,) in [0, 2pi), strictly increasing
    h: float
    curve: BoundaryCurve = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        u, v = b - a, c - a
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def min_angle_deg(self) -> float:
        return float(np.degrees(triangle_angles(self.vertices, self.triangles).min()))


def triangle_angles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """All interior angles (radians), shape (nt, 3)."""
    pts = vertices[triangles]
    out = np.empty((triangles.shape[0], 3))
    for k in range(3):
        u = pts[:, (k + 1) % 3] - pts[:, k]
        v = pts[:, (k + 2) % 3] - pts[:, k]
        cosang = np.sum(u * v, axis=1) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        )
        out[:, k] = np.arccos(np.clip(cosang, -1.0, 1.0))
    return out


def _zip_rings(inner: np.ndarray, outer: np.ndarray) -> list:
    """Triangulate the strip between two concentric vertex rings.

    Vertices are assumed sorted by angle with ring k starting at its
    smallest angle; triangles come out counterclockwise.
    """
    n_in, n_out = inner.size, outer.size
    tris = []
    i = k = 0
    while i < n_in or k < n_out:
        advance_outer = k < n_out and (
            i == n_in or (k + 1) * n_in <= (i + 1) * n_out
        )
        if advance_outer:
            tris.append((outer[k % n_out], outer[(k + 1) % n_out], inner[i % n_in]))
            k += 1
        else:
            tris.append((inner[(i + 1) % n_in], inner[i % n_in], outer[k % n_out]))
            i += 1
    return tris


def triangulate(curve: BoundaryCurve, h: float, theta_offset: float = 0.0) -> Mesh:
    """Mesh the region bounded by ``curve`` at target edge length ``h``.

    ``theta_offset`` rotates the boundary sampling seed; the validation
    module uses it to estimate remeshing noise.  Raises ResolutionError if
    ``h`` is too large for the curve (too few rings or min angle below 20
    degrees).
    """
    if h <= 0.0:
        raise ResolutionError("mesh size h must be positive")
    length = total_length(curve)
    rings = int(round(length / (6.0 * h)))
    if rings < 2:
        raise ResolutionError(
            f"h={h:g} too large: only {rings} ring(s) fit inside the curve"
        )

    thetas = [np.empty(0)]
    fractions = [np.empty(0)]
    for j in range(1, rings + 1):
        n_j = 6 * j
        thetas.append(theta_offset + TWO_PI * np.arange(n_j) / n_j)
        fractions.append(np.full(n_j, j / rings))
    theta_all = np.concatenate([[theta_offset], *thetas])
    frac_all = np.concatenate([[0.0], *fractions])

    # Interior rings blend from a circle of mean radius at the center to the
    # exact curve at the boundary; without the blend the innermost rings
    # inherit the curve's full aspect ratio and the center fan degenerates.
    rho = curve.radius(theta_all)
    rho_mean = float(
        curve.radius(np.linspace(0.0, TWO_PI, 1024, endpoint=False)).mean()
    )
    radius = frac_all * ((1.0 - frac_all) * rho_mean + frac_all * rho)
    vertices = curve.center + radius[:, None] * np.stack(
        [np.cos(theta_all), np.sin(theta_all)], axis=-1
    )

    offsets = [0, 1]
    for j in range(1, rings + 1):
        offsets.append(offsets[-1] + 6 * j)
    tris = [(0, 1 + k, 1 + (k + 1) % 6) for k in range(6)]
    for j in range(2, rings + 1):
        inner = np.arange(offsets[j - 1], offsets[j])
        outer = np.arange(offsets[j], offsets[j + 1])
        tris.extend(_zip_rings(inner, outer))
    triangles = np.asarray(tris, dtype=np.int64)

    boundary = np.arange(offsets[rings], offsets[rings + 1], dtype=np.int64)
    boundary_thetas = np.mod(theta_all[boundary], TWO_PI)
    order = np.argsort(boundary_thetas, kind="stable")
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertices=boundary[order],
        boundary_thetas=boundary_thetas[order],
        h=float(h),
        curve=curve,
    )
    _check_quality(mesh)
    return mesh


def _check_quality(mesh: Mesh) -> None:
    areas = mesh.triangle_areas()
    if np.any(areas <= 0.0):
        raise ResolutionError("triangulation produced non-CCW or degenerate triangles")
    min_angle = mesh.min_angle_deg()
    if min_angle < MIN_ANGLE_DEG:
        raise ResolutionError(
            f"minimum triangle angle {min_angle:.2f} deg below {MIN_ANGLE_DEG} deg; "
            "reduce h or smooth the curve"
        )


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement; new boundary midpoints are projected onto
    the exact curve.  Triangle count quadruples."""
    verts = [mesh.vertices]
    n_old = mesh.num_vertices
    boundary_pairs = {}
    nb = mesh.boundary_vertices.size
    for i in range(nb):
        a = mesh.boundary_vertices[i]
        b = mesh.boundary_vertices[(i + 1) % nb]
        ta = mesh.boundary_thetas[i]
        tb = mesh.boundary_thetas[(i + 1) % nb]
        if i == nb - 1:
            tb += TWO_PI
        boundary_pairs[(min(a, b), max(a, b))] = 0.5 * (ta + tb)

    edge_index: dict = {}
    new_points = []
    new_boundary = []  # (vertex id, theta)
    tris_new = []
    for tri in mesh.triangles:
        mids = []
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            key = (min(a, b), max(a, b))
            if key not in edge_index:
                idx = n_old + len(new_points)
                edge_index[key] = idx
                if key in boundary_pairs:
                    tm = np.mod(boundary_pairs[key], TWO_PI)
                    new_points.append(mesh.curve.point(tm))
                    new_boundary.append((idx, tm))
                else:
                    new_points.append(
                        0.5 * (mesh.vertices[a] + mesh.vertices[b])
                    )
            mids.append(edge_index[key])
        v0, v1, v2 = (int(t) for t in tri)
        m01, m12, m20 = mids
        tris_new.extend(
            [(v0, m01, m20), (m01, v1, m12), (m20, m12, v2), (m01, m12, m20)]
        )

    verts.append(np.asarray(new_points))
    vertices = np.vstack(verts)
    triangles = np.asarray(tris_new, dtype=np.int64)

    b_ids = np.concatenate(
        [mesh.boundary_vertices, np.asarray([i for i, _ in new_boundary], dtype=np.int64)]
    )
    b_th = np.concatenate(
        [mesh.boundary_thetas, np.asarray([t for _, t in new_boundary])]
    )
    order = np.argsort(b_th, kind="stable")
    refined = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertices=b_ids[order],
        boundary_thetas=b_th[order],
        h=0.5 * mesh.h,
        curve=mesh.curve,
    )
    _check_quality(refined)
    return refined


def boundary_trace_map(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, BoundaryFrame]:
    """(vertex ids, thetas, frames) for the boundary, ordered by theta."""
    frames = boundary_frame(mesh.curve, mesh.boundary_thetas)
    return mesh.boundary_vertices.copy(), mesh.boundary_thetas.copy(), frames


def edge_counts(mesh: Mesh) -> dict:
    """Multiplicity of every undirected edge; conforming meshes have only
    counts 1 (boundary) and 2 (interior)."""
    counts: dict = {}
    for tri in mesh.triangles:
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    return counts


def save_mesh(mesh: Mesh, path) -> None:
    """Plain-text export: header line, counts, vertex rows, index rows."""
    with open(path, "w") as fh:
        fh.write("robinshape-mesh 1\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles} {mesh.boundary_vertices.size}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        for vid, th in zip(mesh.boundary_vertices, mesh.boundary_thetas):
            fh.write(f"{vid} {float(th)!r}\n")
