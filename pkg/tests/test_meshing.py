import numpy as np
import pytest

from robinshape import geometry as geo
from robinshape import meshing as msh
from robinshape.errors import ResolutionError


@pytest.fixture(scope="module")
def disk_mesh():
    return msh.triangulate(geo.BoundaryCurve.circle(1.0), 0.05)


@pytest.fixture(scope="module")
def ellipse_mesh():
    return msh.triangulate(geo.BoundaryCurve([1.0, 0.0, 0.0, 0.3, 0.0]), 0.05)


class TestTriangulate:
    def test_disk_area_converges(self, disk_mesh):
        rel = abs(disk_mesh.area() - np.pi) / np.pi
        assert rel <= 2 * disk_mesh.h**2

    def test_boundary_vertices_exactly_on_curve(self, disk_mesh):
        d = np.hypot(*disk_mesh.vertices[disk_mesh.boundary_vertices].T)
        rho = disk_mesh.curve.radius(disk_mesh.boundary_thetas)
        assert np.abs(d - rho).max() < 1e-12

    def test_boundary_count_doubles_with_h(self):
        c = geo.BoundaryCurve([1.0, 0.0, 0.0, 0.3, 0.0])
        n1 = msh.triangulate(c, 0.1).boundary_vertices.size
        n2 = msh.triangulate(c, 0.05).boundary_vertices.size
        assert abs(n2 - 2 * n1) <= 6

    def test_conforming(self, ellipse_mesh):
        counts = msh.edge_counts(ellipse_mesh)
        assert set(counts.values()) <= {1, 2}
        n_boundary_edges = sum(1 for v in counts.values() if v == 1)
        assert n_boundary_edges == ellipse_mesh.boundary_vertices.size

    def test_min_angle_bound(self, disk_mesh, ellipse_mesh):
        assert disk_mesh.min_angle_deg() >= msh.MIN_ANGLE_DEG
        assert ellipse_mesh.min_angle_deg() >= msh.MIN_ANGLE_DEG

    def test_orientation_ccw(self, ellipse_mesh):
        assert np.all(ellipse_mesh.triangle_areas() > 0)

    def test_deterministic(self):
        c = geo.BoundaryCurve([1.0, 0.0, 0.0, 0.2, 0.0])
        a = msh.triangulate(c, 0.07)
        b = msh.triangulate(c, 0.07)
        assert a.vertices.tobytes() == b.vertices.tobytes()
        assert a.triangles.tobytes() == b.triangles.tobytes()
        assert a.boundary_thetas.tobytes() == b.boundary_thetas.tobytes()

    def test_h_too_large(self):
        with pytest.raises(ResolutionError):
            msh.triangulate(geo.BoundaryCurve.circle(1.0), 2.0)

    def test_area_order_h_squared(self):
        c = geo.BoundaryCurve.circle(1.0)
        errs = [abs(msh.triangulate(c, h).area() - np.pi) for h in (0.2, 0.1, 0.05)]
        assert errs[1] < errs[0] / 2.5
        assert errs[2] < errs[1] / 2.5


class TestRefine:
    def test_triangle_count_quadruples(self, disk_mesh):
        assert msh.refine(disk_mesh).num_triangles == 4 * disk_mesh.num_triangles

    def test_area_error_quartered(self, disk_mesh):
        # Quartering is asymptotic; allow a 0.1% slack on the ratio.
        parent = abs(disk_mesh.area() - np.pi)
        child = abs(msh.refine(disk_mesh).area() - np.pi)
        assert child <= parent / 4 * 1.001

    def test_min_angle_within_5_deg_of_parent(self, ellipse_mesh):
        refined = msh.refine(ellipse_mesh)
        assert refined.min_angle_deg() >= ellipse_mesh.min_angle_deg() - 5.0
        assert refined.min_angle_deg() >= msh.MIN_ANGLE_DEG

    def test_refined_boundary_on_curve(self, ellipse_mesh):
        r = msh.refine(ellipse_mesh)
        pts = r.vertices[r.boundary_vertices]
        rho = r.curve.radius(r.boundary_thetas)
        d = np.hypot(pts[:, 0] - r.curve.center[0], pts[:, 1] - r.curve.center[1])
        assert np.abs(d - rho).max() < 1e-12

    def test_refined_conforming(self, disk_mesh):
        counts = msh.edge_counts(msh.refine(disk_mesh))
        assert set(counts.values()) <= {1, 2}


class TestBoundaryTraceMap:
    def test_theta_strictly_increasing(self, disk_mesh):
        ids, thetas, _ = msh.boundary_trace_map(disk_mesh)
        assert ids.size == disk_mesh.boundary_vertices.size
        assert np.all(np.diff(thetas) > 0)

    def test_gaps_bounded(self, ellipse_mesh):
        _, thetas, _ = msh.boundary_trace_map(ellipse_mesh)
        gaps = np.diff(np.concatenate([thetas, [thetas[0] + 2 * np.pi]]))
        assert gaps.max() <= 2.0 * gaps.mean()

    def test_frames_delegate_to_geometry(self, ellipse_mesh):
        ids, thetas, frames = msh.boundary_trace_map(ellipse_mesh)
        direct = geo.boundary_frame(ellipse_mesh.curve, thetas)
        assert np.array_equal(frames.normal, direct.normal)
        assert np.array_equal(frames.curvature, direct.curvature)
        assert np.allclose(frames.point, ellipse_mesh.vertices[ids], atol=1e-12)


class TestExport:
    def test_round_trip_header_and_counts(self, tmp_path, disk_mesh):
        path = tmp_path / "mesh.txt"
        msh.save_mesh(disk_mesh, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "robinshape-mesh 1"
        nv, nt, nb = (int(x) for x in lines[1].split())
        assert (nv, nt, nb) == (
            disk_mesh.num_vertices,
            disk_mesh.num_triangles,
            disk_mesh.boundary_vertices.size,
        )
        assert len(lines) == 2 + nv + nt + nb
        x, y = (float(v) for v in lines[2].split())
        assert (x, y) == tuple(disk_mesh.vertices[0])
