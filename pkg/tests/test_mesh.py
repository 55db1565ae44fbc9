import numpy as np
import pytest

from neckfield.geometry import InclusionPair, NeckProfile, ProfileKind
from neckfield.mesh import (
    INCLUSION1,
    INCLUSION2,
    INTERIOR,
    OUTER,
    MeshError,
    MeshParams,
    audit,
    generate,
    generate_touching,
    mesh_convex_polygon,
    refine_quadrisect,
    write_mesh_text,
)


@pytest.fixture(scope="module")
def pair():
    prof = NeckProfile(kind=ProfileKind.QUADRATIC, curvatures=(2.0,))
    return InclusionPair(2, prof, 1e-2)


@pytest.fixture(scope="module")
def mesh(pair):
    return generate(pair, MeshParams(layers=4))


class TestGenerate:
    def test_layer_count_on_strip_fibers(self, pair, mesh):
        # every station carries exactly layers+1 vertex rows
        for x in mesh.stations:
            rows = np.sum(np.abs(mesh.vertices[:, 0] - x) < 1e-15)
            assert rows >= mesh.layers + 1

    def test_audit_clean(self, mesh):
        report = audit(mesh)
        assert report.passed, report.failures
        assert report.boundary_loop_count == 3
        assert report.euler_characteristic == -1

    def test_far_field_quality(self, mesh):
        report = audit(mesh)
        assert report.far_min_angle_deg >= 20.0
        assert report.neck_triangle_count > 0

    def test_refining_far_field_grows_triangle_count(self, pair):
        coarse = generate(pair, MeshParams(h_far=0.4))
        fine = generate(pair, MeshParams(h_far=0.2))
        far_coarse = int((~coarse.neck).sum())
        far_fine = int((~fine.neck).sum())
        assert far_fine >= 2 * far_coarse

    def test_deterministic(self, pair):
        a = generate(pair, MeshParams())
        b = generate(pair, MeshParams())
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.triangles, b.triangles)
        assert np.array_equal(a.boundary_tags, b.boundary_tags)

    def test_profile_interpolated_exactly(self, pair, mesh):
        # each station fiber spans exactly [h2, eps+h1] with layers+1 rows
        for x in mesh.stations:
            h1, h2 = pair.profile.heights([x])
            top = pair.eps + h1
            at_x = mesh.vertices[mesh.vertices[:, 0] == x]
            band = at_x[(at_x[:, 1] >= h2 - 1e-12) & (at_x[:, 1] <= top + 1e-12)]
            assert len(band) == mesh.layers + 1
            assert abs(band[:, 1].min() - h2) <= 1e-14
            assert abs(band[:, 1].max() - top) <= 1e-14

    def test_mirror_symmetry(self, mesh):
        keys = set(map(tuple, mesh.vertices))
        mirrored = set(map(tuple, np.column_stack([-mesh.vertices[:, 0] + 0.0, mesh.vertices[:, 1]])))
        assert keys == mirrored

    def test_neck_flags_match_region(self, pair, mesh):
        cent = mesh.centroids()
        for i in np.flatnonzero(mesh.neck)[::7]:
            assert pair.in_neck(cent[i])

    def test_outer_vertices_on_circle(self, mesh, pair):
        sel = mesh.vertex_tags == OUTER
        radii = np.hypot(mesh.vertices[sel, 0], mesh.vertices[sel, 1])
        assert np.abs(radii - pair.outer_radius).max() <= 1e-12


class TestGenerateErrors:
    def test_zero_gap_needs_touching_variant(self, pair):
        with pytest.raises(MeshError):
            generate(pair.with_gap(0.0), MeshParams())

    def test_too_few_layers(self):
        with pytest.raises(MeshError):
            MeshParams(layers=3)

    def test_machine_thin_gap(self, pair):
        with pytest.raises(MeshError):
            generate(pair.with_gap(1e-14), MeshParams())

    def test_dimension3_rejected(self):
        prof = NeckProfile(kind=ProfileKind.QUADRATIC, curvatures=(2.0, 2.0))
        with pytest.raises(MeshError):
            generate(InclusionPair(3, prof, 1e-3), MeshParams())


class TestTouching:
    def test_two_loops(self, pair):
        mesh = generate_touching(pair.with_gap(0.0), 0.05, MeshParams())
        report = audit(mesh)
        assert report.passed, report.failures
        assert report.boundary_loop_count == 2
        assert report.euler_characteristic == 0

    def test_bridge_carries_both_tags(self, pair):
        mesh = generate_touching(pair.with_gap(0.0), 0.05, MeshParams())
        bridge = np.abs(np.abs(mesh.vertices[:, 0]) - 0.05) < 1e-15
        tags = set(mesh.vertex_tags[bridge]) - {INTERIOR}
        assert tags == {INCLUSION1, INCLUSION2}

    def test_cut_radius_range(self, pair):
        with pytest.raises(MeshError):
            generate_touching(pair.with_gap(0.0), 0.4, MeshParams())
        with pytest.raises(MeshError):
            generate_touching(pair, 0.05, MeshParams())  # nonzero gap


class TestQuadrisect:
    def test_counts_and_audit(self, pair, mesh):
        fine = refine_quadrisect(mesh, pair)
        assert fine.triangle_count == 4 * mesh.triangle_count
        report = audit(fine)
        assert report.passed, report.failures
        assert report.boundary_loop_count == 3

    def test_boundary_midpoints_projected(self, pair, mesh):
        fine = refine_quadrisect(mesh, pair)
        sel = fine.vertex_tags == OUTER
        radii = np.hypot(fine.vertices[sel, 0], fine.vertices[sel, 1])
        assert np.abs(radii - pair.outer_radius).max() <= 1e-12

    def test_neck_flags_inherited(self, pair, mesh):
        fine = refine_quadrisect(mesh, pair)
        assert int(fine.neck.sum()) == 4 * int(mesh.neck.sum())


class TestExport:
    def test_text_format_roundtrip_counts(self, mesh):
        text = write_mesh_text(mesh)
        lines = text.strip().splitlines()
        nv, ne, nt = map(int, lines[0].split())
        assert nv == mesh.vertex_count and nt == mesh.triangle_count
        nb = len(lines) - 1 - nv - nt
        assert nb == len(mesh.boundary_edges)
        # vertex lines parse back exactly
        x, y = map(float, lines[1].split())
        assert (x, y) == (mesh.vertices[0, 0], mesh.vertices[0, 1])
        tag = lines[-1].split()[2]
        assert tag in ("outer", "inclusion1", "inclusion2")


class TestConvexHelper:
    def test_square(self):
        mesh = mesh_convex_polygon(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float), 0.2)
        report = audit(mesh)
        assert report.passed
        assert report.boundary_loop_count == 1
        assert np.isclose(mesh.areas().sum(), 1.0, atol=1e-12)
