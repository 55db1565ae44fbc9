import numpy as np
import pytest

from neckfield import fem
from neckfield.geometry import InclusionPair, NeckProfile, ProfileKind
from neckfield.mesh import (
    INCLUSION1,
    INCLUSION2,
    OUTER,
    Mesh,
    MeshParams,
    generate,
    mesh_convex_polygon,
)


def unit_square_two_triangles():
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    return Mesh(
        vertices=verts,
        triangles=tris,
        boundary_edges=np.array([[0, 1], [1, 2], [2, 3], [0, 3]]),
        boundary_tags=np.array([OUTER] * 4),
        vertex_tags=np.array([OUTER] * 4),
        neck=np.zeros(2, bool),
        neck_column_x=np.full(2, np.nan),
        stations=np.array([]),
        layers=4,
    )


@pytest.fixture(scope="module")
def pair():
    prof = NeckProfile(kind=ProfileKind.QUADRATIC, curvatures=(2.0,))
    return InclusionPair(2, prof, 1e-3)


@pytest.fixture(scope="module")
def op(pair):
    return fem.assemble(generate(pair, MeshParams()))


@pytest.fixture(scope="module")
def v1(op):
    return op.solve_dirichlet({INCLUSION1: 1.0, INCLUSION2: 0.0, OUTER: 0.0})


class TestAssembly:
    def test_unit_square_textbook_entries(self):
        op = fem.assemble(unit_square_two_triangles())
        k = op.matrix.toarray()
        expect = np.array(
            [
                [1.0, -0.5, 0.0, -0.5],
                [-0.5, 1.0, -0.5, 0.0],
                [0.0, -0.5, 1.0, -0.5],
                [-0.5, 0.0, -0.5, 1.0],
            ]
        )
        assert np.allclose(k, expect, atol=1e-15)

    def test_row_sums_vanish(self, op):
        sums = np.abs(np.asarray(op.matrix.sum(axis=1))).max()
        assert sums <= 1e-12

    def test_exact_symmetry(self, op):
        diff = op.matrix - op.matrix.T
        defect = np.abs(diff.data).max() if diff.nnz else 0.0
        assert defect <= 1e-14

    def test_positive_semidefinite_on_samples(self, op):
        rng = np.random.default_rng(20260810)
        for _ in range(5):
            x = rng.standard_normal(op.matrix.shape[0])
            assert x @ (op.matrix @ x) >= -1e-9


class TestSolve:
    def test_constant_data_gives_constant_field(self, op):
        f = op.solve_dirichlet({INCLUSION1: 3.5, INCLUSION2: 3.5, OUTER: 3.5})
        assert np.abs(f.values - 3.5).max() <= 1e-10

    def test_linear_reproduction_on_convex_mesh(self):
        mesh = mesh_convex_polygon(np.array([[0, 0], [2, 0], [2, 1], [0, 1]], float), 0.15)
        op = fem.assemble(mesh)
        lin = lambda pts: 3.0 * pts[:, 0] - 2.0 * pts[:, 1] + 0.5
        f = op.solve_dirichlet({OUTER: lin})
        assert np.abs(f.values - lin(mesh.vertices)).max() <= 1e-10
        grads = fem.element_gradients(f)
        assert np.abs(grads - np.array([3.0, -2.0])).max() <= 1e-10

    def test_maximum_principle(self, v1):
        assert v1.values.min() >= -1e-12
        assert v1.values.max() <= 1.0 + 1e-12

    def test_boundary_values_exact(self, op, v1):
        mesh = op.mesh
        assert np.all(v1.values[mesh.vertex_tags == INCLUSION1] == 1.0)
        assert np.all(v1.values[mesh.vertex_tags == INCLUSION2] == 0.0)

    def test_missing_tag_data_rejected(self, op):
        with pytest.raises(fem.SolverError):
            op.solve_dirichlet({INCLUSION1: 1.0})

    def test_cg_fallback_matches_direct(self, op):
        rng = np.random.default_rng(20260810)
        rhs = rng.standard_normal(len(op.interior))
        direct = op._factorization().solve(rhs)
        iterative = op._cg(rhs)
        scale = np.abs(direct).max()
        assert np.abs(direct - iterative).max() <= 1e-7 * scale


class TestFluxAndEnergy:
    def test_constant_field_has_zero_energy(self, op):
        f = op.solve_dirichlet({INCLUSION1: 2.0, INCLUSION2: 2.0, OUTER: 2.0})
        assert abs(op.energy(f)) <= 1e-10

    def test_energy_positive(self, op, v1):
        assert op.energy(v1) > 0.0

    def test_flux_equals_energy(self, op, v1):
        e = op.energy(v1)
        assert abs(op.flux(v1, INCLUSION1) - e) <= 1e-10 * e

    def test_reciprocity(self, op, v1):
        v2 = op.solve_dirichlet({INCLUSION1: 0.0, INCLUSION2: 1.0, OUTER: 0.0})
        a12 = op.flux(v2, INCLUSION1)
        a21 = op.flux(v1, INCLUSION2)
        assert abs(a12 - a21) <= 1e-8 * abs(a12)

    def test_total_flux_vanishes(self, op, v1):
        total = op.flux(v1, INCLUSION1) + op.flux(v1, INCLUSION2) + op.flux(v1, OUTER)
        assert abs(total) <= 1e-10

    def test_flux_linearity(self, op, v1):
        v2 = op.solve_dirichlet({INCLUSION1: 0.0, INCLUSION2: 1.0, OUTER: 0.0})
        combo = fem.ScalarField(op.mesh, 2.0 * v1.values + 3.0 * v2.values)
        lhs = op.flux(combo, INCLUSION1)
        rhs = 2.0 * op.flux(v1, INCLUSION1) + 3.0 * op.flux(v2, INCLUSION1)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)

    def test_unknown_tag_rejected(self, op, v1):
        with pytest.raises(fem.SolverError):
            op.flux(v1, 99)


class TestAcrossGaps:
    def test_energy_decreases_as_gap_opens(self, pair):
        energies = []
        for eps in (1e-4, 1e-3, 1e-2):
            op = fem.assemble(generate(pair.with_gap(eps), MeshParams()))
            f = op.solve_dirichlet({INCLUSION1: 1.0, INCLUSION2: 0.0, OUTER: 0.0})
            energies.append(op.energy(f))
        assert energies[0] > energies[1] > energies[2]

    def test_gradient_band_uniform_in_gap(self, pair):
        # |grad v1| * gap stays inside a fixed band across the sweep
        band_constants = []
        for eps in (1e-2, 1e-3, 1e-4):
            p = pair.with_gap(eps)
            mesh = generate(p, MeshParams())
            op = fem.assemble(mesh)
            f = op.solve_dirichlet({INCLUSION1: 1.0, INCLUSION2: 0.0, OUTER: 0.0})
            grads = fem.element_gradients(f)
            norms = np.hypot(grads[:, 0], grads[:, 1])
            cent = mesh.centroids()
            scaled = norms[mesh.neck] * np.array([p.gap([x]) for x in cent[mesh.neck, 0]])
            band_constants.append(max(scaled.max(), 1.0 / scaled.min()))
        assert max(band_constants) <= 2.0 * min(band_constants)
        assert max(band_constants) <= 3.0

    def test_max_gradient_location_near_center(self, pair, op, v1):
        value, loc = fem.max_gradient(v1, "neck")
        assert value == pytest.approx(1.0 / pair.eps, rel=0.05)
        assert abs(loc[0]) <= 0.02

    def test_max_gradient_constant_field(self, op):
        f = op.solve_dirichlet({INCLUSION1: 1.0, INCLUSION2: 1.0, OUTER: 1.0})
        value, _ = fem.max_gradient(f, "all")
        assert value <= 1e-9

    def test_unknown_region_rejected(self, v1):
        with pytest.raises(ValueError):
            fem.max_gradient(v1, "nowhere")
