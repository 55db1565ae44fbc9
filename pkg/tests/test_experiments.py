import math

import numpy as np
import pytest

from neckfield.conductivity import BoundaryData, fit_blowup_limit
from neckfield.experiments import (
    SWEEP_CSV_HEADER,
    SweepRecord,
    fit_energy_constants,
    fit_rate,
    mesh_convergence,
    records_to_csv,
    run_sweep,
    verify_leading_term,
)
from neckfield.geometry import InclusionPair, NeckProfile, ProfileKind
from neckfield.mesh import MeshParams


@pytest.fixture(scope="module")
def pair():
    prof = NeckProfile(kind=ProfileKind.QUADRATIC, curvatures=(2.0,))
    return InclusionPair(2, prof, 1e-3)


@pytest.fixture(scope="module")
def phi():
    return BoundaryData(kind="linear_xn")


@pytest.fixture(scope="module")
def records(pair, phi):
    eps_list = [1e-2 * 4.0 ** (-k) for k in range(6)]
    recs, failures = run_sweep(pair, phi, eps_list, MeshParams())
    assert not failures
    return recs


def synthetic_records(eps_list, fn):
    out = []
    for eps in eps_list:
        out.append(
            SweepRecord(
                eps=eps,
                rate=math.sqrt(eps),
                energy_v1=fn(eps),
                a11=fn(eps),
                a12=0.0,
                a21=0.0,
                a22=0.0,
                b1=0.0,
                b2=0.0,
                c1=0.0,
                c2=0.0,
                b_factor=0.0,
                max_grad_u_neck=2.0 * eps**-0.5,
                max_grad_v1_neck=1.0 / eps,
                max_grad_w_neck=0.3,
                max_grad_vb_neck=0.01,
                vb_center=0.0,
                vb_offside=0.0,
                centerline_residual=0.1,
                vertex_count=100,
                triangle_count=180,
                wall_time=0.0,
            )
        )
    return out


class TestRunSweep:
    def test_smoke_counts(self, records):
        assert len(records) == 6
        assert all(r.eps > r2.eps for r, r2 in zip(records, records[1:]))

    def test_energy_strictly_increasing(self, records):
        energies = [r.energy_v1 for r in records]
        assert all(b > a for a, b in zip(energies, energies[1:]))

    def test_gradient_strictly_increasing(self, records):
        grads = [r.max_grad_u_neck for r in records]
        assert all(b > a for a, b in zip(grads, grads[1:]))

    def test_all_finite(self, records):
        for r in records:
            for name in ("energy_v1", "b_factor", "c1", "c2", "max_grad_u_neck"):
                assert math.isfinite(getattr(r, name))

    def test_needs_enough_points(self, pair, phi):
        with pytest.raises(ValueError):
            run_sweep(pair, phi, [1e-2, 1e-3, 1e-4], MeshParams())
        with pytest.raises(ValueError):
            run_sweep(pair, phi, [1e-2, 8e-3, 6e-3, 5e-3], MeshParams())

    def test_per_gap_failures_do_not_abort(self, pair, phi):
        # a machine-thin gap fails its mesh but the rest of the sweep survives
        eps_list = [1e-2, 1e-3, 1e-4, 1e-14]
        records, failures = run_sweep(pair, phi, eps_list, MeshParams())
        assert len(records) == 3
        assert list(failures) == [1e-14]
        assert "MeshError" in failures[1e-14]

    def test_worker_pool_matches_sequential(self, pair, phi, records):
        eps_list = [r.eps for r in records]
        parallel, failures = run_sweep(pair, phi, eps_list, MeshParams(), workers=2)
        assert not failures
        for seq, par in zip(records, parallel):
            assert seq.eps == par.eps
            assert seq.energy_v1 == par.energy_v1
            assert seq.b_factor == par.b_factor


class TestFitRate:
    def test_exact_power_law_recovery(self):
        eps_list = [1e-2, 1e-3, 1e-4, 1e-5]
        recs = synthetic_records(eps_list, lambda e: 5.0)
        fit = fit_rate(recs, "max_grad_u_neck")
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(2.0), abs=1e-12)
        assert fit.stderr <= 1e-12

    def test_rejects_nonpositive(self):
        recs = synthetic_records([1e-2, 1e-3, 1e-4, 1e-5], lambda e: 5.0)
        recs[0].b_factor = -1.0
        with pytest.raises(ValueError):
            fit_rate(recs, "b_factor")

    def test_measured_slopes(self, records):
        assert abs(fit_rate(records, "max_grad_u_neck").slope + 0.5) <= 0.05
        assert abs(fit_rate(records, "max_grad_v1_neck").slope + 1.0) <= 0.05


class TestEnergyFit:
    def test_synthetic_recovery(self, pair):
        eps_list = [1e-2, 1e-3, 1e-4, 1e-5]
        recs = synthetic_records(eps_list, lambda e: 2.5 / math.sqrt(e) + 7.0)
        efit = fit_energy_constants(recs, pair)
        assert efit.amplitude == pytest.approx(2.5, abs=1e-9)
        assert efit.offset == pytest.approx(7.0, abs=1e-7)

    def test_measured_amplitude_matches_oracle(self, records, pair):
        efit = fit_energy_constants(records, pair)
        assert efit.oracle_constant == pytest.approx(math.pi, rel=1e-14)
        assert abs(efit.amplitude_over_oracle - 1.0) <= 0.02
        move = abs(efit.offset_half_range - efit.offset) / abs(efit.offset)
        assert move <= 0.10

    def test_adjudication_table_has_three_constants(self, records, pair):
        table = dict(fit_energy_constants(records, pair).table())
        assert {"fitted amplitude", "oracle constant", "printed constant"} <= set(table)


class TestLeadingTerm:
    def test_residual_bounded_and_ratio_converges(self, records, pair):
        eps = np.array([r.eps for r in records])
        vals = np.array([r.b_factor for r in records])
        b0, _, _ = fit_blowup_limit(eps, vals, 2, 2.0)
        efit = fit_energy_constants(records, pair)
        rep = verify_leading_term(records, b0, efit.amplitude)
        assert rep.residual_growth <= 3.0
        assert rep.final_ratio == pytest.approx(1.0, abs=0.05)

    def test_zero_factor_keeps_gradients_flat(self, pair):
        recs, _ = run_sweep(
            pair,
            BoundaryData(kind="constant", value=1.0),
            [1e-2, 1e-3, 1e-4, 1e-5],
            MeshParams(),
        )
        grads = [r.max_grad_u_neck for r in recs]
        assert max(grads) <= 1e-6


class TestMeshConvergence:
    def test_ladder(self, pair, phi):
        report = mesh_convergence(pair, phi, MeshParams(), levels=3)
        assert report.shrink_ok
        assert report.min_shrink >= 1.5
        assert report.error_bar_rel < 0.01
        assert len(report.energies) == 3

    def test_needs_three_levels(self, pair, phi):
        with pytest.raises(ValueError):
            mesh_convergence(pair, phi, MeshParams(), levels=2)

    def test_layer_ladder_energies_settle(self, pair, phi):
        # the parameter ladder (more layers, smaller steps) also converges
        from neckfield.conductivity import solve_bundle
        from neckfield.mesh import generate

        energies = []
        for refinement, layers in ((0, 4), (1, 6), (2, 8), (3, 12)):
            params = MeshParams(layers=layers, refinement=refinement)
            energies.append(solve_bundle(generate(pair, params), phi).a11)
        diffs = [abs(b - a) for a, b in zip(energies, energies[1:])]
        assert all(b < a for a, b in zip(diffs, diffs[1:]))


class TestCsv:
    def test_versioned_header_and_shape(self, records):
        text = records_to_csv(records)
        lines = text.strip().splitlines()
        assert lines[0] == SWEEP_CSV_HEADER[0]
        assert lines[1].split(",")[0] == "eps"
        assert len(lines) == 2 + len(records)

    def test_floats_round_trip(self, records):
        text = records_to_csv(records)
        lines = text.strip().splitlines()
        fields = lines[1].split(",")
        row = dict(zip(fields, lines[2].split(",")))
        assert float(row["eps"]) == records[0].eps
        assert float(row["energy_v1"]) == records[0].energy_v1

    def test_deterministic_bytes(self, records):
        assert records_to_csv(records) == records_to_csv(records)
