"""Acceptance suite: nine gate criteria with pinned tolerances.

Each criterion is a function of a shared context (so the two heavy sweeps
are solved once) returning a CriterionResult; run_all executes every
criterion and reports one pass/fail line each.  Geometry and boundary
data are pinned per criterion; mesh resolution and fit tolerances come
from the configuration.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import closed_forms as cf
from . import fem
from .conductivity import (
    BoundaryData,
    fit_blowup_limit,
    solve_bundle,
    solve_limit_direct,
)
from .config import ExperimentConfig
from .experiments import (
    fit_energy_constants,
    fit_rate,
    mesh_convergence,
    run_sweep,
)
from .geometry import InclusionPair, NeckProfile, ProfileKind
from .mesh import INCLUSION1, INCLUSION2, OUTER, MeshParams, generate

__all__ = ["CriterionResult", "AcceptanceContext", "run_all", "CRITERIA"]


@dataclass
class CriterionResult:
    name: str
    passed: bool
    runtime: float
    details: list[str]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {status} ({self.runtime:.1f}s)"


class AcceptanceContext:
    """Shared solves for the acceptance criteria."""

    def __init__(self, cfg: ExperimentConfig | None = None):
        self.cfg = cfg or ExperimentConfig()
        self.params = self.cfg.mesh
        self.tol = self.cfg.tolerances
        self.phi = BoundaryData(kind="linear_xn")
        self.eps_list = [1e-2 * 4.0 ** (-k) for k in range(6)]
        self._cache: dict[str, object] = {}

    # pinned geometries ----------------------------------------------------

    def quad_pair(self, eps: float) -> InclusionPair:
        profile = NeckProfile(kind=ProfileKind.QUADRATIC, curvatures=(2.0,))
        return InclusionPair(dimension=2, profile=profile, eps=eps)

    def pow4_pair(self, eps: float) -> InclusionPair:
        profile = NeckProfile(kind=ProfileKind.POWER_LAW, order=4.0, coefficient=4.0)
        return InclusionPair(dimension=2, profile=profile, eps=eps)

    # cached heavy artifacts ------------------------------------------------

    def _get(self, key: str, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def records_m2(self):
        return self._get(
            "records_m2",
            lambda: run_sweep(self.quad_pair(1e-3), self.phi, self.eps_list, self.params)[0],
        )

    def records_m4(self):
        return self._get(
            "records_m4",
            lambda: run_sweep(self.pow4_pair(1e-3), self.phi, self.eps_list, self.params)[0],
        )

    def convergence(self):
        return self._get(
            "convergence",
            lambda: mesh_convergence(self.quad_pair(1e-3), self.phi, self.params, levels=4),
        )

    def blowup_extrapolated(self):
        def build():
            records = self.records_m2()
            eps = np.array([r.eps for r in records])
            vals = np.array([r.b_factor for r in records])
            b0, coef, se = fit_blowup_limit(eps, vals, 2, 2.0)
            rho = np.sqrt(eps)
            resid = vals - (b0 + coef * rho)
            return b0, se + float(np.max(np.abs(resid)))

        return self._get("b0_ext", build)

    def blowup_direct(self):
        def build():
            pair0 = self.quad_pair(0.0)
            cuts = [0.08, 0.04, 0.02]
            base = solve_limit_direct(pair0, self.phi, cuts, self.params)
            finer = solve_limit_direct(
                pair0,
                self.phi,
                cuts,
                MeshParams(
                    layers=self.params.layers,
                    h_far=self.params.h_far,
                    grading_exponent=self.params.grading_exponent,
                    neck_step_factor=self.params.neck_step_factor,
                    refinement=self.params.refinement + 2,
                ),
            )
            mesh_term = abs(base.b0 - finer.b0)
            return base.b0, base.b0_uncertainty + mesh_term, finer.b0, finer.b0_uncertainty + mesh_term

        return self._get("b0_dir", build)


def _result(name: str, t0: float, checks: list[tuple[str, bool]]) -> CriterionResult:
    details = [f"{'ok ' if ok else 'BAD'} {text}" for text, ok in checks]
    return CriterionResult(
        name=name,
        passed=all(ok for _, ok in checks),
        runtime=time.perf_counter() - t0,
        details=details,
    )


def criterion_1_closed_form_constants(ctx: AcceptanceContext) -> CriterionResult:
    """Analytic identity vs quadrature for the order-m constants."""
    t0 = time.perf_counter()
    checks = []
    for m, n in ((2, 2), (3, 2), (4, 2), (6, 2), (3, 3), (4, 3), (6, 3)):
        val = cf.profile_energy_constant(float(m), n)
        diff = abs(val.difference)
        checks.append((f"constant(m={m},n={n}) |analytic-quadrature| = {diff:.2e} <= 1e-9", diff <= 1e-9))
    runtime = time.perf_counter() - t0
    checks.append((f"runtime {runtime:.3f}s < 1s", runtime < 1.0))
    return _result("C1 closed-form constants", t0, checks)


def criterion_2_oracle_asymptotics(ctx: AcceptanceContext) -> CriterionResult:
    """Scaling limits of the gap integral pin the energy constants."""
    t0 = time.perf_counter()
    checks = []
    val2 = cf.gap_integral_radial(2, 2.0, 1.0, 1e-8, 0.5) * math.sqrt(1e-8)
    checks.append(
        (f"2D strict convexity: integral*sqrt(gap) = {val2:.6f} within 1% of pi", abs(val2 / math.pi - 1.0) <= 0.01)
    )
    # Logarithmic branch: the offset log(lam*R0^2) decays only like the
    # rate itself, so the window is checked on a wide neck.
    r0_log = 0.9
    val3 = cf.gap_integral_radial(3, 2.0, 1.0, 1e-10, r0_log) / abs(math.log(1e-10))
    checks.append(
        (
            f"3D strict convexity (R0={r0_log}): integral/|log gap| = {val3:.6f} within 2% of pi",
            abs(val3 / math.pi - 1.0) <= 0.02,
        )
    )
    prods = [
        cf.gap_integral_radial(2, 4.0, 1.0, eps, 0.5) * eps**0.75 for eps in (1e-6, 1e-8, 1e-10)
    ]
    ratios = [prods[i + 1] / prods[i] for i in range(2)]
    checks.append(
        (
            f"2D order 4: successive products ratio {ratios[-1]:.6f} within 1% of 1",
            all(abs(r - 1.0) <= 0.01 for r in ratios),
        )
    )
    # Adjudication of printed constants against the oracle (reported).
    r32 = cf.printed_energy_constant(3, 2.0, 1.0) / cf.energy_limit_constant(3, 2.0, 1.0)
    r22 = cf.printed_energy_constant(2, 2.0, 1.0) / cf.energy_limit_constant(2, 2.0, 1.0)
    r42_1 = cf.printed_energy_constant(2, 4.0, 1.0) / cf.energy_limit_constant(2, 4.0, 1.0)
    r42_2 = cf.printed_energy_constant(2, 4.0, 2.0) / cf.energy_limit_constant(2, 4.0, 2.0)
    checks.append((f"printed/oracle n=2,m=2: {r22:g} (curvature constant matches)", True))
    checks.append((f"printed/oracle n=3,m=2: {r32:g} (printed is half the oracle)", True))
    checks.append(
        (
            f"printed/oracle n=2,m=4: {r42_1:g} at coeff 1, {r42_2:g} at coeff 2 "
            "(missing factor 2 and opposite coefficient power)",
            True,
        )
    )
    checks.append(("dimension 3 is quadrature-verified here, not solved by FEM", True))
    runtime = time.perf_counter() - t0
    checks.append((f"runtime {runtime:.3f}s < 5s", runtime < 5.0))
    return _result("C2 oracle asymptotics", t0, checks)


def criterion_3_structural_identities(ctx: AcceptanceContext) -> CriterionResult:
    """Exact discrete identities on the default mesh at gap 1e-3."""
    t0 = time.perf_counter()
    pair = ctx.quad_pair(1e-3)
    mesh = generate(pair, ctx.params)
    op = fem.assemble(mesh)
    bundle = solve_bundle(mesh, ctx.phi, op=op)
    checks = []
    rec = abs(bundle.a12 - bundle.a21) / abs(bundle.a12)
    checks.append((f"flux reciprocity rel {rec:.2e} <= 1e-8", rec <= 1e-8))
    en = op.energy(bundle.v1)
    en_rel = abs(bundle.a11 - en) / en
    checks.append((f"a11 vs energy rel {en_rel:.2e} <= 1e-10", en_rel <= 1e-10))
    decomp = np.abs(
        bundle.u.values - ((bundle.c1 - bundle.c2) * bundle.v1.values + bundle.vb.values)
    ).max()
    checks.append((f"decomposition identity {decomp:.2e} <= 1e-12", decomp <= 1e-12))
    for name, f in (("v1", bundle.v1), ("v2", bundle.v2)):
        viol = max(float(-f.values.min()), float(f.values.max() - 1.0), 0.0)
        checks.append((f"maximum principle {name} violation {viol:.2e} <= 1e-10", viol <= 1e-10))
    total = abs(
        op.flux(bundle.v1, OUTER) + op.flux(bundle.v1, INCLUSION1) + op.flux(bundle.v1, INCLUSION2)
    )
    checks.append((f"total flux of v1 {total:.2e} <= 1e-10", total <= 1e-10))
    runtime = time.perf_counter() - t0
    checks.append((f"runtime {runtime:.1f}s < 60s", runtime < 60.0))
    return _result("C3 structural identities", t0, checks)


def criterion_4_blowup_rates(ctx: AcceptanceContext) -> CriterionResult:
    """Log-log slopes of the composed and unit-potential gradients."""
    t0 = time.perf_counter()
    tol = ctx.tol.rate_slope
    rec2 = ctx.records_m2()
    rec4 = ctx.records_m4()
    checks = []
    s_u2 = fit_rate(rec2, "max_grad_u_neck").slope
    checks.append((f"m=2 slope of max|grad u| = {s_u2:.4f} in -0.5 +- {tol}", abs(s_u2 + 0.5) <= tol))
    s_u4 = fit_rate(rec4, "max_grad_u_neck").slope
    checks.append((f"m=4 slope of max|grad u| = {s_u4:.4f} in -0.25 +- {tol}", abs(s_u4 + 0.25) <= tol))
    s_v2 = fit_rate(rec2, "max_grad_v1_neck").slope
    checks.append((f"m=2 slope of max|grad v1| = {s_v2:.4f} in -1 +- {tol}", abs(s_v2 + 1.0) <= tol))
    span = rec2[0].eps / rec2[-1].eps
    checks.append(
        (f"sweep spans {math.log10(span):.1f} decades (>= 2.5) down to {rec2[-1].eps:.1e} <= 1e-5",
         math.log10(span) >= 2.5 and rec2[-1].eps <= 1e-5)
    )
    runtime = time.perf_counter() - t0
    checks.append((f"runtime {runtime:.1f}s < 20min", runtime < 1200.0))
    return _result("C4 blow-up rates", t0, checks)


def criterion_5_energy_constants(ctx: AcceptanceContext) -> CriterionResult:
    """Fitted energy amplitude against the oracle and the printed value."""
    t0 = time.perf_counter()
    rec2 = ctx.records_m2()
    pair = ctx.quad_pair(1e-3)
    efit = fit_energy_constants(rec2, pair)
    tol = ctx.tol.energy_constant_rel
    checks = [
        (
            f"amplitude {efit.amplitude:.5f} within {100 * tol:.0f}% of oracle pi "
            f"(ratio {efit.amplitude_over_oracle:.4f})",
            abs(efit.amplitude_over_oracle - 1.0) <= tol,
        ),
        (
            f"amplitude within {100 * tol:.0f}% of curvature constant "
            f"(ratio {efit.amplitude_over_printed:.4f})",
            abs(efit.amplitude_over_printed - 1.0) <= tol,
        ),
    ]
    off_move = abs(efit.offset_half_range - efit.offset) / max(abs(efit.offset), 1e-300)
    checks.append(
        (
            f"offset {efit.offset:.4f} moves {100 * off_move:.1f}% under half-range refit "
            f"(<= {100 * ctx.tol.offset_stability:.0f}%)",
            off_move <= ctx.tol.offset_stability,
        )
    )
    return _result("C5 energy constants", t0, checks)


def criterion_6_degeneracy_and_symmetry(ctx: AcceptanceContext) -> CriterionResult:
    """Constant data kills the blow-up; odd data kills the level gap."""
    t0 = time.perf_counter()
    const = BoundaryData(kind="constant", value=2.0)
    checks = []
    max_grads = []
    for eps in (1e-2, 1e-4, 1e-5):
        pair = ctx.quad_pair(eps)
        bundle = solve_bundle(generate(pair, ctx.params), const)
        checks.append(
            (f"eps={eps:.0e} constant data: |B| = {abs(bundle.b_factor):.2e} <= 1e-10",
             abs(bundle.b_factor) <= 1e-10)
        )
        lev = max(abs(bundle.c1 - 2.0), abs(bundle.c2 - 2.0))
        checks.append((f"eps={eps:.0e} constant data: levels off by {lev:.2e} <= 1e-10", lev <= 1e-10))
        mg, _ = fem.max_gradient(bundle.u, "neck")
        max_grads.append(mg)
    checks.append(
        (f"constant data: max|grad u| stays {max(max_grads):.2e} <= 1e-6 across sweep",
         max(max_grads) <= 1e-6)
    )
    pair = ctx.quad_pair(1e-3)
    odd = BoundaryData(kind="linear_x1")
    bundle = solve_bundle(generate(pair, ctx.params), odd)
    scale = odd.scale(pair.outer_radius)
    gap = abs(bundle.c1 - bundle.c2)
    checks.append(
        (f"odd-in-x data on symmetric pair: |C1-C2| = {gap:.2e} <= 1e-8*scale", gap <= 1e-8 * scale)
    )
    return _result("C6 degeneracy and symmetry", t0, checks)


def criterion_7_blowup_factor_convergence(ctx: AcceptanceContext) -> CriterionResult:
    """Cauchy rate of the factor and agreement of the two limit methods."""
    t0 = time.perf_counter()
    rec2 = ctx.records_m2()
    eps = np.array([r.eps for r in rec2])
    vals = np.array([r.b_factor for r in rec2])
    diffs = np.abs(vals[:-1] - vals[1:])  # consecutive gaps differ by 4
    a = np.column_stack([np.log(eps[:-1]), np.ones(len(diffs))])
    slope = float(np.linalg.lstsq(a, np.log(diffs), rcond=None)[0][0])
    tol = ctx.tol.cauchy_slope
    checks = [
        (f"Cauchy slope of factor differences = {slope:.4f} in 0.5 +- {tol}", abs(slope - 0.5) <= tol)
    ]
    b0_ext, sig_ext = ctx.blowup_extrapolated()
    # Mesh-level uncertainty from the nested ladder.
    conv = ctx.convergence()
    sig_ext += float(np.abs(np.diff(np.asarray(conv.b_factors))).max())
    b0_dir, sig_dir, _, _ = ctx.blowup_direct()
    gap = abs(b0_ext - b0_dir)
    budget = sig_ext + sig_dir
    checks.append(
        (
            f"extrapolated {b0_ext:.5f} (+-{sig_ext:.1e}) vs truncated-cusp {b0_dir:.5f} "
            f"(+-{sig_dir:.1e}): |diff| {gap:.1e} <= {budget:.1e}",
            gap <= budget,
        )
    )
    return _result("C7 blow-up factor convergence", t0, checks)


def criterion_8_boundedness_surrogates(ctx: AcceptanceContext) -> CriterionResult:
    """Remainder gradient stays put while the singular gradient grows."""
    t0 = time.perf_counter()
    rec2 = ctx.records_m2()
    w_vals = [r.max_grad_w_neck for r in rec2]
    v_vals = [r.max_grad_v1_neck for r in rec2]
    w_span = max(w_vals) / min(w_vals)
    v_growth = max(v_vals) / min(v_vals)
    checks = [
        (f"max|grad(v1 - explicit)| varies {w_span:.2f}x (< 2x) across sweep", w_span < 2.0),
        (f"max|grad v1| grows {v_growth:.0f}x (>= 10x)", v_growth >= 10.0),
    ]
    for r in rec2:
        if r.eps <= 1e-4:
            ratio = r.vb_offside / max(r.vb_center, 1e-300)
            checks.append(
                (f"eps={r.eps:.1e}: |grad vb| at half-neck / center = {ratio:.1e} >= 10", ratio >= 10.0)
            )
    return _result("C8 boundedness surrogates", t0, checks)


def criterion_9_self_convergence(ctx: AcceptanceContext) -> CriterionResult:
    """Nested-refinement differences shrink; finest level sets the error bar."""
    t0 = time.perf_counter()
    conv = ctx.convergence()
    checks = [
        (
            f"difference shrink factor {conv.min_shrink:.2f} >= 1.5 per level "
            f"(energy, level gap, factor)",
            conv.shrink_ok,
        ),
        (
            f"finest error bar {100 * conv.error_bar_rel:.4f}% of energy < 1%",
            conv.error_bar_rel < 0.01,
        ),
    ]
    return _result("C9 self-convergence", t0, checks)


CRITERIA = (
    criterion_1_closed_form_constants,
    criterion_2_oracle_asymptotics,
    criterion_3_structural_identities,
    criterion_4_blowup_rates,
    criterion_5_energy_constants,
    criterion_6_degeneracy_and_symmetry,
    criterion_7_blowup_factor_convergence,
    criterion_8_boundedness_surrogates,
    criterion_9_self_convergence,
)


def run_all(cfg: ExperimentConfig | None = None, echo=print) -> list[CriterionResult]:
    """Run every criterion, one pass/fail line each."""
    ctx = AcceptanceContext(cfg)
    results = []
    for criterion in CRITERIA:
        result = criterion(ctx)
        results.append(result)
        echo(result.line())
        for detail in result.details:
            echo(f"    {detail}")
    return results
