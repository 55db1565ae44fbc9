"""Sweeps, rate fits, constant adjudication and convergence studies.

A sweep solves the conductor problem over a decreasing gap list and
collects per-gap observables; ordinary least squares on log-log data
turns them into blow-up rates, and the energy column is fitted against
amplitude/rate + offset to extract the leading constant, which is then
tabulated against the quadrature oracle and the printed value.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .closed_forms import (
    energy_limit_constant,
    gap_rate_m,
    neck_potential,
    printed_energy_constant,
)
from .conductivity import BoundaryData, SolveBundle, neck_remainder, solve_bundle
from .geometry import InclusionPair
from .mesh import Mesh, MeshParams, generate, refine_quadrisect

__all__ = [
    "SweepRecord",
    "FitResult",
    "EnergyFit",
    "LeadingTermReport",
    "ConvergenceReport",
    "run_sweep",
    "sweep_record",
    "fit_rate",
    "fit_energy_constants",
    "verify_leading_term",
    "mesh_convergence",
    "vb_station_profile",
    "records_to_csv",
    "SWEEP_CSV_HEADER",
]


@dataclass
class SweepRecord:
    """Observables of one gap value."""

    eps: float
    rate: float
    energy_v1: float
    a11: float
    a12: float
    a21: float
    a22: float
    b1: float
    b2: float
    c1: float
    c2: float
    b_factor: float
    max_grad_u_neck: float
    max_grad_v1_neck: float
    max_grad_w_neck: float
    max_grad_vb_neck: float
    vb_center: float
    vb_offside: float
    centerline_residual: float
    vertex_count: int
    triangle_count: int
    wall_time: float
    vb_profile: list[tuple[float, float]] = field(default_factory=list)

    @property
    def c_diff(self) -> float:
        return self.c1 - self.c2

    @property
    def c_mean(self) -> float:
        return 0.5 * (self.c1 + self.c2)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float
    residual_norm: float
    model: str


def _ols(x: np.ndarray, y: np.ndarray, model: str) -> FitResult:
    a = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = max(len(x) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    gram_inv = np.linalg.inv(a.T @ a)
    stderr = math.sqrt(max(sigma2 * gram_inv[0, 0], 0.0))
    return FitResult(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        stderr=stderr,
        residual_norm=float(np.linalg.norm(resid)),
        model=model,
    )


def vb_station_profile(bundle: SolveBundle) -> list[tuple[float, float]]:
    """Largest |grad vb| per neck station column, inner to outer."""
    grads = fem.element_gradients(bundle.vb)
    norms = np.hypot(grads[:, 0], grads[:, 1])
    mesh = bundle.mesh
    cols = mesh.neck_column_x[mesh.neck]
    vals = norms[mesh.neck]
    out = []
    for x in np.unique(cols):
        out.append((float(x), float(vals[cols == x].max())))
    return out


def _centerline_residual(pair: InclusionPair, bundle: SolveBundle) -> float:
    """Max over gap-centerline triangles of |grad u - (c1-c2) grad of the
    explicit neck potential|, with the potential represented in the same
    P1 space (nodal interpolation) so the comparison is consistent."""
    mesh = bundle.mesh
    neck_ids = np.flatnonzero(mesh.neck)
    vert_ids = np.unique(mesh.triangles[neck_ids])
    ramp = np.zeros(mesh.vertex_count)
    for i in vert_ids:
        ramp[i] = neck_potential(pair, mesh.vertices[i])
    grads_u = fem.element_gradients(bundle.u)
    grads_ramp = fem.element_gradients(fem.ScalarField(mesh, ramp))
    coeff = bundle.c1 - bundle.c2
    levels = ramp[mesh.triangles[neck_ids]].mean(axis=1)
    col_vals = mesh.neck_column_x[neck_ids]
    worst = 0.0
    for x in np.unique(col_vals):
        sel = col_vals == x
        ids = neck_ids[sel]
        tri = ids[np.argmin(np.abs(levels[sel] - 0.5))]
        resid = grads_u[tri] - coeff * grads_ramp[tri]
        worst = max(worst, float(np.hypot(resid[0], resid[1])))
    return worst


def sweep_record(pair: InclusionPair, mesh: Mesh, phi: BoundaryData) -> SweepRecord:
    """Solve one gap value and collect its observables."""
    t0 = time.perf_counter()
    bundle = solve_bundle(mesh, phi)
    w = neck_remainder(pair, bundle)
    mg_u, _ = fem.max_gradient(bundle.u, "neck")
    mg_v1, _ = fem.max_gradient(bundle.v1, "neck")
    mg_w, _ = fem.max_gradient(w, "neck")
    mg_vb, _ = fem.max_gradient(bundle.vb, "neck")
    profile = vb_station_profile(bundle)
    xs = np.array([p[0] for p in profile])
    vs = np.array([p[1] for p in profile])
    vb_center = float(vs[np.argmin(np.abs(xs))])
    half = pair.neck_radius / 2.0
    vb_off = max(
        float(vs[np.argmin(np.abs(xs - half))]),
        float(vs[np.argmin(np.abs(xs + half))]),
    )
    m, _ = pair.profile.power_equivalent()
    return SweepRecord(
        eps=pair.eps,
        rate=gap_rate_m(pair.eps, pair.dimension, m),
        energy_v1=bundle.a11,
        a11=bundle.a11,
        a12=bundle.a12,
        a21=bundle.a21,
        a22=bundle.a22,
        b1=bundle.b1,
        b2=bundle.b2,
        c1=bundle.c1,
        c2=bundle.c2,
        b_factor=bundle.b_factor,
        max_grad_u_neck=mg_u,
        max_grad_v1_neck=mg_v1,
        max_grad_w_neck=mg_w,
        max_grad_vb_neck=mg_vb,
        vb_center=vb_center,
        vb_offside=vb_off,
        centerline_residual=_centerline_residual(pair, bundle),
        vertex_count=mesh.vertex_count,
        triangle_count=mesh.triangle_count,
        wall_time=time.perf_counter() - t0,
        vb_profile=profile,
    )


def _sweep_entry(args) -> tuple[float, SweepRecord | None, str | None]:
    pair, eps, phi, params = args
    try:
        p = pair.with_gap(eps)
        return eps, sweep_record(p, generate(p, params), phi), None
    except Exception as exc:  # noqa: BLE001 - per-gap failures are data
        return eps, None, f"{type(exc).__name__}: {exc}"


def run_sweep(
    pair: InclusionPair,
    phi: BoundaryData,
    eps_list: list[float],
    params: MeshParams,
    workers: int | None = None,
) -> tuple[list[SweepRecord], dict[float, str]]:
    """One record per gap, largest gap first; per-gap failures collected.

    Gap values are independent, so with ``workers`` they solve in a
    process pool; results are assembled in gap order either way.
    """
    eps_sorted = sorted(set(eps_list), reverse=True)
    if len(eps_sorted) < 4:
        raise ValueError("a sweep needs at least four distinct gap values")
    if eps_sorted[0] / eps_sorted[-1] < 100.0:
        raise ValueError("a sweep should span at least two decades")
    jobs = [(pair, eps, phi, params) for eps in eps_sorted]
    if workers is not None and workers > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_entry, jobs))
    else:
        outcomes = [_sweep_entry(job) for job in jobs]
    records: list[SweepRecord] = []
    failures: dict[float, str] = {}
    for eps, record, error in outcomes:
        if record is not None:
            records.append(record)
        else:
            failures[eps] = error
    if not records:
        raise RuntimeError(f"every gap value failed: {failures}")
    return records, failures


def fit_rate(records: list[SweepRecord], quantity: str) -> FitResult:
    """Least squares of log(quantity) on log(gap)."""
    if len(records) < 4:
        raise ValueError("need at least four records to fit a rate")
    eps = np.array([r.eps for r in records])
    vals = np.array([getattr(r, quantity) for r in records], dtype=float)
    if np.any(vals <= 0.0):
        raise ValueError(f"quantity {quantity} must be positive for a log-log fit")
    return _ols(np.log(eps), np.log(vals), model=f"log({quantity}) ~ slope*log(eps)+b")


@dataclass(frozen=True)
class EnergyFit:
    """Energy asymptote fit with the three-way constant adjudication."""

    amplitude: float
    offset: float
    fit: FitResult
    oracle_constant: float
    printed_constant: float
    amplitude_over_oracle: float
    amplitude_over_printed: float
    offset_half_range: float

    def table(self) -> list[tuple[str, float]]:
        return [
            ("fitted amplitude", self.amplitude),
            ("oracle constant", self.oracle_constant),
            ("printed constant", self.printed_constant),
            ("fitted / oracle", self.amplitude_over_oracle),
            ("fitted / printed", self.amplitude_over_printed),
            ("fitted offset", self.offset),
            ("offset (lower half refit)", self.offset_half_range),
        ]


def fit_energy_constants(records: list[SweepRecord], pair: InclusionPair) -> EnergyFit:
    """Fit energy = amplitude/rate + offset and adjudicate the amplitude."""
    if len(records) < 4:
        raise ValueError("need at least four records to fit the energy asymptote")
    inv_rate = np.array([1.0 / r.rate for r in records])
    energy = np.array([r.energy_v1 for r in records])
    fit = _ols(inv_rate, energy, model="energy ~ amplitude/rate + offset")
    half = len(records) // 2
    fit_lo = _ols(inv_rate[half:], energy[half:], model="lower-half refit")
    m, lam = pair.profile.power_equivalent()
    oracle = energy_limit_constant(pair.dimension, m, lam)
    printed = printed_energy_constant(pair.dimension, m, lam)
    return EnergyFit(
        amplitude=fit.slope,
        offset=fit.intercept,
        fit=fit,
        oracle_constant=oracle,
        printed_constant=printed,
        amplitude_over_oracle=fit.slope / oracle,
        amplitude_over_printed=fit.slope / printed,
        offset_half_range=fit_lo.intercept,
    )


@dataclass(frozen=True)
class LeadingTermReport:
    """Boundedness of the centerline remainder and coefficient agreement."""

    residuals: tuple[float, ...]
    residual_growth: float
    coefficient_ratios: tuple[float, ...]
    final_ratio: float


def verify_leading_term(
    records: list[SweepRecord], blowup_factor: float, amplitude: float
) -> LeadingTermReport:
    """Check the composed gradient against its predicted leading term.

    The centerline residual |grad u - (c1-c2) grad(neck potential)| must
    stay of order one across the sweep, and (c1-c2) must track
    blowup_factor * rate / amplitude.
    """
    resid = tuple(r.centerline_residual for r in records)
    growth = max(resid) / max(resid[0], 1e-300)
    ratios = []
    for r in records:
        predicted = blowup_factor * r.rate / amplitude
        ratios.append(r.c_diff / predicted if predicted != 0.0 else math.nan)
    return LeadingTermReport(
        residuals=resid,
        residual_growth=growth,
        coefficient_ratios=tuple(ratios),
        final_ratio=ratios[-1],
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Self-convergence of key scalars under nested refinement."""

    levels: int
    energies: tuple[float, ...]
    c_diffs: tuple[float, ...]
    b_factors: tuple[float, ...]
    shrink_ok: bool
    min_shrink: float
    error_bar: float
    error_bar_rel: float

    def diffs(self, values: tuple[float, ...]) -> np.ndarray:
        return np.abs(np.diff(np.asarray(values)))


def mesh_convergence(
    pair: InclusionPair,
    phi: BoundaryData,
    params: MeshParams,
    levels: int = 3,
    shrink_factor: float = 1.5,
) -> ConvergenceReport:
    """Solve on a nested quadrisection ladder and check difference decay.

    The finest two levels define the discretization error bar attached to
    acceptance checks.
    """
    if levels < 3:
        raise ValueError("need at least three ladder levels")
    mesh = generate(pair, params)
    energies, c_diffs, b_factors = [], [], []
    for level in range(levels):
        if level:
            mesh = refine_quadrisect(mesh, pair)
        bundle = solve_bundle(mesh, phi)
        energies.append(bundle.a11)
        c_diffs.append(bundle.c1 - bundle.c2)
        b_factors.append(bundle.b_factor)
    min_shrink = math.inf
    shrink_ok = True
    for series in (energies, c_diffs, b_factors):
        d = np.abs(np.diff(np.asarray(series)))
        if np.any(d == 0.0):
            continue  # converged below rounding; cannot shrink further
        ratios = d[:-1] / d[1:]
        if len(ratios):
            min_shrink = min(min_shrink, float(ratios.min()))
            if np.any(ratios < shrink_factor):
                shrink_ok = False
    error_bar = abs(energies[-1] - energies[-2])
    return ConvergenceReport(
        levels=levels,
        energies=tuple(energies),
        c_diffs=tuple(c_diffs),
        b_factors=tuple(b_factors),
        shrink_ok=shrink_ok,
        min_shrink=min_shrink,
        error_bar=error_bar,
        error_bar_rel=error_bar / abs(energies[-1]),
    )


# ---------------------------------------------------------------------------
# persistence

SWEEP_CSV_HEADER = (
    "# neckfield-sweep-v1",
    "eps,rate,energy_v1,a11,a12,a21,a22,b1,b2,c1,c2,b_factor,"
    "max_grad_u_neck,max_grad_v1_neck,max_grad_w_neck,max_grad_vb_neck,"
    "vb_center,vb_offside,centerline_residual,vertex_count,triangle_count",
)

_CSV_FIELDS = SWEEP_CSV_HEADER[1].split(",")


def records_to_csv(records: list[SweepRecord]) -> str:
    """Versioned CSV, one row per record.

    Timing is deliberately excluded so reruns of the same configuration
    produce identical bytes; wall times live in the run manifest.
    """
    buf = io.StringIO()
    buf.write(SWEEP_CSV_HEADER[0] + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_FIELDS)
    for r in records:
        row = []
        for name in _CSV_FIELDS:
            value = getattr(r, name)
            row.append(repr(value) if isinstance(value, float) else str(value))
        writer.writerow(row)
    return buf.getvalue()
