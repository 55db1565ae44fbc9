"""Solution structure of the perfect conductivity problem.

The potential with unknown conductor levels is assembled from three
Dirichlet solves: unit potential on one inclusion (v1, then v2 by
symmetry of roles) and the inclusion-grounded response to the outer data
(v0).  The conductor levels C1, C2 follow from the zero-net-flux
conditions, a 2x2 linear system in the six boundary fluxes.  The bounded
part vb = C2*(v1+v2) + v0 carries the blow-up factor: the flux of vb
through the upper inclusion decides whether the composed gradient blows
up as the gap closes, and converges to the touching-limit factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fem
from .closed_forms import gap_rate_m, neck_potential
from .geometry import InclusionPair
from .mesh import INCLUSION1, INCLUSION2, OUTER, Mesh, MeshParams, generate, generate_touching

__all__ = [
    "BoundaryData",
    "SolveBundle",
    "LimitBundle",
    "solve_components",
    "flux_system",
    "solve_constants",
    "solve_bundle",
    "neck_remainder",
    "fit_blowup_limit",
    "estimate_blowup_factor",
    "solve_limit_direct",
]


@dataclass(frozen=True)
class BoundaryData:
    """Outer boundary data presets; all are smooth on the outer circle.

    kinds: 'constant' (value), 'linear_xn', 'linear_x1', 'fourier'
    (cos_coeffs[k-1]*cos(k*theta) + sin_coeffs[k-1]*sin(k*theta)).
    """

    kind: str
    value: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "linear_xn", "linear_x1", "fourier"):
            raise ValueError(f"unknown boundary data kind {self.kind!r}")
        if self.kind == "fourier" and not (self.cos_coeffs or self.sin_coeffs):
            raise ValueError("fourier data needs at least one coefficient")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.kind == "constant":
            return np.full(len(pts), self.value)
        if self.kind == "linear_xn":
            return pts[:, 1].copy()
        if self.kind == "linear_x1":
            return pts[:, 0].copy()
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        out = np.zeros(len(pts))
        for k, a in enumerate(self.cos_coeffs, start=1):
            out += a * np.cos(k * theta)
        for k, b in enumerate(self.sin_coeffs, start=1):
            out += b * np.sin(k * theta)
        return out

    def scale(self, outer_radius: float) -> float:
        """Size proxy used to normalize tolerances."""
        if self.kind == "constant":
            return max(1.0, abs(self.value))
        if self.kind in ("linear_xn", "linear_x1"):
            return max(1.0, outer_radius)
        return max(1.0, sum(map(abs, self.cos_coeffs)) + sum(map(abs, self.sin_coeffs)))


@dataclass
class SolveBundle:
    """Component fields, flux matrix, conductor levels and derived fields."""

    mesh: Mesh
    phi: BoundaryData
    v1: fem.ScalarField
    v2: fem.ScalarField
    v0: fem.ScalarField
    a11: float
    a12: float
    a21: float
    a22: float
    b1: float
    b2: float
    c1: float
    c2: float
    u: fem.ScalarField
    vb: fem.ScalarField
    b_factor: float
    b_factor_system: float
    c_diff_residual: float


def solve_components(
    op: fem.StiffnessOperator, phi: BoundaryData
) -> tuple[fem.ScalarField, fem.ScalarField, fem.ScalarField]:
    """Unit-potential fields of each inclusion and the grounded response."""
    v1 = op.solve_dirichlet({INCLUSION1: 1.0, INCLUSION2: 0.0, OUTER: 0.0})
    v2 = op.solve_dirichlet({INCLUSION1: 0.0, INCLUSION2: 1.0, OUTER: 0.0})
    v0 = op.solve_dirichlet({INCLUSION1: 0.0, INCLUSION2: 0.0, OUTER: phi.evaluate})
    return v1, v2, v0


def flux_system(
    op: fem.StiffnessOperator,
    v1: fem.ScalarField,
    v2: fem.ScalarField,
    v0: fem.ScalarField,
) -> tuple[np.ndarray, np.ndarray]:
    """Flux matrix a_ij (field j through inclusion i) and loads b_i."""
    a = np.array(
        [
            [op.flux(v1, INCLUSION1), op.flux(v2, INCLUSION1)],
            [op.flux(v1, INCLUSION2), op.flux(v2, INCLUSION2)],
        ]
    )
    b = np.array([-op.flux(v0, INCLUSION1), -op.flux(v0, INCLUSION2)])
    return a, b


def solve_constants(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Conductor levels from the zero-net-flux system."""
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    scale = abs(a[0, 0] * a[1, 1]) + abs(a[0, 1] * a[1, 0])
    if abs(det) <= 1e-14 * max(scale, 1e-300):
        raise fem.SolverError(f"flux system is singular (det {det:.3e} vs scale {scale:.3e})")
    c1 = (b[0] * a[1, 1] - a[0, 1] * b[1]) / det
    c2 = (a[0, 0] * b[1] - b[0] * a[1, 0]) / det
    return float(c1), float(c2)


def solve_bundle(
    mesh: Mesh, phi: BoundaryData, op: fem.StiffnessOperator | None = None
) -> SolveBundle:
    """Full pipeline on one mesh: components, fluxes, levels, composition.

    The bounded field is composed algebraically as vb = c2*(v1+v2) + v0,
    which satisfies its defining problem exactly in the discrete space.
    The blow-up factor is recorded both as the direct flux of vb and as
    b1 - c2*(a11+a12); the two must agree to rounding.
    """
    if op is None:
        op = fem.assemble(mesh)
    v1, v2, v0 = solve_components(op, phi)
    a, b = flux_system(op, v1, v2, v0)
    c1, c2 = solve_constants(a, b)
    u = fem.ScalarField(mesh, c1 * v1.values + c2 * v2.values + v0.values)
    vb = fem.ScalarField(mesh, c2 * (v1.values + v2.values) + v0.values)
    b_direct = -op.flux(vb, INCLUSION1)
    b_system = b[0] - c2 * (a[0, 0] + a[0, 1])
    c_diff_residual = (c1 - c2) - b_direct / a[0, 0]
    return SolveBundle(
        mesh=mesh,
        phi=phi,
        v1=v1,
        v2=v2,
        v0=v0,
        a11=float(a[0, 0]),
        a12=float(a[0, 1]),
        a21=float(a[1, 0]),
        a22=float(a[1, 1]),
        b1=float(b[0]),
        b2=float(b[1]),
        c1=c1,
        c2=c2,
        u=u,
        vb=vb,
        b_factor=float(b_direct),
        b_factor_system=float(b_system),
        c_diff_residual=float(c_diff_residual),
    )


def neck_remainder(pair: InclusionPair, bundle: SolveBundle) -> fem.ScalarField:
    """Difference between the solved unit-potential field and the explicit
    neck potential, as a nodal field supported on the neck strip."""
    mesh = bundle.mesh
    ids = np.unique(mesh.triangles[mesh.neck])
    w = np.zeros(mesh.vertex_count)
    for i in ids:
        w[i] = bundle.v1.values[i] - neck_potential(pair, mesh.vertices[i])
    return fem.ScalarField(mesh, w)


# ---------------------------------------------------------------------------
# blow-up factor: gap extrapolation and the truncated-cusp limit


@dataclass
class LimitBundle:
    """Estimated touching-limit quantities with an uncertainty."""

    method: str
    b0: float
    b0_uncertainty: float
    c0: float
    rate_coefficient: float | None
    abscissae: np.ndarray
    values: np.ndarray
    fields: dict | None = None


def fit_blowup_limit(
    eps: np.ndarray, values: np.ndarray, n: int, m: float
) -> tuple[float, float, float]:
    """Least squares of values = b0 + c * rate(eps); returns (b0, c, se_b0)."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(eps) < 3:
        raise ValueError("need at least three gap values to extrapolate")
    rho = np.array([gap_rate_m(e, n, m) for e in eps])
    x = np.column_stack([np.ones_like(rho), rho])
    gram = x.T @ x
    cond = np.linalg.cond(gram)
    if cond > 1e12:
        raise ValueError(f"extrapolation regressors nearly collinear (cond {cond:.2e})")
    coef, *_ = np.linalg.lstsq(x, values, rcond=None)
    resid = values - x @ coef
    dof = max(len(eps) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(gram)
    return float(coef[0]), float(coef[1]), float(math.sqrt(max(cov[0, 0], 0.0)))


def estimate_blowup_factor(
    pair: InclusionPair,
    phi: BoundaryData,
    eps_list: list[float],
    params: MeshParams,
) -> LimitBundle:
    """Extrapolate the bounded-field flux to the touching limit.

    Solves one bundle per gap (lower inclusion fixed, upper translated)
    and fits value = b0 + c * rate.  The reported uncertainty combines the
    fit standard error with the residual spread.
    """
    if len(eps_list) < 3:
        raise ValueError("need at least three gap values")
    span = max(eps_list) / min(eps_list)
    if span < 100.0:
        raise ValueError("gap values should span at least two decades")
    m, _ = pair.profile.power_equivalent()
    eps_arr = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    b_vals = []
    c_means = []
    for eps in eps_arr:
        bundle = solve_bundle(generate(pair.with_gap(eps), params), phi)
        b_vals.append(bundle.b_factor)
        c_means.append(0.5 * (bundle.c1 + bundle.c2))
    b_vals = np.asarray(b_vals)
    b0, coef, se = fit_blowup_limit(eps_arr, b_vals, pair.dimension, m)
    rho = np.array([gap_rate_m(e, pair.dimension, m) for e in eps_arr])
    resid = b_vals - (b0 + coef * rho)
    uncertainty = se + float(np.max(np.abs(resid)))
    c0_fit, _, _ = fit_blowup_limit(eps_arr, np.asarray(c_means), pair.dimension, m)
    return LimitBundle(
        method="extrapolated",
        b0=b0,
        b0_uncertainty=uncertainty,
        c0=c0_fit,
        rate_coefficient=coef,
        abscissae=eps_arr,
        values=b_vals,
    )


def solve_limit_direct(
    pair: InclusionPair,
    phi: BoundaryData,
    r_cuts: list[float],
    params: MeshParams,
) -> LimitBundle:
    """Touching-limit factor from meshes with the cusp excised.

    The channel |x| < r_cut is removed and its fibers become boundary of
    the merged conductor; the single level c0 follows from the combined
    zero-flux condition, and the factor is the flux of c0*u1 + u0 through
    the upper part.  The sequence over shrinking r_cut is Aitken
    extrapolated; the uncertainty is the extrapolation's own correction.
    """
    if pair.eps != 0.0:
        pair = pair.with_gap(0.0)
    cuts = sorted(r_cuts, reverse=True)
    if len(cuts) < 2:
        raise ValueError("need at least two cut radii")
    b_vals = []
    c_vals = []
    fields = None
    for r_cut in cuts:
        mesh = generate_touching(pair, r_cut, params)
        op = fem.assemble(mesh)
        u1 = op.solve_dirichlet({INCLUSION1: 1.0, INCLUSION2: 1.0, OUTER: 0.0})
        u0 = op.solve_dirichlet({INCLUSION1: 0.0, INCLUSION2: 0.0, OUTER: phi.evaluate})
        denom = op.flux(u1, INCLUSION1) + op.flux(u1, INCLUSION2)
        if denom <= 0.0:
            raise fem.SolverError(f"merged-conductor flux {denom:.3e} should be positive")
        c0 = -(op.flux(u0, INCLUSION1) + op.flux(u0, INCLUSION2)) / denom
        b0 = -(c0 * op.flux(u1, INCLUSION1) + op.flux(u0, INCLUSION1))
        b_vals.append(b0)
        c_vals.append(c0)
        composed = fem.ScalarField(mesh, c0 * u1.values + u0.values)
        fields = {"u1": u1, "u0": u0, "u_limit": composed, "mesh": mesh}
    b_arr = np.asarray(b_vals)
    if len(b_arr) >= 3:
        d1 = b_arr[-2] - b_arr[-3]
        d2 = b_arr[-1] - b_arr[-2]
        denom = d2 - d1
        if abs(denom) > 1e-14 * max(abs(d1), abs(d2), 1e-300) and abs(d2) < abs(d1):
            b_ext = b_arr[-1] - d2 * d2 / denom
        else:
            b_ext = b_arr[-1]
    else:
        b_ext = b_arr[-1]
    uncertainty = abs(b_ext - b_arr[-1]) + 0.5 * abs(b_arr[-1] - b_arr[-2])
    return LimitBundle(
        method="direct_truncated_cusp",
        b0=float(b_ext),
        b0_uncertainty=float(uncertainty),
        c0=float(c_vals[-1]),
        rate_coefficient=None,
        abscissae=np.asarray(cuts, dtype=float),
        values=b_arr,
        fields=fields,
    )
