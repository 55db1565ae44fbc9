"""Explicit formulas: blow-up rates, energy constants, singular neck fields.

Everything here is closed-form or quadrature, no meshes.  The central
object is the gap integral

    integral over |x'| < R0 of dx' / (eps + (h1 - h2)(x'))

computed by adaptive quadrature; its eps -> 0 scaling limit is the ground
truth against which the printed energy constants are adjudicated, because
every capacity-type energy asymptote reduces to exactly this integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, InclusionPair, ProfileKind
from .quadrature import adaptive_integral, integral_to_infinity

__all__ = [
    "AsymptoticParams",
    "ConstantsReport",
    "ProfileConstant",
    "LeadingGradient",
    "gap_rate",
    "gap_rate_m",
    "curvature_energy_constant",
    "sphere_surface_measure",
    "reciprocal_power_tail",
    "profile_energy_constant",
    "gap_integral",
    "gap_integral_radial",
    "gap_integral_quadratic",
    "energy_limit_constant",
    "printed_energy_constant",
    "neck_potential",
    "neck_potential_gradient",
    "neck_potential_touching",
    "neck_potential_touching_gradient",
    "leading_gradient",
    "energy_error_scale",
    "energy_error_scale_m",
    "constants_report",
]


def _check_eps(eps: float) -> None:
    if not (0.0 < eps < 1.0):
        raise ValueError(f"gap must lie in (0, 1), got {eps}")


def _check_admissible(n: int, m: float) -> None:
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    if n == 2:
        if m < 2.0:
            raise ValueError(f"order must be >= 2 in dimension 2, got {m}")
    elif m < n - 1:
        raise ValueError(f"order must be >= {n - 1} in dimension {n}, got {m}")


# ---------------------------------------------------------------------------
# rates


def gap_rate(eps: float, n: int) -> float:
    """Classical strictly convex rate: sqrt(eps) in 2D, 1/|log eps| in 3D."""
    _check_eps(eps)
    if n == 2:
        return math.sqrt(eps)
    if n == 3:
        return 1.0 / abs(math.log(eps))
    raise ValueError(f"dimension must be 2 or 3, got {n}")


def gap_rate_m(eps: float, n: int, m: float) -> float:
    """Rate for relative convexity of order m.

    eps^(1 - 1/m) in dimension 2; in dimension n >= 3 it is
    eps^(1 - (n-1)/m) for m > n-1 and 1/|log eps| for m = n-1.
    """
    _check_eps(eps)
    _check_admissible(n, m)
    if n == 2:
        return eps ** (1.0 - 1.0 / m)
    if m == n - 1:
        return 1.0 / abs(math.log(eps))
    return eps ** (1.0 - (n - 1.0) / m)


# ---------------------------------------------------------------------------
# constants


def curvature_energy_constant(lam1: float, lam2: float | None = None, *, n: int) -> float:
    """Energy constant as printed for strictly convex pairs.

    sqrt(2)*pi/sqrt(lam1) in dimension 2 and pi/sqrt(lam1*lam2) in
    dimension 3, with lam_j the relative principal curvatures.  The 3D
    value disagrees with the gap-integral oracle by a factor 2; see
    constants_report.
    """
    if lam1 <= 0.0 or (lam2 is not None and lam2 <= 0.0):
        raise ValueError("relative curvatures must be positive")
    if n == 2:
        return math.sqrt(2.0) * math.pi / math.sqrt(lam1)
    if n == 3:
        if lam2 is None:
            lam2 = lam1
        return math.pi / math.sqrt(lam1 * lam2)
    raise ValueError(f"dimension must be 2 or 3, got {n}")


def sphere_surface_measure(k: int) -> float:
    """Surface measure of the unit sphere S^(k-1) in R^k; k = 1 gives 2."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    return 2.0 * math.pi ** (k / 2.0) / math.gamma(k / 2.0)


def reciprocal_power_tail(a: float, m: float) -> float:
    """Closed form of the integral of r^(a-1)/(1+r^m) over (0, infinity)."""
    if not (0.0 < a < m):
        raise ValueError(f"integral diverges unless 0 < a < m, got a={a}, m={m}")
    return (math.pi / m) / math.sin(a * math.pi / m)


@dataclass(frozen=True)
class ProfileConstant:
    """Order-m energy constant, evaluated two independent ways."""

    closed_form: float
    quadrature: float | None
    difference: float | None


def profile_energy_constant(m: float, n: int, rel_tol: float = 1e-11) -> ProfileConstant:
    """Order-m constant: the tail integral in dimension 2, scaled by the
    sphere measure for n >= 3, and omega/m in the logarithmic case m = n-1.
    """
    _check_admissible(n, m)
    omega = sphere_surface_measure(n - 1)
    if n >= 3 and m == n - 1:
        # Defined directly, not by a convergent integral.
        value = omega / m
        return ProfileConstant(closed_form=value, quadrature=None, difference=None)
    a = 1.0 if n == 2 else n - 1.0
    scale = 1.0 if n == 2 else omega
    closed = scale * reciprocal_power_tail(a, m)

    def integrand(r: float) -> float:
        return r ** (a - 1.0) / (1.0 + r**m)

    quad = scale * integral_to_infinity(integrand, 0.0, rel_tol=rel_tol)
    return ProfileConstant(closed_form=closed, quadrature=quad, difference=quad - closed)


# ---------------------------------------------------------------------------
# the gap-integral oracle


def gap_integral_radial(
    n: int,
    m: float,
    coefficient: float,
    eps: float,
    r0: float,
    rel_tol: float = 1e-10,
) -> float:
    """Integral of 1/(eps + lam*|x'|^m) over the transverse ball |x'| < r0."""
    if eps <= 0.0:
        raise ValueError("gap integral needs a positive gap")
    omega = sphere_surface_measure(n - 1)

    def integrand(r: float) -> float:
        return r ** (n - 2.0) / (eps + coefficient * r**m)

    return omega * adaptive_integral(integrand, 0.0, r0, rel_tol=rel_tol)


def gap_integral(pair: InclusionPair, rel_tol: float = 1e-10) -> float:
    """Adaptive quadrature of 1/gap over the neck cross-section |x'| < R0."""
    if not pair.profile.is_radial():
        raise GeometryError("pair gap integrals need an isotropic profile")
    m, lam = pair.profile.power_equivalent()
    return gap_integral_radial(pair.dimension, m, lam, pair.eps, pair.neck_radius, rel_tol)


def gap_integral_quadratic(
    curvatures: tuple[float, float],
    eps: float,
    r0: float,
    rel_tol: float = 1e-10,
) -> float:
    """3D gap integral for an anisotropic quadratic relative profile.

    Rescaling x_j = sqrt(2/lam_j) y_j turns the profile into |y|^2 and the
    disk |x'| < r0 into an ellipse, leaving one angular quadrature of the
    exact radial antiderivative.
    """
    lam1, lam2 = curvatures
    if lam1 <= 0.0 or lam2 <= 0.0 or eps <= 0.0:
        raise ValueError("curvatures and gap must be positive")
    jac = 2.0 / math.sqrt(lam1 * lam2)

    def integrand(theta: float) -> float:
        c, s = math.cos(theta), math.sin(theta)
        r_theta2 = r0**2 / (2.0 * c * c / lam1 + 2.0 * s * s / lam2)
        return 0.5 * math.log1p(r_theta2 / eps)

    return jac * adaptive_integral(integrand, 0.0, 2.0 * math.pi, rel_tol=rel_tol)


def energy_limit_constant(n: int, m: float, coefficient: float) -> float:
    """Analytic limit of gap_integral(eps) * gap_rate_m(eps) as eps -> 0."""
    _check_admissible(n, m)
    if coefficient <= 0.0:
        raise ValueError("profile coefficient must be positive")
    omega = sphere_surface_measure(n - 1)
    if n >= 3 and m == n - 1:
        return omega / (m * coefficient)
    a = 1.0 if n == 2 else n - 1.0
    scale = 2.0 if n == 2 else omega
    return scale * reciprocal_power_tail(a, m) / coefficient ** ((n - 1.0) / m)


def printed_energy_constant(n: int, m: float, coefficient: float) -> float:
    """Energy constant exactly as printed in the asymptotic statements.

    Strictly convex case: curvature constant with lam_j = 2*coefficient.
    Order m case: order-m constant times coefficient^((n-1)/m), with the
    coefficient power placed as in the statements (opposite to the
    oracle's placement; the ratio to energy_limit_constant records both
    that and the dimension-2 factor 2).
    """
    _check_admissible(n, m)
    if m == 2.0 and n in (2, 3):
        lam = 2.0 * coefficient
        return curvature_energy_constant(lam, lam if n == 3 else None, n=n)
    lmn = profile_energy_constant(m, n).closed_form
    return lmn * coefficient ** ((n - 1.0) / m)


# ---------------------------------------------------------------------------
# singular neck fields


def _require_in_neck_formulas(pair: InclusionPair, x, touching: bool) -> tuple[np.ndarray, float]:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (pair.dimension,):
        raise GeometryError(f"point must have {pair.dimension} components, got shape {arr.shape}")
    xp, xn = arr[:-1], float(arr[-1])
    rho = float(np.sqrt(np.sum(xp * xp)))
    limit = pair.neck_radius if touching else 2.0 * pair.neck_radius
    if rho > limit + 1e-12:
        raise GeometryError(f"|x'| = {rho:.6g} outside the neck range {limit}")
    h1, h2 = pair.profile.heights(xp)
    tol = 1e-12 * max(1.0, abs(xn))
    top = (h1 if touching else pair.eps + h1) + tol
    if not (h2 - tol <= xn <= top):
        raise GeometryError(f"point {arr} lies outside the gap strip")
    return xp, xn


def _relative_gradient(pair: InclusionPair, xp: np.ndarray) -> np.ndarray:
    prof = pair.profile
    if prof.kind is ProfileKind.QUADRATIC:
        lams = np.asarray(prof.curvatures, dtype=float)
        return lams * xp
    r = float(np.sqrt(np.sum(xp * xp)))
    if r == 0.0:
        return np.zeros_like(xp)
    return prof.coefficient * prof.order * r ** (prof.order - 2.0) * xp


def neck_potential(pair: InclusionPair, x) -> float:
    """Explicit potential (x_n - h2)/(eps + h1 - h2), 0 below and 1 above."""
    xp, xn = _require_in_neck_formulas(pair, x, touching=False)
    _, h2 = pair.profile.heights(xp)
    delta = pair.eps + pair.profile.relative(xp)
    if delta <= 0.0:
        raise GeometryError("degenerate gap at the evaluation point")
    return (xn - h2) / delta


def neck_potential_gradient(pair: InclusionPair, x) -> np.ndarray:
    """Exact gradient of the explicit neck potential."""
    xp, xn = _require_in_neck_formulas(pair, x, touching=False)
    _, h2 = pair.profile.heights(xp)
    delta = pair.eps + pair.profile.relative(xp)
    if delta <= 0.0:
        raise GeometryError("degenerate gap at the evaluation point")
    grad_rel = _relative_gradient(pair, xp)
    s2 = pair.profile.split[1]
    transverse = grad_rel * (s2 * delta - (xn - h2)) / (delta * delta)
    return np.concatenate([transverse, [1.0 / delta]])


def neck_potential_touching(pair: InclusionPair, x) -> float:
    """Touching-limit analogue (x_n - h2)/(h1 - h2); singular at x' = 0."""
    xp, xn = _require_in_neck_formulas(pair, x, touching=True)
    rel = pair.profile.relative(xp)
    if rel <= 0.0:
        raise GeometryError("touching potential is undefined on the contact axis")
    _, h2 = pair.profile.heights(xp)
    return (xn - h2) / rel


def neck_potential_touching_gradient(pair: InclusionPair, x) -> np.ndarray:
    xp, xn = _require_in_neck_formulas(pair, x, touching=True)
    rel = pair.profile.relative(xp)
    if rel <= 0.0:
        raise GeometryError("touching potential is undefined on the contact axis")
    _, h2 = pair.profile.heights(xp)
    grad_rel = _relative_gradient(pair, xp)
    s2 = pair.profile.split[1]
    transverse = grad_rel * (s2 * rel - (xn - h2)) / (rel * rel)
    return np.concatenate([transverse, [1.0 / rel]])


@dataclass(frozen=True)
class LeadingGradient:
    """Leading-term gradient with both constant normalizations."""

    oracle: np.ndarray
    printed: np.ndarray
    coefficient_oracle: float
    coefficient_printed: float


def leading_gradient(pair: InclusionPair, blowup_factor: float, x) -> LeadingGradient:
    """Predicted leading gradient: coefficient * grad of the neck potential.

    The coefficient is blowup_factor * rate / constant, reported with the
    constant taken from the gap-integral oracle and, separately, as
    printed in the asymptotic statements.
    """
    m, lam = pair.profile.power_equivalent()
    if blowup_factor == 0.0:
        zero = np.zeros(pair.dimension)
        return LeadingGradient(zero, zero.copy(), 0.0, 0.0)
    rate = gap_rate_m(pair.eps, pair.dimension, m)
    grad = neck_potential_gradient(pair, x)
    a_oracle = energy_limit_constant(pair.dimension, m, lam)
    a_printed = printed_energy_constant(pair.dimension, m, lam)
    c_oracle = blowup_factor * rate / a_oracle
    c_printed = blowup_factor * rate / a_printed
    return LeadingGradient(
        oracle=c_oracle * grad,
        printed=c_printed * grad,
        coefficient_oracle=c_oracle,
        coefficient_printed=c_printed,
    )


# ---------------------------------------------------------------------------
# error scales


def energy_error_scale(eps: float, n: int, k: int) -> float:
    """Remainder scale of the strictly convex energy asymptote (C^{k,1} pairs)."""
    _check_eps(eps)
    if k < 3:
        raise ValueError(f"boundary smoothness index must be >= 3, got {k}")
    if n == 2:
        return eps ** (0.25 - 0.5 / k)
    if n == 3:
        return eps ** ((k - 1.0) / (2.0 * k)) * abs(math.log(eps))
    raise ValueError(f"dimension must be 2 or 3, got {n}")


def energy_error_scale_m(eps: float, n: int, m: float) -> float:
    """Remainder scale of the order-m energy asymptote."""
    _check_eps(eps)
    _check_admissible(n, m)
    if n == 2:
        return eps ** (1.0 / (4.0 * m))
    if m == n - 1:
        return max(eps ** (1.0 / (n - 1.0)), eps**0.25 * abs(math.log(eps)))
    return eps ** ((n - 1.0) / (4.0 * m))


# ---------------------------------------------------------------------------
# parameter bundle and report


@dataclass(frozen=True)
class AsymptoticParams:
    """Parameters entering the asymptotic formulas.

    The relative profile is coefficient * |x'|**m; for quadratic
    geometries pass curvatures as well so the printed curvature constant
    can be reported (coefficient then equals sum(curvatures)/len/2 only in
    the isotropic case; anisotropic reports use the curvatures directly).
    """

    n: int
    m: float
    coefficient: float
    eps: float
    curvatures: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        _check_eps(self.eps)
        _check_admissible(self.n, self.m)
        if self.coefficient <= 0.0:
            raise ValueError("profile coefficient must be positive")
        if self.curvatures is not None:
            if self.m != 2.0:
                raise ValueError("curvatures only make sense for order m = 2")
            if any(c <= 0.0 for c in self.curvatures):
                raise ValueError("curvatures must be positive")

    def rate(self) -> float:
        return gap_rate_m(self.eps, self.n, self.m)


@dataclass(frozen=True)
class ConstantsReport:
    """Side-by-side view of printed constants and the quadrature oracle."""

    n: int
    m: float
    coefficient: float
    eps: float
    omega: float
    profile_constant_closed: float
    profile_constant_quadrature: float | None
    profile_constant_difference: float | None
    curvature_constant: float | None
    oracle_constant: float
    printed_constant: float
    printed_over_oracle: float
    gap_integral_value: float
    gap_integral_times_rate: float
    quadrature_over_oracle: float

    def rows(self) -> list[tuple[str, str]]:
        out = [
            ("dimension n", f"{self.n}"),
            ("convexity order m", f"{self.m:g}"),
            ("profile coefficient", f"{self.coefficient:g}"),
            ("gap eps", f"{self.eps:g}"),
            ("sphere measure omega", f"{self.omega:.12g}"),
            ("order-m constant (closed form)", f"{self.profile_constant_closed:.12g}"),
        ]
        if self.profile_constant_quadrature is not None:
            out.append(("order-m constant (quadrature)", f"{self.profile_constant_quadrature:.12g}"))
            out.append(("order-m constant difference", f"{self.profile_constant_difference:.3e}"))
        if self.curvature_constant is not None:
            out.append(("curvature constant (printed)", f"{self.curvature_constant:.12g}"))
        out += [
            ("oracle limit of gap integral * rate", f"{self.oracle_constant:.12g}"),
            ("printed constant", f"{self.printed_constant:.12g}"),
            ("printed / oracle", f"{self.printed_over_oracle:.12g}"),
            ("gap integral at eps", f"{self.gap_integral_value:.12g}"),
            ("gap integral * rate at eps", f"{self.gap_integral_times_rate:.12g}"),
            ("(gap integral * rate) / oracle", f"{self.quadrature_over_oracle:.12g}"),
        ]
        return out


def constants_report(params: AsymptoticParams, neck_radius: float = 0.5) -> ConstantsReport:
    """Evaluate every closed-form constant and adjudicate it against the oracle."""
    n, m, lam, eps = params.n, params.m, params.coefficient, params.eps
    omega = sphere_surface_measure(n - 1)
    prof = profile_energy_constant(m, n)
    kappa = None
    if m == 2.0 and n in (2, 3):
        if params.curvatures is not None:
            lams = params.curvatures
            kappa = curvature_energy_constant(lams[0], lams[1] if len(lams) > 1 else None, n=n)
        else:
            kappa = printed_energy_constant(n, m, lam)
    oracle = energy_limit_constant(n, m, lam)
    printed = printed_energy_constant(n, m, lam)
    lams = params.curvatures
    if lams is not None and len(lams) == 2 and lams[0] != lams[1]:
        integral = gap_integral_quadratic((lams[0], lams[1]), eps, neck_radius)
    else:
        integral = gap_integral_radial(n, m, lam, eps, neck_radius)
    product = integral * gap_rate_m(eps, n, m)
    return ConstantsReport(
        n=n,
        m=m,
        coefficient=lam,
        eps=eps,
        omega=omega,
        profile_constant_closed=prof.closed_form,
        profile_constant_quadrature=prof.quadrature,
        profile_constant_difference=prof.difference,
        curvature_constant=kappa,
        oracle_constant=oracle,
        printed_constant=printed,
        printed_over_oracle=printed / oracle,
        gap_integral_value=integral,
        gap_integral_times_rate=product,
        quadrature_over_oracle=product / oracle,
    )
