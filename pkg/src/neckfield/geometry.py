"""Two-inclusion geometry: neck profiles, gap function, region predicates.

The configuration is a pair of convex inclusions inside a disk (or ball),
almost touching across a thin gap on the x_n axis.  Near the closest points
the inclusion boundaries are graphs ``x_n = eps + h1(x')`` (upper) and
``x_n = h2(x')`` (lower) over ``|x'| <= 2*R0``; beyond ``|x'| = R0`` each
boundary is closed by a circular (or spherical) cap that meets the graph
with matching tangent.  The lower inclusion is fixed with its top at the
origin; the upper one is translated up by the gap width ``eps``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "GeometryError",
    "ProfileKind",
    "NeckProfile",
    "CapArc",
    "InclusionPair",
    "Region",
]


class GeometryError(ValueError):
    """Invalid geometric data or an evaluation outside its domain."""


class ProfileKind(enum.Enum):
    QUADRATIC = "quadratic"
    POWER_LAW = "power"


class Region(enum.Enum):
    IN_D1 = "inclusion1"
    IN_D2 = "inclusion2"
    IN_NECK = "neck"
    IN_FAR = "far"
    OUTSIDE = "outside"


def _as_transverse(xp, dim: int) -> np.ndarray:
    """Coerce a transverse coordinate to a float vector of length dim-1."""
    arr = np.atleast_1d(np.asarray(xp, dtype=float))
    if arr.shape != (dim - 1,):
        raise GeometryError(
            f"transverse coordinate must have {dim - 1} component(s), got shape {arr.shape}"
        )
    return arr


@dataclass(frozen=True)
class NeckProfile:
    """Shape of the two boundary graphs near the closest points.

    The relative profile ``h1 - h2`` is the quantity every asymptotic
    formula depends on; ``split = (s1, s2)`` with ``s1 + s2 = 1``
    apportions it between the upper graph ``h1 = s1 * rel`` and the lower
    graph ``h2 = -s2 * rel``.

    kind QUADRATIC: ``rel(x') = sum_j curvatures[j] * x_j**2 / 2`` with all
    relative principal curvatures positive.
    kind POWER_LAW: ``rel(x') = coefficient * |x'|**order`` with
    ``order >= 2``.
    """

    kind: ProfileKind
    curvatures: tuple[float, ...] | None = None
    order: float | None = None
    coefficient: float | None = None
    split: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self) -> None:
        s1, s2 = self.split
        if not (0.0 <= s1 <= 1.0 and 0.0 <= s2 <= 1.0):
            raise GeometryError(f"split fractions must lie in [0, 1], got {self.split}")
        if abs(s1 + s2 - 1.0) > 1e-12:
            raise GeometryError(f"split fractions must sum to 1, got {self.split}")
        if self.kind is ProfileKind.QUADRATIC:
            if not self.curvatures:
                raise GeometryError("quadratic profile needs at least one curvature")
            if any(lam <= 0.0 for lam in self.curvatures):
                raise GeometryError(f"relative curvatures must be positive, got {self.curvatures}")
            if self.order is not None or self.coefficient is not None:
                raise GeometryError("quadratic profile takes no order/coefficient")
        elif self.kind is ProfileKind.POWER_LAW:
            if self.order is None or self.coefficient is None:
                raise GeometryError("power-law profile needs order and coefficient")
            if self.order < 2.0:
                raise GeometryError(f"power-law order must be >= 2, got {self.order}")
            if self.coefficient <= 0.0:
                raise GeometryError(f"power-law coefficient must be positive, got {self.coefficient}")
            if self.curvatures is not None:
                raise GeometryError("power-law profile takes no curvature list")
        else:  # pragma: no cover - enum is closed
            raise GeometryError(f"unknown profile kind {self.kind}")

    # -- evaluation ---------------------------------------------------------

    def relative(self, xp) -> float:
        """Relative profile (h1 - h2)(x'), exact for the model shapes."""
        arr = np.atleast_1d(np.asarray(xp, dtype=float))
        if self.kind is ProfileKind.QUADRATIC:
            lams = np.asarray(self.curvatures, dtype=float)
            if arr.shape != lams.shape:
                raise GeometryError(
                    f"coordinate shape {arr.shape} does not match {lams.shape[0]} curvature(s)"
                )
            return float(0.5 * np.sum(lams * arr * arr))
        r = float(np.sqrt(np.sum(arr * arr)))
        return float(self.coefficient * r**self.order)

    def relative_radial(self, r: float) -> float:
        """Relative profile at radius ``r`` (isotropic profiles only)."""
        if not self.is_radial():
            raise GeometryError("radial evaluation needs an isotropic profile")
        if self.kind is ProfileKind.QUADRATIC:
            return 0.5 * self.curvatures[0] * r * r
        return self.coefficient * r**self.order

    def relative_slope_radial(self, r: float) -> float:
        """d/dr of the relative profile (isotropic profiles only)."""
        if not self.is_radial():
            raise GeometryError("radial evaluation needs an isotropic profile")
        if self.kind is ProfileKind.QUADRATIC:
            return self.curvatures[0] * r
        return self.coefficient * self.order * r ** (self.order - 1.0)

    def heights(self, xp) -> tuple[float, float]:
        """Upper and lower graph heights (h1, h2) before the eps shift."""
        rel = self.relative(xp)
        s1, s2 = self.split
        return s1 * rel, -s2 * rel

    def is_radial(self) -> bool:
        if self.kind is ProfileKind.POWER_LAW:
            return True
        return len(set(self.curvatures)) == 1

    def curvature_floor(self) -> float:
        """Largest constant bounding the relative Hessian from below
        (quadratic profiles only)."""
        if self.kind is not ProfileKind.QUADRATIC:
            raise GeometryError("curvature floor applies to quadratic profiles")
        return min(self.curvatures)

    # -- derived scales -----------------------------------------------------

    def power_equivalent(self) -> tuple[float, float]:
        """(order m, coefficient lam) with rel = lam * |x'|**m; radial only."""
        if self.kind is ProfileKind.POWER_LAW:
            return float(self.order), float(self.coefficient)
        if not self.is_radial():
            raise GeometryError("anisotropic quadratic profile has no radial power form")
        return 2.0, 0.5 * self.curvatures[0]

    def curvature_scale(self, r: float, gap0: float) -> float:
        """Local second-derivative scale of the relative profile.

        Used to grade neck meshes; floored at the radius where the profile
        first reaches the size of the central gap ``gap0`` so the scale
        stays positive for flat (order > 2) profiles.
        """
        m, lam = self.power_equivalent()
        if m == 2.0:
            return 2.0 * lam
        r_gap = (max(gap0, 1e-300) / lam) ** (1.0 / m)
        r_eff = max(abs(r), r_gap)
        return m * (m - 1.0) * lam * r_eff ** (m - 2.0)

    def slope_bound(self) -> float:
        """Constant C with |grad h_i| <= C |x'|^(m-1) on the neck."""
        m, lam = self.power_equivalent()
        return m * lam


@dataclass(frozen=True)
class CapArc:
    """Circular (spherical for n=3) cap closing one inclusion boundary.

    The cap circle is centred on the symmetry axis at height
    ``center_height``; it passes through the profile endpoints at
    ``|x'| = R0`` with matching tangent.
    """

    center_height: float
    radius: float


def _cap_for_graph(height_at_r0: float, slope_at_r0: float, r0: float) -> CapArc:
    # Tangent matching: the radius vector at the junction is normal to the
    # graph, so the centre sits at signed distance r0/slope above the join.
    if slope_at_r0 == 0.0:
        raise GeometryError("flat profile side cannot be closed by a tangent cap")
    offset = r0 / slope_at_r0
    center = height_at_r0 + offset
    radius = math.hypot(r0, offset)
    return CapArc(center_height=center, radius=radius)


@dataclass(frozen=True)
class InclusionPair:
    """Full description of the two-inclusion configuration.

    ``dimension`` is 2 or 3; for 3 the profile must be isotropic so the
    caps are surfaces of revolution.  ``eps >= 0``; zero gives the touching
    configuration used by the limit problem.  The outer domain is the disk
    or ball of radius ``outer_radius`` about the origin, and construction
    checks the separation ``dist(inclusions, outer boundary) > separation``.
    """

    dimension: int
    profile: NeckProfile
    eps: float
    neck_radius: float = 0.5
    outer_radius: float = 4.0
    separation: float = 1.0

    def __post_init__(self) -> None:
        if self.dimension not in (2, 3):
            raise GeometryError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.eps < 0.0:
            raise GeometryError(f"gap must be nonnegative, got {self.eps}")
        if not (0.0 < self.neck_radius < 1.0):
            raise GeometryError(f"neck radius must lie in (0, 1), got {self.neck_radius}")
        if self.separation < 1.0:
            raise GeometryError(f"separation bound must be at least 1, got {self.separation}")
        s1, s2 = self.profile.split
        if s1 <= 0.0 or s2 <= 0.0:
            raise GeometryError("closed inclusions need strictly positive split fractions")
        if self.dimension == 3 and not self.profile.is_radial():
            raise GeometryError("dimension 3 needs an isotropic profile (equal curvatures)")
        if self.profile.kind is ProfileKind.QUADRATIC:
            expected = self.dimension - 1
            if len(self.profile.curvatures) != expected:
                raise GeometryError(
                    f"quadratic profile needs {expected} curvature(s) in dimension {self.dimension}"
                )
        # Caps exist and the pair stays away from the outer boundary.
        object.__setattr__(self, "_caps", self._build_caps())
        cap1, cap2 = self.caps()
        reach = max(abs(cap1.center_height) + cap1.radius, abs(cap2.center_height) + cap2.radius)
        margin = self.outer_radius - reach
        if margin <= self.separation:
            raise GeometryError(
                f"inclusions reach within {margin:.3g} of the outer boundary; "
                f"need more than {self.separation:.3g}"
            )

    # -- construction helpers -------------------------------------------------

    def caps(self) -> tuple[CapArc, CapArc]:
        return self._caps

    def _build_caps(self) -> tuple[CapArc, CapArc]:
        r0 = self.neck_radius
        s1, s2 = self.profile.split
        slope = self.profile.relative_slope_radial(r0) if self.profile.is_radial() else None
        if slope is None:  # pragma: no cover - dimension 3 requires radial
            raise GeometryError("caps need an isotropic profile")
        h1 = s1 * self.profile.relative_radial(r0)
        h2 = -s2 * self.profile.relative_radial(r0)
        cap1 = _cap_for_graph(self.eps + h1, s1 * slope, r0)
        cap2 = _cap_for_graph(h2, -s2 * slope, r0)
        return cap1, cap2

    def with_gap(self, eps: float) -> "InclusionPair":
        """Same fixed lower inclusion with the upper one translated to gap eps."""
        return replace(self, eps=eps)

    # -- scalar fields over the neck ------------------------------------------

    def heights(self, xp) -> tuple[float, float]:
        """(h1, h2) at transverse coordinate x'; rejects |x'| > 2*R0."""
        arr = _as_transverse(xp, self.dimension)
        r = float(np.sqrt(np.sum(arr * arr)))
        if r > 2.0 * self.neck_radius + 1e-12:
            raise GeometryError(f"|x'| = {r:.6g} outside the profile range 2*R0 = {2 * self.neck_radius}")
        return self.profile.heights(arr)

    def gap(self, xp) -> float:
        """Gap width eps + (h1 - h2)(x') across the neck."""
        arr = _as_transverse(xp, self.dimension)
        r = float(np.sqrt(np.sum(arr * arr)))
        if r > 2.0 * self.neck_radius + 1e-12:
            raise GeometryError(f"|x'| = {r:.6g} outside the profile range 2*R0 = {2 * self.neck_radius}")
        return self.eps + self.profile.relative(arr)

    def gap_radial(self, r: float) -> float:
        return self.eps + self.profile.relative_radial(r)

    # -- region predicates ------------------------------------------------------

    def _split_point(self, x) -> tuple[np.ndarray, float]:
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.dimension,):
            raise GeometryError(f"point must have {self.dimension} components, got shape {arr.shape}")
        return arr[:-1], float(arr[-1])

    def in_inclusion1(self, x) -> bool:
        # Inside the cap circle, or in the sliver between the profile graph
        # and the circle bottom (the graph dips below the flatter circle).
        xp, xn = self._split_point(x)
        cap1, _ = self.caps()
        rho2 = float(np.sum(xp * xp))
        if rho2 + (xn - cap1.center_height) ** 2 <= cap1.radius**2:
            return True
        if rho2 <= self.neck_radius**2 and xn <= cap1.center_height:
            h1, _ = self.profile.heights(xp)
            return xn >= self.eps + h1
        return False

    def in_inclusion2(self, x) -> bool:
        xp, xn = self._split_point(x)
        _, cap2 = self.caps()
        rho2 = float(np.sum(xp * xp))
        if rho2 + (xn - cap2.center_height) ** 2 <= cap2.radius**2:
            return True
        if rho2 <= self.neck_radius**2 and xn >= cap2.center_height:
            _, h2 = self.profile.heights(xp)
            return xn <= h2
        return False

    def in_neck(self, x, r: float | None = None) -> bool:
        xp, xn = self._split_point(x)
        radius = self.neck_radius if r is None else r
        rho = float(np.sqrt(np.sum(xp * xp)))
        if rho >= radius:
            return False
        h1, h2 = self.profile.heights(xp)
        return h2 < xn < self.eps + h1

    def classify(self, x, r: float | None = None) -> Region:
        """Exact, mutually exclusive partition of space around the pair."""
        arr = np.asarray(x, dtype=float)
        if float(np.sum(arr * arr)) >= self.outer_radius**2:
            return Region.OUTSIDE
        if self.in_inclusion1(arr):
            return Region.IN_D1
        if self.in_inclusion2(arr):
            return Region.IN_D2
        if self.in_neck(arr, r):
            return Region.IN_NECK
        return Region.IN_FAR

    # -- reference points ---------------------------------------------------------

    def closest_points(self) -> tuple[np.ndarray, np.ndarray]:
        """(P1, P2): closest boundary points of the upper and lower inclusion."""
        zero = np.zeros(self.dimension - 1)
        p1 = np.concatenate([zero, [self.eps]])
        p2 = np.concatenate([zero, [0.0]])
        return p1, p2
