"""Declarative experiment configuration.

Sectioned key = value text; '#' starts a comment.  Unknown sections or
keys, duplicates and type mismatches are collected as located errors
(line, key, message) rather than raised one at a time.  emit() produces a
canonical form whose reparse compares equal.
"""

from __future__ import annotations

from dataclasses import dataclass

from .conductivity import BoundaryData
from .geometry import GeometryError, InclusionPair, NeckProfile, ProfileKind
from .mesh import MeshParams

__all__ = [
    "ConfigError",
    "GeometryConfig",
    "BoundaryConfig",
    "SweepConfig",
    "ToleranceConfig",
    "ExperimentConfig",
    "parse_config",
    "emit_config",
    "default_config_text",
]


class ConfigError(ValueError):
    """One or more located configuration problems."""

    def __init__(self, problems: list[tuple[int, str, str]]):
        self.problems = problems
        lines = [f"line {ln}: [{key}] {msg}" for ln, key, msg in problems]
        super().__init__("invalid configuration:\n" + "\n".join(lines))


@dataclass(frozen=True)
class GeometryConfig:
    dimension: int = 2
    profile: str = "quadratic"
    curvatures: tuple[float, ...] = (2.0,)
    order: float = 2.0
    coefficient: float = 1.0
    split: tuple[float, ...] = (0.5, 0.5)
    neck_radius: float = 0.5
    outer_radius: float = 4.0
    separation: float = 1.0

    def neck_profile(self) -> NeckProfile:
        split = (self.split[0], self.split[1])
        if self.profile == "quadratic":
            return NeckProfile(kind=ProfileKind.QUADRATIC, curvatures=self.curvatures, split=split)
        return NeckProfile(
            kind=ProfileKind.POWER_LAW, order=self.order, coefficient=self.coefficient, split=split
        )

    def pair(self, eps: float) -> InclusionPair:
        return InclusionPair(
            dimension=self.dimension,
            profile=self.neck_profile(),
            eps=eps,
            neck_radius=self.neck_radius,
            outer_radius=self.outer_radius,
            separation=self.separation,
        )

    def power_form(self) -> tuple[float, float]:
        return self.neck_profile().power_equivalent()


@dataclass(frozen=True)
class BoundaryConfig:
    kind: str = "linear_xn"
    value: float = 0.0
    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()

    def data(self) -> BoundaryData:
        return BoundaryData(kind=self.kind, value=self.value, cos_coeffs=self.cos, sin_coeffs=self.sin)


@dataclass(frozen=True)
class SweepConfig:
    epsilons: tuple[float, ...] = ()
    start: float = 1e-2
    factor: float = 4.0
    count: int = 6

    def eps_list(self) -> list[float]:
        if self.epsilons:
            return sorted(self.epsilons, reverse=True)
        return [self.start / self.factor**k for k in range(self.count)]


@dataclass(frozen=True)
class ToleranceConfig:
    rate_slope: float = 0.05
    cauchy_slope: float = 0.15
    energy_constant_rel: float = 0.02
    offset_stability: float = 0.10
    leading_ratio: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: GeometryConfig = GeometryConfig()
    boundary: BoundaryConfig = BoundaryConfig()
    sweep: SweepConfig = SweepConfig()
    mesh: MeshParams = MeshParams()
    tolerances: ToleranceConfig = ToleranceConfig()
    output_dir: str = "out"


def _parse_float(s: str) -> float:
    return float(s)


def _parse_int(s: str) -> int:
    value = float(s)
    if value != int(value):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(value)


def _parse_floats(s: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in s.split())


def _parse_str(s: str) -> str:
    return s


_SCHEMA: dict[str, dict[str, object]] = {
    "geometry": {
        "dimension": _parse_int,
        "profile": _parse_str,
        "curvatures": _parse_floats,
        "order": _parse_float,
        "coefficient": _parse_float,
        "split": _parse_floats,
        "neck_radius": _parse_float,
        "outer_radius": _parse_float,
        "separation": _parse_float,
    },
    "boundary": {
        "kind": _parse_str,
        "value": _parse_float,
        "cos": _parse_floats,
        "sin": _parse_floats,
    },
    "sweep": {
        "epsilons": _parse_floats,
        "start": _parse_float,
        "factor": _parse_float,
        "count": _parse_int,
    },
    "mesh": {
        "layers": _parse_int,
        "h_far": _parse_float,
        "grading_exponent": _parse_float,
        "neck_step_factor": _parse_float,
        "refinement": _parse_int,
    },
    "tolerances": {
        "rate_slope": _parse_float,
        "cauchy_slope": _parse_float,
        "energy_constant_rel": _parse_float,
        "offset_stability": _parse_float,
        "leading_ratio": _parse_float,
    },
    "output": {
        "directory": _parse_str,
    },
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every located problem."""
    problems: list[tuple[int, str, str]] = []
    raw: dict[tuple[str, str], object] = {}
    lines_of: dict[tuple[str, str], int] = {}
    section = None
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            section = body[1:-1].strip()
            if section not in _SCHEMA:
                problems.append((ln, section, f"unknown section [{section}]"))
                section = None
            continue
        if "=" not in body:
            problems.append((ln, body, "expected key = value"))
            continue
        if section is None:
            problems.append((ln, body.split("=", 1)[0].strip(), "key outside any known section"))
            continue
        key, value = (part.strip() for part in body.split("=", 1))
        schema = _SCHEMA[section]
        if key not in schema:
            problems.append((ln, key, f"unknown key in [{section}]"))
            continue
        if (section, key) in raw:
            problems.append((ln, key, f"duplicate key in [{section}] (first at line {lines_of[(section, key)]})"))
            continue
        try:
            raw[(section, key)] = schema[key](value)
            lines_of[(section, key)] = ln
        except ValueError as exc:
            problems.append((ln, key, str(exc)))

    def get(section: str, key: str, default):
        return raw.get((section, key), default)

    def where(section: str, key: str) -> int:
        return lines_of.get((section, key), 0)

    geometry = GeometryConfig(
        dimension=get("geometry", "dimension", 2),
        profile=get("geometry", "profile", "quadratic"),
        curvatures=tuple(get("geometry", "curvatures", (2.0,))),
        order=get("geometry", "order", 2.0),
        coefficient=get("geometry", "coefficient", 1.0),
        split=tuple(get("geometry", "split", (0.5, 0.5))),
        neck_radius=get("geometry", "neck_radius", 0.5),
        outer_radius=get("geometry", "outer_radius", 4.0),
        separation=get("geometry", "separation", 1.0),
    )
    boundary = BoundaryConfig(
        kind=get("boundary", "kind", "linear_xn"),
        value=get("boundary", "value", 0.0),
        cos=tuple(get("boundary", "cos", ())),
        sin=tuple(get("boundary", "sin", ())),
    )
    sweep = SweepConfig(
        epsilons=tuple(get("sweep", "epsilons", ())),
        start=get("sweep", "start", 1e-2),
        factor=get("sweep", "factor", 4.0),
        count=get("sweep", "count", 6),
    )
    tolerances = ToleranceConfig(
        rate_slope=get("tolerances", "rate_slope", 0.05),
        cauchy_slope=get("tolerances", "cauchy_slope", 0.15),
        energy_constant_rel=get("tolerances", "energy_constant_rel", 0.02),
        offset_stability=get("tolerances", "offset_stability", 0.10),
        leading_ratio=get("tolerances", "leading_ratio", 0.05),
    )

    # Semantic validation with located reports.
    if geometry.dimension not in (2, 3):
        problems.append((where("geometry", "dimension"), "dimension", "dimension must be 2 or 3"))
    if geometry.profile not in ("quadratic", "power"):
        problems.append((where("geometry", "profile"), "profile", "profile must be quadratic or power"))
    if geometry.profile == "power":
        min_order = 2.0 if geometry.dimension == 2 else max(2.0, geometry.dimension - 1.0)
        if geometry.order < min_order:
            problems.append(
                (
                    where("geometry", "order"),
                    "order",
                    f"order {geometry.order:g} inadmissible in dimension {geometry.dimension} (need >= {min_order:g})",
                )
            )
    if geometry.profile == "quadratic" and len(geometry.curvatures) != geometry.dimension - 1:
        problems.append(
            (
                where("geometry", "curvatures"),
                "curvatures",
                f"need {geometry.dimension - 1} curvature(s) in dimension {geometry.dimension}",
            )
        )
    if len(geometry.split) != 2:
        problems.append((where("geometry", "split"), "split", "split takes exactly two fractions"))
    if boundary.kind not in ("constant", "linear_xn", "linear_x1", "fourier"):
        problems.append((where("boundary", "kind"), "kind", f"unknown boundary kind {boundary.kind!r}"))
    if boundary.kind == "fourier" and not (boundary.cos or boundary.sin):
        problems.append((where("boundary", "kind"), "kind", "fourier data needs cos or sin coefficients"))
    eps_candidates = sweep.eps_list() if not problems else []
    for eps in eps_candidates:
        if not (0.0 < eps < 1.0):
            problems.append((where("sweep", "epsilons"), "epsilons", f"gap {eps:g} outside (0, 1)"))
            break

    mesh_kwargs = dict(
        layers=get("mesh", "layers", 6),
        h_far=get("mesh", "h_far", 0.2),
        grading_exponent=get("mesh", "grading_exponent", 0.5),
        neck_step_factor=get("mesh", "neck_step_factor", 0.25),
        refinement=get("mesh", "refinement", 0),
    )
    mesh = None
    if not problems:
        try:
            mesh = MeshParams(**mesh_kwargs)
        except Exception as exc:  # noqa: BLE001 - report, do not crash
            problems.append((where("mesh", "layers"), "mesh", str(exc)))
        try:
            geometry.neck_profile()
        except GeometryError as exc:
            problems.append((where("geometry", "profile"), "profile", str(exc)))

    if problems:
        raise ConfigError(sorted(problems))
    return ExperimentConfig(
        geometry=geometry,
        boundary=boundary,
        sweep=sweep,
        mesh=mesh,
        tolerances=tolerances,
        output_dir=get("output", "directory", "out"),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(emit(cfg)) == cfg."""
    g, b, s, m, t = cfg.geometry, cfg.boundary, cfg.sweep, cfg.mesh, cfg.tolerances
    lines = [
        "[geometry]",
        f"dimension = {g.dimension}",
        f"profile = {g.profile}",
        f"curvatures = {_fmt(g.curvatures)}",
        f"order = {_fmt(g.order)}",
        f"coefficient = {_fmt(g.coefficient)}",
        f"split = {_fmt(g.split)}",
        f"neck_radius = {_fmt(g.neck_radius)}",
        f"outer_radius = {_fmt(g.outer_radius)}",
        f"separation = {_fmt(g.separation)}",
        "",
        "[boundary]",
        f"kind = {b.kind}",
        f"value = {_fmt(b.value)}",
    ]
    if b.cos:
        lines.append(f"cos = {_fmt(b.cos)}")
    if b.sin:
        lines.append(f"sin = {_fmt(b.sin)}")
    lines += [
        "",
        "[sweep]",
    ]
    if s.epsilons:
        lines.append(f"epsilons = {_fmt(s.epsilons)}")
    else:
        lines += [f"start = {_fmt(s.start)}", f"factor = {_fmt(s.factor)}", f"count = {s.count}"]
    lines += [
        "",
        "[mesh]",
        f"layers = {m.layers}",
        f"h_far = {_fmt(m.h_far)}",
        f"grading_exponent = {_fmt(m.grading_exponent)}",
        f"neck_step_factor = {_fmt(m.neck_step_factor)}",
        f"refinement = {m.refinement}",
        "",
        "[tolerances]",
        f"rate_slope = {_fmt(t.rate_slope)}",
        f"cauchy_slope = {_fmt(t.cauchy_slope)}",
        f"energy_constant_rel = {_fmt(t.energy_constant_rel)}",
        f"offset_stability = {_fmt(t.offset_stability)}",
        f"leading_ratio = {_fmt(t.leading_ratio)}",
        "",
        "[output]",
        f"directory = {cfg.output_dir}",
        "",
    ]
    return "\n".join(lines)


def default_config_text() -> str:
    """The shipped default: symmetric strictly convex pair, vertical linear
    outer data, six gaps over three decades."""
    return emit_config(ExperimentConfig())
