"""Command line interface.

Subcommands: constants, mesh, solve, sweep, verify, report.  Every run
writes a manifest (configuration hash, versions, timings) next to its
outputs; the data files themselves carry no timestamps, so rerunning the
same configuration reproduces them byte for byte.

Exit codes: 0 success, 1 acceptance criterion failed, 2 configuration
error, 3 solver or mesh failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, fem
from .acceptance import run_all
from .closed_forms import AsymptoticParams, constants_report, energy_error_scale_m
from .conductivity import fit_blowup_limit, neck_remainder, solve_bundle
from .config import ConfigError, ExperimentConfig, default_config_text, emit_config, parse_config
from .experiments import (
    SWEEP_CSV_HEADER,
    fit_energy_constants,
    fit_rate,
    records_to_csv,
    run_sweep,
    sweep_record,
)
from .geometry import GeometryError
from .mesh import MeshError, audit, generate, write_mesh_text
from .quadrature import QuadratureError
from .svgplot import render_loglog

RANDOM_SEED = 20260810  # sampling checks are seeded and recorded


def _load_config(path: str | None) -> tuple[ExperimentConfig, str]:
    if path is None:
        text = default_config_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_config(text), text


def _write_manifest(outdir: Path, cfg: ExperimentConfig, timings: dict[str, float], outputs: list[str]) -> None:
    canonical = emit_config(cfg)
    manifest = {
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "package": f"neckfield {__version__}",
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": RANDOM_SEED,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
        "outputs": outputs,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_init_config(args) -> int:
    text = default_config_text()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_constants(args) -> int:
    curvatures = tuple(args.curvature) if args.curvature else None
    if curvatures is not None:
        if args.order != 2.0:
            print("curvatures imply order 2", file=sys.stderr)
            return 2
        coefficient = math.sqrt(math.prod(curvatures)) / 2.0
    else:
        coefficient = args.coefficient
    params = AsymptoticParams(
        n=args.dimension, m=args.order, coefficient=coefficient, eps=args.eps, curvatures=curvatures
    )
    report = constants_report(params, neck_radius=args.neck_radius)
    width = max(len(k) for k, _ in report.rows())
    for key, value in report.rows():
        print(f"{key:<{width}}  {value}")
    if args.json:
        doc = {key.replace(" ", "_"): value for key, value in report.rows()}
        Path(args.json).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.json}")
    return 0


def _cmd_mesh(args) -> int:
    cfg, _ = _load_config(args.config)
    if cfg.geometry.dimension != 2:
        print("meshing is implemented for dimension 2 only", file=sys.stderr)
        return 2
    eps = args.epsilon if args.epsilon is not None else cfg.sweep.eps_list()[0]
    t0 = time.perf_counter()
    pair = cfg.geometry.pair(eps)
    mesh = generate(pair, cfg.mesh)
    report = audit(mesh)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    out = Path(args.out) if args.out else outdir / "mesh.txt"
    out.write_text(write_mesh_text(mesh))
    _write_manifest(outdir, cfg, {"mesh": time.perf_counter() - t0}, [out.name])
    print(f"wrote {out} (V={report.vertex_count} E={report.edge_count} T={report.triangle_count})")
    print(
        f"boundary loops {report.boundary_loop_count}, neck triangles {report.neck_triangle_count}, "
        f"far min angle {report.far_min_angle_deg:.1f} deg, far max aspect {report.far_max_aspect:.1f}"
    )
    if not report.passed:
        for failure in report.failures:
            print(f"audit failure: {failure}", file=sys.stderr)
        return 3
    print("audit passed")
    return 0


def _cmd_solve(args) -> int:
    cfg, _ = _load_config(args.config)
    if cfg.geometry.dimension != 2:
        print("solves are implemented for dimension 2 only", file=sys.stderr)
        return 2
    eps = args.epsilon if args.epsilon is not None else cfg.sweep.eps_list()[0]
    t0 = time.perf_counter()
    pair = cfg.geometry.pair(eps)
    phi = cfg.boundary.data()
    mesh = generate(pair, cfg.mesh)
    record = sweep_record(pair, mesh, phi)
    doc = {
        "epsilon": eps,
        "a11": record.a11,
        "a12": record.a12,
        "a21": record.a21,
        "a22": record.a22,
        "b1": record.b1,
        "b2": record.b2,
        "C1": record.c1,
        "C2": record.c2,
        "B_eps": record.b_factor,
        "energy_v1": record.energy_v1,
        "max_grad_u_neck": record.max_grad_u_neck,
        "max_grad_v1_neck": record.max_grad_v1_neck,
        "max_grad_vb_neck": record.max_grad_vb_neck,
        "max_grad_w_neck": record.max_grad_w_neck,
    }
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / "solve.json"
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    outputs = [out.name]
    if args.dump_fields:
        bundle = solve_bundle(mesh, phi)
        w = neck_remainder(pair, bundle)
        for name, f in (
            ("u", bundle.u),
            ("v1", bundle.v1),
            ("v2", bundle.v2),
            ("v0", bundle.v0),
            ("vb", bundle.vb),
            ("w", w),
        ):
            path = outdir / f"field_{name}.txt"
            path.write_text("".join(f"{i} {float(v)!r}\n" for i, v in enumerate(f.values)))
            outputs.append(path.name)
    _write_manifest(outdir, cfg, {"solve": time.perf_counter() - t0}, outputs)
    print(json.dumps(doc, indent=2, sort_keys=True))
    print(f"wrote {out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg, _ = _load_config(args.config)
    if cfg.geometry.dimension != 2:
        print("sweeps are implemented for dimension 2 only", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    eps_list = cfg.sweep.eps_list()
    pair = cfg.geometry.pair(eps_list[0])
    phi = cfg.boundary.data()
    records, failures = run_sweep(pair, phi, eps_list, cfg.mesh, workers=args.workers)
    t_sweep = time.perf_counter() - t0

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "sweep.csv"
    csv_path.write_text(records_to_csv(records))
    outputs = [csv_path.name]

    summary: dict[str, object] = {
        "csv_schema": SWEEP_CSV_HEADER[0].lstrip("# "),
        "records": len(records),
        "failures": {repr(k): v for k, v in failures.items()},
    }
    m, _ = pair.profile.power_equivalent()
    if len(records) >= 4:
        for quantity in ("max_grad_u_neck", "max_grad_v1_neck", "energy_v1"):
            fit = fit_rate(records, quantity)
            summary[f"rate_{quantity}"] = {
                "slope": fit.slope,
                "intercept": fit.intercept,
                "stderr": fit.stderr,
                "residual_norm": fit.residual_norm,
                "model": fit.model,
            }
        efit = fit_energy_constants(records, pair)
        summary["energy_fit"] = {key.replace(" ", "_"): value for key, value in efit.table()}
        # Remainder scales of the energy asymptote: reported only; at these
        # gaps they are not separable from discretization error.
        summary["energy_remainder_scale"] = {
            repr(r.eps): energy_error_scale_m(r.eps, pair.dimension, m) for r in records
        }
        eps_arr = np.array([r.eps for r in records])
        b_arr = np.array([r.b_factor for r in records])
        try:
            b0, coef, se = fit_blowup_limit(eps_arr, b_arr, pair.dimension, m)
            summary["blowup_factor_limit"] = {"b0": b0, "rate_coefficient": coef, "stderr": se}
        except ValueError as exc:
            summary["blowup_factor_limit"] = {"error": str(exc)}
    summary_path = outdir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    outputs.append(summary_path.name)

    if args.plots:
        outputs += _render_plots(outdir, records)
    _write_manifest(outdir, cfg, {"sweep": t_sweep}, outputs)
    print(f"wrote {csv_path} ({len(records)} records, {len(failures)} failures)")
    print(f"wrote {summary_path}")
    return 0


def _render_plots(outdir: Path, records) -> list[str]:
    outputs = []
    grad_points = [(r.eps, r.max_grad_u_neck) for r in records]
    fit = fit_rate(records, "max_grad_u_neck")
    svg = render_loglog(
        grad_points,
        title="neck gradient vs gap",
        xlabel="gap",
        ylabel="max |grad u| in neck",
        fit=(fit.slope, fit.intercept),
    )
    path = outdir / "gradient_vs_eps.svg"
    path.write_text(svg)
    outputs.append(path.name)
    energy_points = [(1.0 / r.rate, r.energy_v1) for r in records]
    svg = render_loglog(
        energy_points,
        title="unit-potential energy vs reciprocal rate",
        xlabel="1 / rate",
        ylabel="energy of v1",
    )
    path = outdir / "energy_vs_invrate.svg"
    path.write_text(svg)
    outputs.append(path.name)
    return outputs


def _cmd_verify(args) -> int:
    cfg, _ = _load_config(args.config)
    results = run_all(cfg)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def _cmd_report(args) -> int:
    outdir = Path(args.dir)
    csv_path = outdir / "sweep.csv"
    if not csv_path.exists():
        print(f"no sweep.csv under {outdir}", file=sys.stderr)
        return 2
    import csv as csvmod

    lines = csv_path.read_text().splitlines()
    if not lines or not lines[0].startswith("# neckfield-sweep-v1"):
        print("unrecognized sweep schema", file=sys.stderr)
        return 2
    reader = csvmod.DictReader(lines[1:])
    rows = [{k: float(v) for k, v in row.items()} for row in reader]
    cols = ("eps", "energy_v1", "c1", "c2", "b_factor", "max_grad_u_neck", "max_grad_v1_neck")
    header = "  ".join(f"{c:>16}" for c in cols)
    print(header)
    for row in rows:
        print("  ".join(f"{row[c]:>16.8g}" for c in cols))
    summary_path = outdir / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
        for key in sorted(summary):
            print(f"{key}: {json.dumps(summary[key], sort_keys=True)}")
    grad_points = [(row["eps"], row["max_grad_u_neck"]) for row in rows]
    path = outdir / "report_gradient.svg"
    path.write_text(render_loglog(grad_points, "neck gradient vs gap", "gap", "max |grad u|"))
    energy_points = [(1.0 / row["rate"], row["energy_v1"]) for row in rows]
    path2 = outdir / "report_energy.svg"
    path2.write_text(render_loglog(energy_points, "energy vs reciprocal rate", "1/rate", "energy"))
    print(f"wrote {path} and {path2}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="neckfield",
        description="Field concentration between nearly touching perfect conductors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-config", help="print or write the default configuration")
    p.add_argument("--out", help="write to this path instead of stdout")
    p.set_defaults(handler=_cmd_init_config)

    p = sub.add_parser("constants", help="closed-form constants and the quadrature oracle")
    p.add_argument("--dimension", "-n", "--n", type=int, default=2)
    p.add_argument("--order", "-m", "--m", type=float, default=2.0)
    p.add_argument("--coefficient", type=float, default=1.0, help="relative profile coefficient")
    p.add_argument(
        "--curvature",
        type=float,
        action="append",
        help="relative principal curvature (repeat for dimension 3)",
    )
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--neck-radius", type=float, default=0.5)
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(handler=_cmd_constants)

    p = sub.add_parser("mesh", help="generate, audit and export a mesh")
    p.add_argument("--config", help="configuration file (default: built-in)")
    p.add_argument("--epsilon", type=float, help="gap override")
    p.add_argument("--out", help="output path (default: <outdir>/mesh.txt)")
    p.set_defaults(handler=_cmd_mesh)

    p = sub.add_parser("solve", help="solve one gap value and emit the flux document")
    p.add_argument("--config", help="configuration file (default: built-in)")
    p.add_argument("--epsilon", type=float, help="gap override")
    p.add_argument("--dump-fields", action="store_true", help="also write nodal fields")
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("sweep", help="run the gap sweep and fit rates")
    p.add_argument("--config", help="configuration file (default: built-in)")
    p.add_argument("--plots", action="store_true", help="also render SVG plots")
    p.add_argument("--workers", type=int, help="solve gap values in a process pool")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--config", help="configuration file (default: built-in)")
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser("report", help="render stored sweep outputs")
    p.add_argument("--dir", required=True, help="directory holding sweep.csv")
    p.set_defaults(handler=_cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (ValueError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MeshError, fem.SolverError, QuadratureError, GeometryError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
