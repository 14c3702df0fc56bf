"""Command-line front end.

Subcommands: ``check``, ``transport``, ``nabla``, ``curvature``, ``torsion``,
``describe``.  Every output embeds the seed, tolerances and step sizes used;
with ``--deterministic`` the report is byte-identical across reruns of the
same config.  Exit codes: 0 pass, 1 check failure, 2 config error, 3
runtime/numeric error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys

import numpy as np

from . import checks as checkmod
from . import config as configmod
from .bundle import AdmissibilityError
from .connection import LinearConnection
from .defaults import ANCHOR_HOM_TOL, TRANSPORT_STEPS_PER_UNIT
from .fields import GeoconnError
from .prelie import anchor_hom_residual, curvature_components, torsion_components
from .derivative import nabla
from .transport import lift_curve

SCHEMA_VERSION = configmod.SCHEMA_VERSION


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_report(payload: dict, args) -> str:
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    if not args.deterministic:
        payload["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj)!r}")


def _csv_table(columns: list[str], rows: list[list]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        cells = [_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _load(args) -> configmod.RunConfig:
    cfg = configmod.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.steps is not None:
        cfg.steps = args.steps
    return cfg


def _meta(cfg: configmod.RunConfig) -> dict:
    return {
        "seed": cfg.seed,
        "steps": cfg.steps if cfg.steps is not None else TRANSPORT_STEPS_PER_UNIT,
        "tolerances": cfg.tolerances,
    }


def cmd_check(args) -> int:
    cfg = _load(args)
    report = checkmod.run_all(cfg)
    report.update(_meta(cfg))
    report["command"] = "check"
    _emit(_json_report(report, args), args.out)
    return 0 if report["passed"] else 1


def cmd_transport(args) -> int:
    cfg = _load(args)
    if not cfg.curves:
        raise configmod.ConfigError("$.curves", "transport needs at least one curve")
    if not 0 <= args.curve_index < len(cfg.curves):
        raise configmod.ConfigError("$.curves", f"curve index {args.curve_index} out of range")
    if cfg.connection is None or not isinstance(cfg.connection, LinearConnection):
        raise configmod.ConfigError("$.connection", "transport needs a linear connection")
    curve = cfg.curves[args.curve_index]
    steps = cfg.steps or getattr(curve, "steps", None)
    y0 = np.array([float(v) for v in args.y0.split(",")]) if args.y0 else np.eye(cfg.connection.l)[0]
    result = lift_curve(cfg.connection, curve, y0, steps)
    payload = {
        "command": "transport",
        "curve_index": args.curve_index,
        "transport_matrix": result.transport_matrix,
        "residual": result.max_admissibility_residual,
        "step_count": result.step_count,
        "y0": y0,
        "y1": result.final_fiber(),
    }
    payload.update(_meta(cfg))
    payload["steps"] = result.step_count
    if args.samples:
        columns = (
            ["t"]
            + [f"x{i}" for i in range(cfg.bundle.n)]
            + [f"y{a}" for a in range(cfg.connection.l)]
        )
        rows = [
            [t, *xs, *ys]
            for t, xs, ys in zip(result.ts, result.base_points, result.fiber_points)
        ]
        with open(args.samples, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_table(columns, rows))
        payload["samples"] = args.samples
    if args.format == "csv":
        columns = [f"m{j}" for j in range(cfg.connection.l)]
        _emit(_csv_table(columns, [list(r) for r in result.transport_matrix]), args.out)
    else:
        _emit(_json_report(payload, args), args.out)
    return 0


def _grid_points(cfg: configmod.RunConfig, per_axis: int) -> np.ndarray:
    if cfg.points:
        return np.stack(cfg.points)
    return cfg.bundle.base.grid(per_axis)


def cmd_nabla(args) -> int:
    cfg = _load(args)
    if cfg.connection is None or not isinstance(cfg.connection, LinearConnection):
        raise configmod.ConfigError("$.connection", "nabla needs a linear connection")
    if "s" not in cfg.sections or "psi" not in cfg.sections:
        raise configmod.ConfigError("$.sections", "nabla needs sections 's' and 'psi'")
    s = cfg.sections["s"]
    psi = cfg.sections["psi"]
    points = _grid_points(cfg, args.grid)
    columns = [f"x{i}" for i in range(cfg.bundle.n)] + ["component", "value"]
    rows = []
    for x in points:
        vals = nabla(cfg.connection, s, psi, x)
        for a, v in enumerate(vals):
            rows.append([*x, a, float(v)])
    if args.format == "csv":
        _emit(_csv_table(columns, rows), args.out)
    else:
        payload = {"command": "nabla", "columns": columns, "rows": rows}
        payload.update(_meta(cfg))
        _emit(_json_report(payload, args), args.out)
    return 0


def _component_table(cfg, args, kind: str) -> tuple[list[str], list[list], list[dict]]:
    conn = cfg.connection
    struct = cfg.structure
    n = cfg.bundle.n
    points = _grid_points(cfg, args.grid)
    hom_tol = cfg.tolerances["anchor_hom_tol"]
    columns = [f"x{i}" for i in range(n)]
    rows: list[list] = []
    flags: list[dict] = []
    for x in points:
        residual = anchor_hom_residual(struct, x)
        tensorial = residual <= hom_tol
        if not tensorial:
            flags.append({"x": x.tolist(), "anchor_hom_residual": residual})
        if kind == "curvature":
            comps = curvature_components(conn, struct, x)
            k, l = cfg.bundle.k, conn.l
            for a in range(k):
                for b in range(k):
                    for big_b in range(l):
                        for big_a in range(l):
                            rows.append([*x, a, b, big_b, big_a, float(comps[a, b, big_b, big_a]), tensorial])
        else:
            comps = torsion_components(conn, struct, x)
            k = cfg.bundle.k
            for a in range(k):
                for b in range(k):
                    for lam in range(k):
                        rows.append([*x, a, b, lam, float(comps[a, b, lam]), tensorial])
    if kind == "curvature":
        columns += ["alpha", "beta", "B", "A", "value", "tensorial"]
    else:
        columns += ["alpha", "beta", "lam", "value", "tensorial"]
    return columns, rows, flags


def cmd_curvature(args) -> int:
    cfg = _load(args)
    if cfg.connection is None or not isinstance(cfg.connection, LinearConnection):
        raise configmod.ConfigError("$.connection", "curvature needs a linear connection")
    if cfg.structure is None:
        raise configmod.ConfigError("$.structure", "curvature needs structure functions")
    columns, rows, flags = _component_table(cfg, args, "curvature")
    if args.format == "csv":
        _emit(_csv_table(columns, rows), args.out)
    else:
        payload = {"command": "curvature", "columns": columns, "rows": rows, "non_tensorial_points": flags}
        payload.update(_meta(cfg))
        _emit(_json_report(payload, args), args.out)
    return 0


def cmd_torsion(args) -> int:
    cfg = _load(args)
    if cfg.connection is None or not isinstance(cfg.connection, LinearConnection):
        raise configmod.ConfigError("$.connection", "torsion needs a linear connection")
    if cfg.structure is None:
        raise configmod.ConfigError("$.structure", "torsion needs structure functions")
    if cfg.connection.l != cfg.bundle.k:
        raise configmod.ConfigError("$.connection", "torsion needs a connection on the anchored bundle (l == k)")
    columns, rows, flags = _component_table(cfg, args, "torsion")
    if args.format == "csv":
        _emit(_csv_table(columns, rows), args.out)
    else:
        payload = {"command": "torsion", "columns": columns, "rows": rows, "non_tensorial_points": flags}
        payload.update(_meta(cfg))
        _emit(_json_report(payload, args), args.out)
    return 0


def cmd_describe(args) -> int:
    cfg = _load(args)
    center = cfg.bundle.base.center()
    rank, kernel = cfg.bundle.rank_kernel_at(center)
    payload = {
        "command": "describe",
        "gallery": cfg.gallery,
        "dims": {"n": cfg.bundle.n, "k": cfg.bundle.k, "l": cfg.connection.l if cfg.connection else None},
        "box": [list(b) for b in cfg.bundle.base.bounds],
        "anchor_rank_at_center": rank,
        "anchor_kernel_dim_at_center": kernel.shape[1],
        "has_connection": cfg.connection is not None,
        "has_structure": cfg.structure is not None,
        "curves": len(cfg.curves),
    }
    if cfg.structure is not None:
        payload["anchor_hom_residual_at_center"] = anchor_hom_residual(cfg.structure, center)
        payload["anchor_hom_tol"] = ANCHOR_HOM_TOL
    payload.update(_meta(cfg))
    _emit(_json_report(payload, args), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoconn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to a JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--steps", type=int, default=None, help="override integrator steps")
        p.add_argument("--out", default=None, help="write the report to a file instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--deterministic", action="store_true", help="omit the timestamp for byte-identical reruns")

    p = sub.add_parser("check", help="run the verification suite of the configured objects")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("transport", help="parallel transport along a configured curve")
    common(p)
    p.add_argument("--curve-index", type=int, default=0)
    p.add_argument("--y0", default=None, help="comma-separated initial fiber vector")
    p.add_argument("--samples", default=None, help="write sampled lift points to this CSV path")
    p.set_defaults(fn=cmd_transport)

    p = sub.add_parser("nabla", help="derivative of a configured section pair on a grid")
    common(p)
    p.add_argument("--grid", type=int, default=3, help="grid points per axis when no points are configured")
    p.set_defaults(fn=cmd_nabla)

    p = sub.add_parser("curvature", help="curvature component table on a grid")
    common(p)
    p.add_argument("--grid", type=int, default=3)
    p.set_defaults(fn=cmd_curvature)

    p = sub.add_parser("torsion", help="torsion component table on a grid")
    common(p)
    p.add_argument("--grid", type=int, default=3)
    p.set_defaults(fn=cmd_torsion)

    p = sub.add_parser("describe", help="summarise the configured objects")
    common(p)
    p.set_defaults(fn=cmd_describe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except configmod.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except AdmissibilityError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3
    except GeoconnError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
