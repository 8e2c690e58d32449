"""Batch command-line front end.

Subcommands: curvature, greens, mass, t0, tables, glue-scan, verify.
Outputs are deterministic (sorted keys, floats at 17 significant digits);
Green's function solves are cached by content hash under --cache-dir or
$QUADCURV_CACHE.  Exit codes: 0 success, 1 verification failure, 2 input
error, 3 missing dependency in --no-compute mode.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import charts as ch
from . import greens as gr
from . import gluing as gl
from . import curvature_engine as eng


def _fmt(value):
    """Deterministic JSON-like rendering; floats at 17 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, Fraction):
        return '"%s"' % value
    if isinstance(value, float):
        if value != value:
            return '"nan"'
        if value in (float("inf"), float("-inf")):
            return '"%s"' % value
        return format(value, ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        import json as _json
        return _json.dumps(value)
    if isinstance(value, np.ndarray):
        return _fmt(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: str(kv[0]))
        return "{" + ", ".join('%s: %s' % (_fmt(str(k)), _fmt(v))
                               for k, v in items) + "}"
    if isinstance(value, np.floating):
        return _fmt(float(value))
    return _fmt(str(value))


def emit(payload, args, csv_text=None):
    if getattr(args, "csv", False):
        text = csv_text if csv_text is not None else _payload_csv(payload)
    else:
        text = _fmt(payload) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _payload_csv(payload):
    def flat(prefix, v, rows):
        if isinstance(v, dict):
            for k in sorted(v, key=str):
                flat(f"{prefix}{k}." if prefix else f"{k}.", v[k], rows) \
                    if isinstance(v[k], dict) else \
                    rows.append((f"{prefix}{k}", _fmt(v[k])))
        else:
            rows.append((prefix.rstrip("."), _fmt(v)))
    rows = []
    flat("", payload, rows)
    return "key,value\n" + "\n".join(f"{k},{v}" for k, v in rows) + "\n"


def _parse_point(text):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 4:
        raise ValueError("points are 4 comma-separated coordinates")
    return np.array(vals)


def cmd_curvature(args):
    chart = ch.chart_from_config({"chart": args.chart, "style": args.style})
    p = _parse_point(args.point)
    bundle = eng.curvature_at(chart, p, t=args.t)
    emit(bundle.to_dict(), args)
    return 0


def cmd_greens(args):
    sol = gr.get_or_solve(args.space, n=args.grid, order=args.order,
                          cache_dir=args.cache_dir, compute=not args.no_compute)
    if args.space == "fs":
        payload = {"space": "fs", "A": sol["A"], "mass": sol["mass"],
                   "ode_residual": sol["ode_residual"]()}
    else:
        payload = sol.to_metadata()
    emit(payload, args)
    return 0


def cmd_mass(args):
    if args.space == "burns":
        radii = args.radii or [50, 100, 200, 400, 1000]
        rep = gr.mass_surface_integral(ch.burns_metric("inverted"), radii,
                                       mass_from_A=2.0)
        emit(rep.to_dict(), args)
        return 0
    if args.space == "fs":
        emit({"space": "fs", "mass": Fraction(2)}, args)
        return 0
    sol = gr.get_or_solve(args.space, n=args.grid, order=args.order,
                          cache_dir=args.cache_dir, compute=not args.no_compute)
    payload = {"space": args.space, "mass_from_A": sol.mass, "A": sol.A,
               "A_error": sol.A_error}
    if args.flux:
        base = gr.get_or_solve("s2xs2", n=args.grid, order=args.order,
                               cache_dir=args.cache_dir,
                               compute=not args.no_compute)
        chart = gr.blowup_chart(base, inner_radius=1.2)
        radii = args.radii or [6, 9, 14, 20]
        rep = gr.mass_surface_integral(chart, radii, mass_from_A=sol.mass)
        payload["mass_surface_integral"] = rep.to_dict()
    emit(payload, args)
    return 0


def _masses_from_cache(args):
    try:
        cover = gr.get_or_solve("s2xs2", n=args.grid, order=args.order,
                                cache_dir=args.cache_dir,
                                compute=not args.no_compute)
    except FileNotFoundError:
        return None
    return {"m1": cover.mass,
            "m2": gr.quotient_greens("s2xs2_z2", cover).mass,
            "m3": gr.quotient_greens("rp2xrp2", cover).mass}


def cmd_t0(args):
    cfg = gl.GluingConfig(compact=args.compact, bubble=args.bubble,
                          symmetry=args.symmetry, flip=args.flip)
    masses = _masses_from_cache(args) if args.numeric else None
    if args.numeric and masses is None:
        print("error: no cached Green's function solution for numeric masses",
              file=sys.stderr)
        return 3
    lt = gl.leading_term(cfg, mass=masses)
    emit(lt.to_dict(), args)
    return 0


def cmd_tables(args):
    masses = _masses_from_cache(args) if args.numeric else None
    if args.numeric and masses is None:
        print("error: no cached Green's function solution for numeric masses",
              file=sys.stderr)
        return 3
    table = gl.emit_tables(args.which, masses=masses)
    emit(table, args, csv_text=gl.tables_to_csv(table))
    return 0


def cmd_glue_scan(args):
    cfg = gl.GluingConfig(compact=args.compact, bubble=args.bubble, t=args.t,
                          symmetry=args.symmetry)
    if args.bubble != "burns":
        print("error: decay scans need closed-form factors (bubble = burns)",
              file=sys.stderr)
        return 2
    rep = gl.bt_decay_scan(cfg, args.a_values, refined=args.refined,
                           n_points=args.points)
    emit(rep, args)
    return 0


def cmd_verify(args):
    from .verify import run_suite
    results = run_suite(args.suite, cache_dir=args.cache_dir)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(_fmt([{k: r[k] for k in ("name", "passed", "seconds", "detail")}
                           for r in results]) + "\n")
    return 0 if all(r["passed"] for r in results) else 1


def build_parser():
    ap = argparse.ArgumentParser(
        prog="quadcurv",
        description="quadratic-curvature toolkit for glued Einstein four-manifolds")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", default=True,
                       help="JSON output (default)")
        p.add_argument("--csv", action="store_true", help="CSV output")
        p.add_argument("--out", help="write the report to a file")
        p.add_argument("--cache-dir", default=None,
                       help="cache directory (default: $QUADCURV_CACHE)")
        p.add_argument("--no-compute", action="store_true",
                       help="fail instead of computing missing cache entries")
        p.add_argument("--grid", type=int, default=256,
                       help="Green's function grid resolution")
        p.add_argument("--order", type=int, default=2, choices=(2, 4))

    p = sub.add_parser("curvature", help="curvature bundle at a chart point")
    common(p)
    p.add_argument("--chart", required=True,
                   choices=("fs", "s2xs2", "burns", "flat", "blowup"))
    p.add_argument("--style", default=None)
    p.add_argument("--point", required=True, help="x1,x2,x3,x4")
    p.add_argument("--t", type=float, default=0.0)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("greens", help="solve or load a Green's function")
    common(p)
    p.add_argument("--space", default="s2xs2",
                   choices=("fs", "s2xs2", "s2xs2_z2", "rp2xrp2"))
    p.set_defaults(func=cmd_greens)

    p = sub.add_parser("mass", help="AF mass of a building block")
    common(p)
    p.add_argument("--space", default="burns",
                   choices=("burns", "fs", "s2xs2", "s2xs2_z2", "rp2xrp2"))
    p.add_argument("--radii", type=float, nargs="+", default=None)
    p.add_argument("--flux", action="store_true",
                   help="also run the surface-integral cross-check")
    p.set_defaults(func=cmd_mass)

    p = sub.add_parser("t0", help="critical parameter of a gluing")
    common(p)
    p.add_argument("--compact", default="fs", choices=sorted(gl.COMPACT_FACTORS))
    p.add_argument("--bubble", default="burns", choices=sorted(gl.AF_FACTORS))
    p.add_argument("--symmetry", default="diagonal")
    p.add_argument("--flip", action="store_true")
    p.add_argument("--numeric", action="store_true",
                   help="substitute cached masses into symbolic rows")
    p.set_defaults(func=cmd_t0)

    p = sub.add_parser("tables", help="emit a published table")
    common(p)
    p.add_argument("--which", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--numeric", action="store_true")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("glue-scan", help="damage-zone decay scan")
    common(p)
    p.add_argument("--compact", default="fs")
    p.add_argument("--bubble", default="burns")
    p.add_argument("--symmetry", default="diagonal")
    p.add_argument("--t", type=float, default=-1.0 / 3.0)
    p.add_argument("--refined", action="store_true")
    p.add_argument("--a-values", type=float, nargs="+",
                   default=[0.30, 0.25, 0.20, 0.16, 0.13])
    p.add_argument("--points", type=int, default=150)
    p.set_defaults(func=cmd_glue_scan)

    p = sub.add_parser("verify", help="run the acceptance suite")
    common(p)
    p.add_argument("--suite", default="all", choices=("all", "fast"))
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ch.ChartDomainError, gl.GluingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
