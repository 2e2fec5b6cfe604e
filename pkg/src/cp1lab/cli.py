"""Command-line front end.

Every subcommand prints (or writes with --report) a JSON report.  Exit
codes: 0 when all checks pass, 1 when a check fails, 2 for usage and
input errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import figures, suites
from .develop import Loop, darboux_holonomy, monodromy
from .export import leaves_csv, leaves_svg, write_ply
from .hyp3 import MoebiusMatrix, translation_length
from .qdiff import (
    HalfTranslationSurface, PlanarDifferential, SurfacePoint, detect_cylinders, flat_geodesic,
)


class UsageError(Exception):
    pass


def _read_json(path: str, kind: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {kind} file {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{kind} file {path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _load(path: str, kind: str, ctor):
    data = _read_json(path, kind)
    try:
        return ctor(data)
    except (KeyError, TypeError, ValueError) as exc:
        field = exc.args[0] if isinstance(exc, KeyError) else exc
        raise UsageError(f"{kind} file {path}: bad or missing field: {field}") from exc


def _complex(text: str) -> complex:
    try:
        parts = [float(p) for p in text.replace(",", " ").split()]
    except ValueError:
        try:
            return complex(text.replace(" ", ""))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from exc
    if len(parts) == 1:
        return complex(parts[0])
    if len(parts) == 2:
        return complex(parts[0], parts[1])
    raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def _surface_point(text: str) -> SurfacePoint:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("surface points are poly:x:y")
    try:
        return SurfacePoint(int(parts[0]), complex(float(parts[1]), float(parts[2])))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad surface point {text!r}") from exc


def _box(text: str):
    try:
        vals = [float(v) for v in text.split(":")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("box is x0:x1:y0:y1") from exc
    if len(vals) != 4 or vals[0] >= vals[1] or vals[2] >= vals[3]:
        raise argparse.ArgumentTypeError("box is x0:x1:y0:y1 with x0 < x1, y0 < y1")
    return tuple(vals)


def _cx(z: complex) -> list:
    return [float(z.real), float(z.imag)]


def _emit(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=str)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# --- subcommands -----------------------------------------------------------------

def cmd_surface(args) -> tuple[dict, bool]:
    diff = _load(args.diff, "differential", PlanarDifferential.from_json)
    try:
        grid = figures.parse_grid(args.grid)
    except figures.GridSpecError as exc:
        raise UsageError(str(exc)) from exc
    mesh = figures.surface_mesh(diff, grid, args.center, tol=args.tol)
    with open(args.out, "w") as fh:
        nv = write_ply(mesh, fh, args.model)
    report = {"command": "surface", "out": args.out, "model": args.model, "vertices": nv,
              "faces": len(mesh.faces), "grid": args.grid}
    ok = nv > 0
    zero = min(diff.zeros, key=lambda zk: abs(zk[0] - args.center), default=None)
    at_zero = zero is not None and abs(zero[0] - args.center) < 1e-12
    if grid.kind == "annulus" and at_zero:
        r = figures.ideal_triangle_report(diff, grid, args.center, zero[1])
        report["ideal_triangle"] = {"fins": r.fins, "corners": r.corners, "ratio": r.ratio, "pass": r.passed}
        ok = ok and r.passed
    if grid.kind == "disk" and at_zero:
        b = figures.bubble_report(diff, grid, args.center)
        report["bubble"] = {"slope": b.slope, "target": -2.5, "window": 0.1, "escape": b.escape,
                            "pass": b.passed()}
        ok = ok and b.passed()
    return report, ok


def cmd_trajectories(args) -> tuple[dict, bool]:
    diff = _load(args.diff, "differential", PlanarDifferential.from_json)
    leaves = figures.trace_foliation(diff, args.box, args.angle, args.seeds)
    with open(args.out, "w") as fh:
        fh.write(leaves_svg(leaves, args.box, zeros=[z for z, _ in diff.zeros]))
    if args.csv:
        with open(args.csv, "w") as fh:
            leaves_csv(leaves, fh)
    return {"command": "trajectories", "leaves": len(leaves), "angle": args.angle, "out": args.out}, bool(leaves)


def _matrix_report(M: MoebiusMatrix) -> dict:
    tr = M.trace()
    return {"matrix": [[_cx(M.a), _cx(M.b)], [_cx(M.c), _cx(M.d)]], "trace": _cx(tr),
            "translation_length": translation_length(M, warn=False)}


def cmd_holonomy(args) -> tuple[dict, bool]:
    diff = _load(args.diff, "differential", PlanarDifferential.from_json)
    if args.method == "ode":
        if args.loop:
            loop = _load(args.loop, "loop", Loop.from_json)
        elif args.translate is not None:
            loop = Loop([args.base, args.base + args.translate], closed=False)
        else:
            raise UsageError("ode holonomy needs --loop or --translate")
        M = monodromy(diff, loop, args.tol)
    else:
        if args.translate is None and args.dilate is None:
            raise UsageError("darboux holonomy needs --translate or --dilate")
        g = MoebiusMatrix.translation(args.translate) if args.translate is not None \
            else MoebiusMatrix.diagonal(math.sqrt(args.dilate))
        try:
            M = darboux_holonomy(diff, g, args.base if args.base.imag > 0 else 1j, args.tol)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    rep = {"command": "holonomy", "method": args.method}
    rep.update(_matrix_report(M))
    return rep, True


def cmd_geodesic(args) -> tuple[dict, bool]:
    surf = _load(args.surface, "surface", HalfTranslationSurface.from_json)
    res = flat_geodesic(surf, args.start, args.end, max_depth=args.max_depth, displacement=args.displacement)
    segs = [{"holonomy": _cx(s.holonomy), "length": s.length, "height": s.height, "width": s.width}
            for s in res.segments]
    return {"command": "geodesic", "length": res.length, "segments": segs,
            "angles": [[str(v), a, b] for v, a, b in res.angles], "certified": res.certified}, res.certified


def cmd_cylinders(args) -> tuple[dict, bool]:
    surf = _load(args.surface, "surface", HalfTranslationSurface.from_json)
    cyls = detect_cylinders(surf, args.angle, args.max_circumference)
    out = [{"direction": c.theta, "circumference": c.circumference, "width": c.width,
            "itinerary": [list(map(int, e)) if isinstance(e, tuple) else e for e in c.itinerary]}
           for c in cyls]
    return {"command": "cylinders", "cylinders": out}, True


def cmd_verify(args) -> tuple[dict, bool]:
    diff = _load(args.diff, "differential", PlanarDifferential.from_json) if args.diff else None
    res = suites.run_suite(args.suite, diff, seed=args.seed)
    return {args.suite: res.as_dict()}, res.passed


def cmd_report(args) -> tuple[dict, bool]:
    diff = _load(args.diff, "differential", PlanarDifferential.from_json) if args.diff else None
    out, ok = {}, True
    for name in args.suites or suites.SUITES:
        res = suites.run_suite(name, diff, seed=args.seed)
        out[name] = res.as_dict()
        ok = ok and res.passed
    return out, ok


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cp1lab", description="Quadratic differentials, Epstein surfaces and holonomy.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized sampling")
    common.add_argument("--report", help="write the JSON report here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("surface", parents=[common], help="Epstein-Schwarz mesh export (PLY)")
    s.add_argument("--diff", required=True)
    s.add_argument("--grid", required=True, help="annulus:r0:r1:NT[:NR], disk:r0:r1:NT[:NR], rect:x0:x1:y0:y1:N[:M]")
    s.add_argument("--model", choices=["ball", "halfspace"], default="ball")
    s.add_argument("--center", type=_complex, default=0j, help="center of polar grids")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_surface)

    s = sub.add_parser("trajectories", parents=[common], help="foliation leaves as SVG (and CSV)")
    s.add_argument("--diff", required=True)
    s.add_argument("--box", type=_box, default=(-3.0, 3.0, -3.0, 3.0))
    s.add_argument("--angle", type=float, default=0.0, help="0 horizontal, pi vertical")
    s.add_argument("--seeds", type=int, default=12)
    s.add_argument("--out", required=True)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_trajectories)

    s = sub.add_parser("holonomy", parents=[common], help="holonomy by ODE monodromy or the half-plane construction")
    s.add_argument("--diff", required=True)
    s.add_argument("--method", choices=["ode", "darboux"], default="ode")
    s.add_argument("--loop")
    s.add_argument("--translate", type=_complex)
    s.add_argument("--dilate", type=float)
    s.add_argument("--base", type=_complex, default=0j)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_holonomy)

    s = sub.add_parser("geodesic", parents=[common], help="flat geodesic on a glued polygon surface")
    s.add_argument("--surface", required=True)
    s.add_argument("--from", dest="start", type=_surface_point, required=True, help="poly:x:y")
    s.add_argument("--to", dest="end", type=_surface_point, required=True, help="poly:x:y")
    s.add_argument("--displacement", type=_complex)
    s.add_argument("--max-depth", type=int, default=16)
    s.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("cylinders", parents=[common], help="cylinders of closed trajectories")
    s.add_argument("--surface", required=True)
    s.add_argument("--angle", type=float, action="append", required=True)
    s.add_argument("--max-circumference", type=float, default=10.0)
    s.set_defaults(func=cmd_cylinders)

    s = sub.add_parser("verify", parents=[common], help="run one verification suite")
    s.add_argument("suite", choices=suites.SUITES)
    s.add_argument("--diff")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("report", parents=[common], help="run all suites and emit one JSON")
    s.add_argument("--diff")
    s.add_argument("--suites", nargs="*", choices=suites.SUITES)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    np.random.seed(args.seed)
    try:
        report, ok = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(report, args.report)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
