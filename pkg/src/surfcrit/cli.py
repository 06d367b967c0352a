"""Command-line entry point.

Subcommands: ``check``, ``solve``, ``verify``, ``counterexample`` and
``region``. Exit status: 0 the conclusion was verified, 1 a hypothesis or
the conclusion failed, 2 bad input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .boundary import DEFAULT_SAMPLES, condition_report, load_domain
from .counterexample import (CounterexampleParams, default_roots, summarize_sweep,
                             verify_family)
from .critical import location_region, poincare_hopf_audit
from .errors import InputError, ParameterError, SurfcritError
from .fields import FEMField
from .mesh import read_mesh, triangulate, write_mesh
from .pde import (TORSION, linear_nonlinearity, power_nonlinearity, semistability_margin,
                  solve_eigen, solve_semilinear, solve_torsion)
from .surface import SPHERE, SurfaceModel

log = logging.getLogger("surfcrit")

EXIT_OK, EXIT_HYPOTHESIS, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


# Serialization ---------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = "%.17g" % x
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number, bool)) or v is None for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(obj) + "\n")


def write_csv(path: Path, header: str, columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack(columns), fmt="%.17g", delimiter=",", header=header,
               comments="")


# Argument parsing ------------------------------------------------------------------


def _float_list(text: str) -> list:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surfcrit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, domain=True):
        if domain:
            p.add_argument("--domain", required=True, help="domain JSON file")
            p.add_argument("--surface", choices=["sphere", "hyperbolic"],
                           help="override the surface named in the domain file")
        p.add_argument("--samples", type=_positive(int), default=DEFAULT_SAMPLES,
                       help="boundary samples (default %(default)s)")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")

    def problem(p):
        p.add_argument("--problem", choices=["torsion", "eigen", "custom"], default="torsion")
        p.add_argument("--h", type=_positive(float), default=0.05, help="mesh size")
        p.add_argument("--power", type=_float_list, default=[1.0, 1.0], metavar="C0,C2",
                       help="custom nonlinearity f(s) = C0 + C2 s^2 (default 1,1)")

    p = sub.add_parser("check", help="evaluate the boundary hypotheses")
    common(p)

    p = sub.add_parser("solve", help="mesh and solve the Dirichlet problem")
    common(p)
    problem(p)

    p = sub.add_parser("verify", help="full uniqueness audit")
    common(p)
    problem(p)
    p.add_argument("--seeds", type=_positive(int), default=64, help="seed grid per axis")
    p.add_argument("--force", action="store_true", help="continue when the check fails")

    p = sub.add_parser("counterexample", help="multi-maximum domains")
    common(p, domain=False)
    p.add_argument("--surface", choices=["sphere", "hyperbolic"], default="sphere")
    p.add_argument("--roots", type=_float_list, help="a1,a2,... (default evenly spaced)")
    p.add_argument("--n", type=_positive(int), default=3, help="number of roots if --roots absent")
    p.add_argument("--b", type=_float_list, default=[1e-4], help="b or comma list of b values")
    p.add_argument("--eta", type=_positive(float), help="override the midpoint choice of eta")
    p.add_argument("--field-stride", type=_positive(int), default=8,
                   help="write every k-th grid node to the field CSV")

    p = sub.add_parser("region", help="location region of the maximum (sphere)")
    common(p)
    p.add_argument("--grid", type=_positive(int), default=129)
    p.add_argument("--field", help="directory written by 'solve' holding the field to test")
    return ap


def _domain(args):
    spec = args.domain
    dom = load_domain(spec, n=args.samples)
    if getattr(args, "surface", None) and SurfaceModel.parse(args.surface) is not dom.model:
        import json

        try:
            data = json.loads(Path(spec).read_text())
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot reread domain file: {exc}") from exc
        data["surface"] = args.surface
        dom = load_domain(data, n=args.samples)
    return dom


def _nonlinearity(args, lam: Optional[float] = None):
    if args.problem == "torsion":
        return TORSION
    if args.problem == "eigen":
        return linear_nonlinearity(lam)
    if len(args.power) != 2:
        raise ParameterError("--power takes exactly two numbers C0,C2")
    return power_nonlinearity(*args.power)


def _solve(args, domain):
    mesh = triangulate(domain.curve, args.h)
    lam = None
    if args.problem == "torsion":
        u = solve_torsion(mesh, domain.model)
    elif args.problem == "eigen":
        lam, u = solve_eigen(mesh, domain.model)
    else:
        u = solve_semilinear(mesh, domain.model, _nonlinearity(args))
    return mesh, u, lam


# Commands --------------------------------------------------------------------------


def cmd_check(args) -> int:
    domain = _domain(args)
    rep = condition_report(domain, args.samples)
    out = Path(args.out)
    write_json(out / "check_report.json", rep.to_dict())
    print(f"check: min_G={rep.min_G:.6g} star_margin={rep.star_margin:.6g} "
          f"horoconvex={rep.horoconvex} F_sign_changes={rep.sign_changes_F} "
          f"-> {'pass' if rep.passes else 'fail'}")
    return EXIT_OK if rep.passes else EXIT_HYPOTHESIS


def cmd_solve(args) -> int:
    domain = _domain(args)
    mesh, u, lam = _solve(args, domain)
    out = Path(args.out)
    write_mesh(mesh, out, u.values)
    report = {
        "surface": domain.model.value,
        "problem": args.problem,
        "h": args.h,
        "vertices": len(mesh.vertices),
        "triangles": len(mesh.triangles),
        "minAngle": float(mesh.angles().min()),
        "maxValue": float(u.values.max()),
        "eigenvalue": lam,
    }
    write_json(out / "solve_report.json", report)
    print(f"solve: {args.problem} on {len(mesh.vertices)} vertices, max u = {u.values.max():.6g}"
          + (f", lambda1 = {lam:.10g}" if lam is not None else ""))
    return EXIT_OK


def cmd_verify(args) -> int:
    out = Path(args.out)
    report: dict = {"surface": None, "problem": args.problem, "h": args.h, "stages": {}}
    stages = report["stages"]

    def finish(status, failed=None):
        report["failedStage"] = failed
        report["conclusionVerified"] = status == EXIT_OK
        write_json(out / "verify_report.json", report)
        print(f"verify: {'unique non-degenerate maximum' if status == EXIT_OK else 'not verified'}"
              + (f" (failed stage: {failed})" if failed else ""))
        return status

    try:
        domain = _domain(args)
        report["surface"] = domain.model.value
        rep = condition_report(domain, args.samples)
        stages["check"] = rep.to_dict()
        if not rep.passes and not args.force:
            return finish(EXIT_HYPOTHESIS, "check")
        mesh, u, lam = _solve(args, domain)
        stages["solve"] = {"vertices": len(mesh.vertices), "triangles": len(mesh.triangles),
                           "maxValue": float(u.values.max()), "eigenvalue": lam}
        inner = u.values[mesh.interior]
        stages["positivity"] = {"minInterior": float(inner.min())}
        if not np.all(inner > 0):
            return finish(EXIT_HYPOTHESIS, "positivity")
        semi = semistability_margin(mesh, domain.model, u, _nonlinearity(args, lam))
        stages["semistability"] = {"margin": semi.margin, "tolerance": semi.tolerance,
                                   "semistable": semi.semistable}
        if not semi.semistable:
            return finish(EXIT_HYPOTHESIS, "semistability")
        audit = poincare_hopf_audit(domain, u, seeds=args.seeds)
        stages["audit"] = audit.to_dict()
        ok = audit.unique_maximum and audit.boundary_transversality_min > 0
        for w in audit.warnings:
            log.warning(w)
        return finish(EXIT_OK if ok else EXIT_HYPOTHESIS, None if ok else "audit")
    except SurfcritError as exc:
        stages["error"] = {"type": type(exc).__name__, "message": str(exc)}
        finish(exc.exit_status, "error")
        raise


def _btag(b: float) -> str:
    return ("%.3e" % b).replace("+", "")


def cmd_counterexample(args) -> int:
    model = SurfaceModel.parse(args.surface)
    roots = args.roots if args.roots is not None else list(default_roots(args.n))
    out = Path(args.out)
    base = CounterexampleParams.build(model, roots, args.b[0], args.eta)
    reports = []
    status = EXIT_OK
    n = base.poly.n
    for b in args.b:
        if not b > 0:
            raise ParameterError("every b must be positive")
        params = base.with_b(b)
        t0 = time.perf_counter()
        rep, omega = verify_family(params)
        tag = _btag(b)
        c = omega.curve
        write_csv(out / f"boundary_b{tag}.csv", "t,x,y", [c.t, c.p[:, 0], c.p[:, 1]])
        k = args.field_stride
        ky = max(1, k // 4)
        X, Y = np.meshgrid(omega.xs[::k], omega.ys[::ky], indexing="xy")
        U = omega.values[::ky, ::k]
        write_csv(out / f"field_b{tag}.csv", "x,y,u", [X.ravel(), Y.ravel(), U.ravel()])
        d = rep.to_dict()
        ok = (rep.component_count >= n and len(rep.maxima) >= n and rep.star_margin > 0
              and len(rep.maxima) - rep.saddle_count == 1)
        d["propertiesVerified"] = ok
        write_json(out / f"report_b{tag}.json", d)
        reports.append(rep)
        status = max(status, EXIT_OK if ok else EXIT_HYPOTHESIS)
        print(f"b={b:g}: components={rep.component_count} maxima={len(rep.maxima)} "
              f"saddles={rep.saddle_count} star_margin={rep.star_margin:.3g} "
              f"min_G={rep.min_G:.4g} min_G/sqrt(b)={rep.min_G_over_sqrt_b:.4g} "
              f"({time.perf_counter() - t0:.1f}s)")
    summary = summarize_sweep(reports).to_dict()
    summary.update({"surface": model.value, "roots": list(base.poly.roots), "eta": base.eta,
                    "xBarEta": base.xbar, "supAdmissibility": base.admissibility.sup_value,
                    "f1": base.admissibility.f1})
    write_json(out / "summary.json", summary)
    print(f"fitted C = {summary['fittedC']:.4g}")
    return status


def cmd_region(args) -> int:
    domain = _domain(args)
    if domain.model is not SPHERE:
        raise InputError("the location region is only defined on the sphere")
    res = location_region(domain, grid=args.grid)
    out = Path(args.out)
    X, Y = np.meshgrid(res.xs, res.ys, indexing="xy")
    write_csv(out / "region_mask.csv", "x,y,inOmega",
              [X.ravel(), Y.ravel(), res.mask.ravel().astype(float)])
    report = {"grid": args.grid, "insideCount": int(res.inside.sum()),
              "regionCount": int(res.mask.sum()), "antipodeExclusions": res.antipode_inside}
    status = EXIT_OK
    if args.field:
        mesh, values = read_mesh(args.field)
        if values is None:
            raise InputError(f"{args.field} holds no field.csv")
        u = FEMField(mesh, values, domain.model, "loaded")
        audit_pts = [c.p for c in poincare_hopf_audit(domain, u, with_v=False).critical_points
                     if c.kind == "Max"]
        if not audit_pts:
            i = int(np.argmax(values))
            audit_pts = [mesh.vertices[i]]
        # a computed maximum is only known to within the mesh size (metric factor <= 2)
        inside = [res.contains(q, tol=2.0 * mesh.h) for q in audit_pts]
        report["maxima"] = [[float(q[0]), float(q[1])] for q in audit_pts]
        report["maximaInRegion"] = inside
        status = EXIT_OK if all(inside) else EXIT_HYPOTHESIS
    write_json(out / "region_report.json", report)
    print(f"region: {report['regionCount']} of {report['insideCount']} interior grid nodes"
          + (f"; maxima in region: {report['maximaInRegion']}" if args.field else ""))
    return status


COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "counterexample": cmd_counterexample,
    "region": cmd_region,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SurfcritError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return exc.exit_status
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
