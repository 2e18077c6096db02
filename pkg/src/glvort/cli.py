"""Command-line front end.

Every subcommand writes deterministic JSON: identical arguments give
byte-identical files. Exit status is 0 on success, 2 on usage or input
errors and 1 on numerical failure (no annulus match, solver not
converging).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import fields as fl
from . import measure as ms
from . import obstacle as ob
from . import radial as rd
from . import specfun as sf
from . import verify as vf

GRID_MIN, GRID_MAX = 32, 2048
CHECKS = ("divergence", "complex", "pohozaev", "tv")


class UsageError(Exception):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _grid_size(text: str) -> int:
    n = int(text)
    if not GRID_MIN <= n <= GRID_MAX:
        raise argparse.ArgumentTypeError(f"grid size must be in [{GRID_MIN}, {GRID_MAX}], got {n}")
    return n


def _emit_field(f: fl.GridField, path: str | None) -> None:
    if path:
        fl.write_field(f, path)


def _out(obj) -> int:
    sys.stdout.write(_dumps(obj))
    return 0


# ---------------------------------------------------------------------------
# subcommands


def cmd_bessel(a) -> int:
    ev = sf.evaluate_i if a.kind == "i" else sf.evaluate_k
    res = ev(a.order, a.x, a.deriv)
    out = {"kind": a.kind, "order": res.order, "x": res.argument, "deriv": a.deriv,
           "value": res.value, "terms": res.terms_used}
    if a.x > 0:
        out["ode_residual"] = sf.ode_residual(a.order, a.x, a.kind)
    return _out(out)


def cmd_slab(a) -> int:
    f = rd.slab_field(fl.GridSpec.square(1.0, a.grid))
    _emit_field(f, a.emit)
    return _out({"field": "slab", "grid": a.grid, "dx": f.dx})


def cmd_annulus(a) -> int:
    m = rd.match_annulus(a.r)
    c = m.coefficients
    info = {"r": c.r, "R": c.R, "alpha": c.alpha, "beta": c.beta, "gamma": c.gamma, "delta": c.delta,
            "inner_slope": m.inner_slope_value, "match_residual": m.match_residual}
    if a.emit:
        f = rd.annulus_field(m, rd.annulus_grid(m, a.grid))
        _emit_field(f, a.emit)
        info["grid"] = a.grid
        info["dx"] = f.dx
    return _out(info)


def cmd_multiline(a) -> int:
    f = rd.multiline_field(a.n, fl.GridSpec.square(1.0, a.grid))
    _emit_field(f, a.emit)
    return _out({"field": "multiline", "n": a.n, "grid": a.grid, "dx": f.dx,
                 "expected_angles": rd.multiline_angles(a.n).tolist(),
                 "radial_ode_residual": [sf.ode_residual(a.n, x) for x in (0.5, 1.0)]})


def cmd_obstacle(a) -> int:
    make = ob.disk_problem if a.domain == "disk" else ob.square_problem
    s = ob.solve_obstacle(make(a.lam, a.grid, tolerance=a.tol, max_iterations=a.max_iter))
    _emit_field(s.field, a.emit)
    if a.emit_mask:
        f = s.field
        fl.write_field(fl.GridField(f.nx, f.ny, f.x0, f.y0, f.dx, f.dy,
                                    s.coincidence_mask.astype(float)), a.emit_mask)
    return _out({"lambda": a.lam, "psi": s.psi, "grid": a.grid, "iterations": s.iterations,
                 "complementarity_residual": s.complementarity_residual,
                 "coincidence_nodes": int(s.coincidence_mask.sum()), "coincidence_area": s.coincidence_area})


def infer_annulus_radii(f: fl.GridField) -> tuple[float, float]:
    """First and last sign change of h along the +x ray from the origin."""
    xmax = f.bounds[1]
    xs = np.arange(0.0, xmax, 0.25 * f.dx)
    vals, ok = fl.interpolate_cubic(f, xs, np.zeros_like(xs))
    roots = []
    for k in range(xs.size - 1):
        if not (ok[k] and ok[k + 1]):
            continue
        u, v = vals[k], vals[k + 1]
        if (u <= 0 < v) or (u > 0 >= v):
            roots.append(xs[k] + (xs[k + 1] - xs[k]) * u / (u - v))
    if len(roots) < 2:
        raise UsageError("could not locate two zero crossings along the +x axis; pass --radii")
    return float(roots[0]), float(roots[-1])


def _geometry(a, f: fl.GridField) -> fl.DomainGeometry:
    if a.domain == "disk":
        return fl.DomainGeometry.disk(a.radius)
    if a.domain == "annulus":
        r, R = a.radii if a.radii else infer_annulus_radii(f)
        return fl.DomainGeometry.annulus(r, R)
    xmin, xmax, ymin, ymax = f.bounds
    pad = 4 * max(f.dx, f.dy)
    return fl.DomainGeometry.rectangle(xmin + pad, xmax - pad, ymin + pad, ymax - pad)


def _battery(fields_, geom: fl.DomainGeometry, count: int, radius: float | None, seed: int):
    base = fields_[0]
    if radius is None:
        xmin, xmax, ymin, ymax = base.bounds
        radius = 0.1 * min(xmax - xmin, ymax - ymin)

    def accept(c, r):
        if not geom.contains_disk(c, r):
            return False
        for f in fields_[1:]:
            try:
                fl._support_nodes(f, fl.TestFunction(c, r))
            except fl.SupportError:
                return False
        return True

    return fl.bump_battery(base, count, radius, seed, accept=accept)


def cmd_verify(a) -> int:
    fs = [fl.read_field(p) for p in a.input]
    fs.sort(key=lambda f: -f.dx)  # coarse to fine
    checks = [c.strip() for c in a.checks.split(",") if c.strip()]
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise UsageError(f"unknown checks {bad}; choose from {list(CHECKS)}")
    geoms = [_geometry(a, f) for f in fs]
    dxs = [f.dx for f in fs]
    report = []
    needs_battery = any(c in ("divergence", "complex") for c in checks)
    bumps = _battery(fs, geoms[0], a.bumps, a.bump_radius, a.seed) if needs_battery else []
    for check in checks:
        if check == "divergence":
            per = [vf.divergence_battery(f, bumps) for f in fs]
        elif check == "complex":
            per = [vf.complex_battery(f, bumps) for f in fs]
        elif check == "pohozaev":
            per = [np.array([abs(vf.pohozaev_residual(f, g))]) for f, g in zip(fs, geoms)]
        else:
            ball = a.ball if a.ball else _default_ball(geoms[0])
            tvs = [vf.tv_second_derivatives(f, ball[:2], ball[2]) for f in fs]
            entry = vf.refinement_report("tv", [max(t.second.values()) for t in tvs], dxs).to_dict()
            entry["second"] = [t.second for t in tvs]
            entry["mu_abs"] = [t.mu_abs for t in tvs]
            entry["sup_h"] = [t.sup_h for t in tvs]
            entry["area"] = tvs[0].area
            entry["c_emp"] = max(max(t.excess() for t in tvs), 0.0)
            if len(tvs) >= 2:
                a_, b_ = entry["residuals"][-2:]
                entry["cauchy"] = abs(a_ - b_) / max(abs(b_), 1e-300)
            entry["ball"] = list(ball)
            report.append(entry)
            continue
        entry = vf.refinement_report(check, [float(p.max()) for p in per], dxs).to_dict()
        if check in ("divergence", "complex"):
            entry["per_bump"] = [p.tolist() for p in per]
        report.append(entry)
    text = _dumps(report)
    if a.report:
        _write(a.report, text)
    sys.stdout.write(text)
    return 0


def _default_ball(geom: fl.DomainGeometry) -> tuple[float, float, float]:
    p = geom.params
    if geom.kind == "disk":
        return (p["center"][0], p["center"][1], 0.5 * p["radius"])
    if geom.kind == "annulus":
        mid = 0.5 * (p["inner"] + p["outer"])
        return (p["center"][0] + mid, p["center"][1], 0.4 * (p["outer"] - p["inner"]))
    return (0.5 * (p["xmin"] + p["xmax"]), 0.5 * (p["ymin"] + p["ymax"]),
            0.25 * min(p["xmax"] - p["xmin"], p["ymax"] - p["ymin"]))


def curve_to_dict(curve: ms.CurveMeasure) -> dict:
    return {"components": [{"vertices": c.vertices.tolist(), "density": c.density.tolist(),
                            "sigma": int(c.sigma), "h": c.h_on_curve.tolist()} for c in curve.components]}


def cmd_measure(a) -> int:
    f = fl.read_field(a.input)
    res = ms.extract_measure(f, grad_threshold=a.grad_threshold)
    if a.emit_curve:
        _write(a.emit_curve, _dumps(curve_to_dict(res.curve)))
    summary = {"components": len(res.curve.components), "grad_threshold": res.grad_threshold,
               "flat_threshold": res.flat_threshold, "flat_nodes": int(res.flat_mask.sum()),
               "patches": len(res.patches)}
    if a.emit_report:
        xmin, xmax, ymin, ymax = f.bounds
        radius = a.bump_radius or 0.1 * min(xmax - xmin, ymax - ymin)
        bumps = fl.bump_battery(f, a.bumps, radius, a.seed)
        rep = ms.decomposition_check(f, res.curve, bumps, res.flat_mask)
        _write(a.emit_report, _dumps(rep.to_dict()))
        summary["worst_residual"] = rep.worst
    return _out(summary)


def cmd_field(a) -> int:
    if a.action == "info":
        return _out(fl.field_info(fl.read_field(a.input)))
    if a.action == "resample":
        if not a.output:
            raise UsageError("field resample needs --output")
        f = fl.read_field(a.input)
        xmin, xmax, ymin, ymax = f.bounds
        spec = fl.GridSpec(a.grid, a.grid, xmin, ymin, (xmax - xmin) / (a.grid - 1), (ymax - ymin) / (a.grid - 1))
        fl.write_field(fl.resample(f, spec), a.output)
        return _out({"grid": a.grid})
    if not a.other:
        raise UsageError("field diff needs --other")
    return _out(fl.field_diff(fl.read_field(a.input), fl.read_field(a.other)))


# ---------------------------------------------------------------------------
# plot data


def emit_plot_data(artifact) -> str:
    """Flat CSV for a curve, verification report, decomposition report or field."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(artifact, dict) and "components" in artifact and isinstance(artifact["components"], list):
        w.writerow(["component", "index", "x", "y", "density", "sigma", "h"])
        for k, c in enumerate(artifact["components"]):
            try:
                rows = zip(c["vertices"], c["density"], c["h"])
                sigma = c["sigma"]
            except (KeyError, TypeError) as exc:
                raise ValueError(f"malformed curve component: {exc}") from exc
            for i, ((x, y), d, hv) in enumerate(rows):
                w.writerow([k, i, repr(float(x)), repr(float(y)), repr(float(d)), int(sigma), repr(float(hv))])
    elif isinstance(artifact, list):
        w.writerow(["check", "grid", "dx", "residual", "order"])
        for entry in artifact:
            try:
                order = entry.get("order")
                for g, (dx, r) in enumerate(zip(entry["dx"], entry["residuals"])):
                    w.writerow([entry["check"], g, repr(float(dx)), repr(float(r)),
                                "" if order is None else repr(float(order))])
            except (KeyError, TypeError, AttributeError) as exc:
                raise ValueError(f"malformed report entry: {exc}") from exc
    elif isinstance(artifact, dict) and "pairings" in artifact:
        w.writerow(["bump", "cx", "cy", "radius", "pairing", "curve", "flat", "residual"])
        for k, b in enumerate(artifact.get("bumps", [])):
            w.writerow([k, repr(b["center"][0]), repr(b["center"][1]), repr(b["radius"]),
                        repr(artifact["pairings"][k]), repr(artifact["curve_parts"][k]),
                        repr(artifact["flat_parts"][k]), repr(artifact["residuals"][k])])
    elif isinstance(artifact, dict) and "values" in artifact:
        f = fl.field_from_json(json.dumps(artifact))
        w.writerow(["x", "y", "value"])
        X, Y = f.coords()
        for j, i in fl.iter_nodes(f):
            w.writerow([repr(float(X[j, i])), repr(float(Y[j, i])), repr(float(f.values[j, i]))])
    else:
        raise ValueError("unrecognised artifact")
    return buf.getvalue()


def cmd_csv(a) -> int:
    with open(a.input, encoding="utf-8") as fh:
        try:
            art = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{a.input} is not JSON: {exc}") from exc
    try:
        text = emit_plot_data(art)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if a.output:
        _write(a.output, text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glvort", description="Vorticity measures of stationary London-type fields.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("bessel", help="evaluate I_n or K_n from their series")
    q.add_argument("--kind", choices=("i", "k"), default="i")
    q.add_argument("--order", type=int, default=0)
    q.add_argument("--x", type=float, required=True)
    q.add_argument("--deriv", type=int, default=0)
    q.set_defaults(func=cmd_bessel)

    q = sub.add_parser("slab", help="h = exp(-|x|) on [-1, 1]^2")
    q.add_argument("--grid", type=_grid_size, default=256)
    q.add_argument("--emit")
    q.set_defaults(func=cmd_slab)

    q = sub.add_parser("annulus", help="match the annulus solution for inner radius r")
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--grid", type=_grid_size, default=256)
    q.add_argument("--emit")
    q.set_defaults(func=cmd_annulus)

    q = sub.add_parser("multiline", help="h = |I_n(rho) cos(n theta)| on [-1, 1]^2")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--grid", type=_grid_size, default=256)
    q.add_argument("--emit")
    q.set_defaults(func=cmd_multiline)

    q = sub.add_parser("obstacle", help="solve the obstacle problem by projected SOR")
    q.add_argument("--lambda", dest="lam", type=float, required=True)
    q.add_argument("--grid", type=_grid_size, default=256)
    q.add_argument("--domain", choices=("disk", "rect"), default="disk")
    q.add_argument("--tol", type=float, default=1e-9)
    q.add_argument("--max-iter", type=int, default=50000)
    q.add_argument("--emit")
    q.add_argument("--emit-mask")
    q.set_defaults(func=cmd_obstacle)

    q = sub.add_parser("verify", help="weak residual checks on field files")
    q.add_argument("--input", action="append", required=True, help="field JSON; repeat for a refinement study")
    q.add_argument("--domain", choices=("disk", "annulus", "rect"), required=True)
    q.add_argument("--radius", type=float, default=1.0, help="disk radius")
    q.add_argument("--radii", type=float, nargs=2, metavar=("INNER", "OUTER"))
    q.add_argument("--checks", default="divergence,complex,pohozaev")
    q.add_argument("--report")
    q.add_argument("--bumps", type=int, default=20)
    q.add_argument("--bump-radius", type=float)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--ball", type=float, nargs=3, metavar=("CX", "CY", "R"))
    q.set_defaults(func=cmd_verify)

    q = sub.add_parser("measure", help="extract the support curve and decomposition")
    q.add_argument("--input", required=True)
    q.add_argument("--emit-curve")
    q.add_argument("--emit-report")
    q.add_argument("--grad-threshold", type=float)
    q.add_argument("--bumps", type=int, default=12)
    q.add_argument("--bump-radius", type=float)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_measure)

    q = sub.add_parser("field", help="inspect, resample or compare field files")
    q.add_argument("action", choices=("info", "resample", "diff"))
    q.add_argument("--input", required=True)
    q.add_argument("--other")
    q.add_argument("--output")
    q.add_argument("--grid", type=_grid_size, default=128)
    q.set_defaults(func=cmd_field)

    q = sub.add_parser("csv", help="flatten a JSON artifact to CSV")
    q.add_argument("--input", required=True)
    q.add_argument("--output")
    q.set_defaults(func=cmd_csv)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (rd.NoMatch, ob.NonConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UsageError, OSError, fl.GridError, fl.SupportError, fl.GeometryMismatch, sf.BesselDomainError,
            vf.NotStarShaped, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
