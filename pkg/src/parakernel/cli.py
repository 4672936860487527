"""Command-line entry point: ``parakernel {kernel,verify,scan,solve,compare}``.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 numerical failure.  Every output file is written atomically.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (DegenerateDenominator, InvalidPath, ParakernelError,
                     QuadratureNotConverged, UnboundedRatio)
from .reports import SweepReport, atomic_write, canonical_json, config_hash, rows_to_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _path_from(spec, dim=None, seed=0):
    """Coefficient path from a file name, an inline dict, or ``{"multiscale": ...}``."""
    from .certify import multiscale_path
    from .paths import constant_path, load_path
    if spec is None:
        if dim is None:
            raise UsageError("a coefficient path is required (--path)")
        return constant_path(np.eye(dim), span=(0.0, 1.0))
    if isinstance(spec, str):
        spec = _read_json(spec)
    if "multiscale" in spec:
        opts = dict(spec["multiscale"])
        return multiscale_path(int(opts.pop("dim", dim or 2)), seed=int(opts.pop("seed", seed)),
                               **opts)
    return load_path(spec)


# ---------------------------------------------------------------------------
# kernel

def cmd_kernel(args):
    from .halfspace import HalfspaceKernel, load_shear
    from .kernels import KernelQuery, _check_order, gamma_derivative
    q = _read_json(args.query_file)
    path = _path_from(args.path or q.get("path"))
    queries = q["queries"] if isinstance(q, dict) else q
    n = path.dim
    shear = load_shear(args.gamma) if args.gamma else None
    handle = None
    if args.type != "whole":
        kpath = shear.transform_path(path) if shear is not None else path
        opts = {"mode": args.mode, "max_order": args.max_order}
        if args.tol:
            opts["tol"] = args.tol
        handle = HalfspaceKernel(kpath, **opts)
    rows = []
    for i, item in enumerate(queries):
        x = np.asarray(item["x"], dtype=float)
        y = np.asarray(item["y"], dtype=float)
        alpha = tuple(item.get("alpha", (0,) * n))
        beta = tuple(item.get("beta", (0,) * n))
        if len(x) != n or len(y) != n:
            raise UsageError(f"query {i}: points must have {n} coordinates")
        t, s = float(item["t"]), float(item["s"])
        _check_order(sum(alpha) + sum(beta), args.max_order)
        err = 0.0
        if args.type == "whole":
            val = gamma_derivative(KernelQuery(alpha, beta, x, y, t, s), path, args.max_order)
        else:
            if shear is not None:
                if sum(alpha) + sum(beta) > 0:
                    raise UsageError("derivatives with an oblique field are not supported; "
                                     "query the reduced kernel instead")
                x, y = shear.forward(x), shear.forward(y)
            fn = handle.dirichlet if args.type == "dirichlet" else handle.neumann
            val = fn(x, y, t, s, alpha, beta)
            err = float(getattr(handle._oracle, "last_error", 0.0)) if handle._oracle else \
                float(handle.last_tail)
        rows.append({"index": i, "value": float(val), "error": err})
    text = rows_to_csv(["index", "value", "error"], rows)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def _verify_templates(cfg, bound, n):
    from .certify import standard_template, templates_upto
    eps = float(cfg.get("epsilon", 0.1))
    if "templates" in cfg:
        out = []
        for t in cfg["templates"]:
            tpl = standard_template(bound, t["alpha"], t["beta"], eps)
            for key in ("time_power", "rx_power", "ry_power"):
                if key in t:
                    from dataclasses import replace
                    tpl = replace(tpl, **{key: float(t[key])})
            for which in t.get("inflate", []):
                tpl = tpl.inflated(which)
            out.append(tpl)
        return out
    order = int(cfg.get("order", 2 if bound != "gamma" else 4))
    tpls = templates_upto(bound, n, order, eps)
    for which in cfg.get("inflate", []):
        tpls = [t.inflated(which) for t in tpls]
    return tpls


def cmd_verify(args):
    from .certify import ProbeSpec, certify_bound
    from .plots import plot_certification
    cfg = _read_json(args.config) if args.config else {}
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    n = int(cfg.get("dim", 2))
    path_spec = args.path or cfg.get("path") or {"multiscale": {"dim": n, "seed": seed}}
    path = _path_from(path_spec, n, seed)
    n = path.dim
    probe = ProbeSpec(**{k: tuple(v) if isinstance(v, list) else v
                         for k, v in cfg.get("probe", {}).items()})
    outdir = Path(args.out_dir)
    summary_rows = []
    failed = []
    for k, tpl in enumerate(_verify_templates(cfg, args.bound, n)):
        rep = certify_bound(args.bound, tpl, probe, path)
        rep.provenance.update({"seed": seed, "version": __version__,
                               "config": {"bound": args.bound, "config": cfg, "seed": seed,
                                          "path": path.to_dict()}})
        if not rep.passed:
            w = rep.summary["worst"]
            exc = UnboundedRatio(w["direction"], w["edge"], w["slope"])
            rep.flags.append({"error": "UnboundedRatio", "direction": w["direction"],
                              "edge": w["edge"], "slope": w["slope"], "message": str(exc)})
            failed.append(k)
        stem = outdir / f"{args.bound}_{k:03d}"
        rep.write(stem)
        if not args.no_figures:
            plot_certification(rep, stem)
        summary_rows.append({"index": k, "alpha": "-".join(map(str, tpl.alpha)),
                             "beta": "-".join(map(str, tpl.beta)),
                             "time_power": tpl.time_power, "rx_power": tpl.rx_power,
                             "ry_power": tpl.ry_power, "verdict": rep.verdict,
                             "C": rep.summary["C"], "sigma": rep.summary["sigma"],
                             "worst_direction": rep.summary["worst"]["direction"],
                             "worst_edge": rep.summary["worst"]["edge"],
                             "worst_slope": rep.summary["worst"]["slope"]})
    cols = ["index", "alpha", "beta", "time_power", "rx_power", "ry_power", "verdict", "C",
            "sigma", "worst_direction", "worst_edge", "worst_slope"]
    report = SweepReport("verify", cols, summary_rows, "FAIL" if failed else "PASS",
                         {"failed": failed, "n_templates": len(summary_rows)},
                         {"config": {"bound": args.bound, "config": cfg, "seed": seed},
                          "seed": seed, "path": path.describe(), "grid": probe.to_dict(),
                          "error_bar_method": "none (exact kernels; edge-slope test)"})
    report.write(outdir / "report")
    for k in failed:
        r = summary_rows[k]
        print(f"UnboundedRatio: template {k} (alpha={r['alpha']}, beta={r['beta']}) grows "
              f"along {r['worst_direction']} at the {r['worst_edge']} edge "
              f"(slope {r['worst_slope']:.3g})", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# scan

def cmd_scan(args):
    from .plots import plot_sweep, plot_trend
    from .sweeps import SweepGrid, coercive_sweep, wall_trend
    cfg = _read_json(args.config) if args.config else {}
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    n = int(args.dim or cfg.get("dim", 2))
    path = _path_from(args.path or cfg.get("path"), n, seed)
    grid = SweepGrid(**cfg.get("grid", {}))
    outdir = Path(args.out_dir)
    if args.steps < 1:
        raise UsageError("--steps must be positive")
    mu = np.linspace(args.mu_from, args.mu_to, args.steps) if args.steps > 1 else \
        np.array([args.mu_from])
    pq = [(args.p, args.q)]
    if args.wall_trend:
        rep = wall_trend(path, args.p, args.q, mu=args.mu_from,
                         nesting={"Lpq": "time-outer", "tilde": "space-outer"}.get(
                             args.scale, "time-outer"))
        rep.provenance.update({"seed": seed})
        rep.write(outdir / "trend")
        if not args.no_figures:
            plot_trend(rep, outdir / "trend")
        return EXIT_OK
    rep = coercive_sweep(path, args.scale, args.p, args.q, [float(m) for m in mu],
                         grid=grid, refine=not args.no_refine, seed=seed, pq_list=pq)
    rep.write(outdir / "sweep")
    if not args.no_figures:
        plot_sweep(rep, outdir / "sweep")
    for f in rep.flags:
        print(f"sweep: {f}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# solve

def _load_source(spec):
    from .fields import SampledField
    from .packets import Packet, PacketSource
    p = Path(spec)
    if p.suffix == ".json" and not Path(str(p) + ".json").exists():
        data = _read_json(p)
        packets = [Packet(tuple(d["center"]), tuple(d["cov"]), tuple(d["window"]),
                          float(d.get("amp", 1.0)),
                          None if d.get("wavevector") is None else tuple(d["wavevector"]),
                          float(d.get("phase", 0.0))) for d in data["packets"]]
        return PacketSource(packets, bool(data.get("neumann", False)))
    try:
        return SampledField.load(p)
    except FileNotFoundError:
        raise UsageError(f"source not found: {spec} (needs a .json sidecar)") from None


def cmd_solve(args):
    from .cylinder import (graded_box_axes, load_domain, load_oblique, solve_ivbp,
                           weighted_coercivity_check, conserved_mass)
    from .fields import SampledField
    from .plots import plot_field
    chart = load_domain(_read_json(args.domain))
    path = _path_from(args.path, chart.dim)
    if path.dim != chart.dim:
        raise UsageError("path and domain dimensions differ")
    oblique = load_oblique(_read_json(args.gamma) if args.gamma else None)
    source = _load_source(args.f) if args.f else None
    if isinstance(source, SampledField):
        axes = list(source.axes)
        times = source.times
        dt = float(times[1] - times[0]) if len(times) > 1 else args.dt
        if len(times) > 2 and np.ptp(np.diff(times)) > 1e-12 * dt:
            raise UsageError("source times must be uniform (they set the time step)")
        t_final, t_start = float(times[-1]), float(times[0])
    else:
        axes = graded_box_axes(chart, args.h_wall, args.h_max)
        dt, t_final, t_start = args.dt, args.t_final, 0.0
    if dt is None or dt <= 0:
        raise UsageError("a positive time step is required")
    result = solve_ivbp(path, chart, oblique, None, source, axes, dt, t_final, t_start)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.u.save(out)
    report = {"version": __version__, "domain": chart.to_dict(), "path": path.describe(),
              "oblique": oblique.to_dict(), "dt": result.dt, "steps": len(result.residuals),
              "grid": {"shape": [len(a) for a in axes]},
              "max_residual": max(result.residuals), "mass": conserved_mass(result).tolist(),
              "error_bar_method": "none (single grid; refine to estimate)"}
    if args.norm:
        report["weighted_check"] = weighted_coercivity_check(result, _read_json(args.norm))
    cfg = {"domain": chart.to_dict(), "path": path.to_dict(), "oblique": oblique.to_dict(),
           "dt": result.dt, "t_final": t_final, "h_wall": args.h_wall, "h_max": args.h_max,
           "source": args.f}
    report["config_hash"] = config_hash(cfg)
    if args.report:
        atomic_write(args.report, canonical_json(report) + "\n")
    if not args.no_figures:
        plot_field(result.u, out.with_name(out.stem + "_final"), chart)
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare

def cmd_compare(args):
    from .sweeps import mollify_and_compare
    a = SweepReport.read(Path(args.a).with_suffix(""))
    b = SweepReport.read(Path(args.b).with_suffix(""))
    err = args.error
    if err is None:
        for c in ("error_fine", "error_coarse", "error"):
            if c in a.columns:
                err = c
                break
    cmp = mollify_and_compare(a, b, args.value, err)
    cols = list(cmp.rows[0].keys()) if cmp.rows else ["a", "b", "relative", "drift"]
    text = rows_to_csv(cols, cmp.rows)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"compare: {cmp.drifted} drifting rows, max relative difference "
          f"{cmp.max_relative:.3g}", file=sys.stderr)
    return EXIT_FAIL if cmp.drift else EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="parakernel", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="evaluate kernels at query points")
    k.add_argument("--type", choices=["whole", "dirichlet", "neumann"], default="whole")
    k.add_argument("--mode", choices=["auto", "image", "integral", "oracle"], default="auto")
    k.add_argument("--query-file", required=True)
    k.add_argument("--path", help="coefficient path JSON (else taken from the query file)")
    k.add_argument("--gamma", help="JSON with the constant oblique field")
    k.add_argument("--max-order", type=int, default=4)
    k.add_argument("--tol", type=float)
    k.add_argument("--out")
    k.set_defaults(func=cmd_kernel)

    v = sub.add_parser("verify", help="certify pointwise kernel bounds")
    v.add_argument("--bound", choices=["gamma", "dirichlet", "neumann", "ds-neumann"],
                   required=True)
    v.add_argument("--config")
    v.add_argument("--path")
    v.add_argument("--seed", type=int)
    v.add_argument("--out-dir", default="verify_out")
    v.add_argument("--no-figures", action="store_true")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("scan", help="coercive-ratio sweep over the weight exponent")
    s.add_argument("--scale", choices=["Lpq", "tilde", "both"], default="both")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--q", type=float, default=2.0)
    s.add_argument("--mu-from", type=float, default=0.0)
    s.add_argument("--mu-to", type=float, default=0.0)
    s.add_argument("--steps", type=int, default=1)
    s.add_argument("--dim", type=int)
    s.add_argument("--path")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--no-refine", action="store_true")
    s.add_argument("--wall-trend", action="store_true",
                   help="run the wall-concentration trend at --mu-from instead")
    s.add_argument("--out-dir", default="scan_out")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_scan)

    o = sub.add_parser("solve", help="finite-difference solve on a cylinder")
    o.add_argument("--domain", required=True)
    o.add_argument("--path", required=True)
    o.add_argument("--gamma")
    o.add_argument("--f", help="source: SampledField (.bin/.csv + sidecar) or packet JSON")
    o.add_argument("--out", required=True)
    o.add_argument("--report")
    o.add_argument("--norm", help="weighted norm spec JSON for the coercivity check")
    o.add_argument("--dt", type=float, default=0.01)
    o.add_argument("--t-final", type=float, default=1.0)
    o.add_argument("--h-wall", type=float, default=0.01)
    o.add_argument("--h-max", type=float, default=0.1)
    o.add_argument("--no-figures", action="store_true")
    o.set_defaults(func=cmd_solve)

    c = sub.add_parser("compare", help="compare two reports row by row")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--value")
    c.add_argument("--error")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"parakernel: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnboundedRatio as exc:
        print(f"parakernel: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (QuadratureNotConverged, DegenerateDenominator, ArithmeticError) as exc:
        print(f"parakernel: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"parakernel: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidPath, ParakernelError, ValueError, KeyError, TypeError) as exc:
        print(f"parakernel: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
