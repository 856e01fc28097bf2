"""Command-line entry point: ``covertree <command> ...``.

Exit status is 0 when every hard check passed, 1 when some check failed (the failure
list is printed as JSON on stderr) and 2 for usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import graph as gmod
from .cycles import PeriodicZOperator, monodromy_bands, verify_cycle_bounds
from .graph import GraphError, PotentialGraph, load_graph, n_lift, radii
from .green import BandStructure, band_scan, boundary_zeta, combes_thomas_check, default_ladder
from .metrics import delocalization_params
from .verify import classify_and_report, full_spectrum, kernel_mass

log = logging.getLogger("covertree")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def workers_default() -> int:
    env = os.environ.get("COVERTREE_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise UsageError(f"COVERTREE_WORKERS must be an integer, got {env!r}") from exc
        if n < 1:
            raise UsageError("COVERTREE_WORKERS must be >= 1")
        return n
    return os.cpu_count() or 1


GENERATORS = {
    "complete": lambda a: gmod.complete_graph(int(a[0])),
    "cycle": lambda a: gmod.cycle_graph(int(a[0])),
    "path": lambda a: gmod.path_graph(int(a[0])),
    "wheel": lambda a: gmod.wheel_graph(int(a[0])),
    "petersen": lambda a: gmod.petersen_graph(),
    "tutte-coxeter": lambda a: gmod.tutte_coxeter_graph(),
    "localized": lambda a: gmod.localized_example(int(a[0])),
}


def resolve_graph(spec: str) -> PotentialGraph:
    """A JSON path, or ``gen:<name>[:arg...]`` for a built-in generator."""
    if spec.startswith("gen:"):
        name, *args = spec[4:].split(":")
        if name not in GENERATORS:
            raise UsageError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
        try:
            return GENERATORS[name](args)
        except (IndexError, ValueError) as exc:
            raise UsageError(f"bad generator spec {spec!r}: {exc}") from exc
    p = Path(spec)
    if not p.exists():
        raise UsageError(f"graph file not found: {spec}")
    try:
        return load_graph(str(p))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{spec}: invalid JSON ({exc})") from exc


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def _schedule(args) -> np.ndarray:
    return default_ladder(eta_min=args.eta_min)


def _bands_for(g: PotentialGraph, args) -> BandStructure:
    if getattr(args, "bands", None):
        try:
            return BandStructure.from_json_obj(json.loads(Path(args.bands).read_text()))
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read band file {args.bands}: {exc}") from exc
    return band_scan(g, schedule=_schedule(args), grid_step=args.grid_step, workers=args.workers)


# -- commands -------------------------------------------------------------------


def cmd_bands(args) -> int:
    g = resolve_graph(args.graph)
    bs = band_scan(g, schedule=_schedule(args), grid_step=args.grid_step, workers=args.workers)
    _dump(bs.to_json_obj(), args.out)
    return 0


def cmd_metrics(args) -> int:
    g = resolve_graph(args.graph)
    zt = boundary_zeta(g, args.lam, _schedule(args))
    if zt.classification != "bulk":
        _dump({"lambda": args.lam, "class": zt.classification, "note": "metrics are defined for bulk energies"}, args.out)
        return 1
    s_list = args.s or [2.0]
    out = delocalization_params(zt, s_list).to_json_obj()
    out["class"] = "bulk"
    ell = radii(g).ell_G
    rows = []
    for n in range(1, min(ell, args.kernel_n_max) + 1):
        masses = [kernel_mass(zt, b, n, ell_G=ell) for b in range(g.n_darts)]
        worst = max(masses, key=lambda k: k.mass)
        rows.append({"n": n, "mass": worst.mass, "bound": worst.bound, "passed": all(k.passed for k in masses)})
    out["kernel_mass"] = rows
    out["ell_G"] = ell
    _dump(out, args.out)
    flags_ok = all(v != "violated" for v in out["flags"].values())
    return 0 if flags_ok and all(r["passed"] for r in rows) else 1


def cmd_verify(args) -> int:
    g = resolve_graph(args.graph)
    bs = _bands_for(g, args)
    pairs = full_spectrum(g)
    rep = classify_and_report(g, pairs, bs, radii(g), args.p, rotations=args.rotations, seed=args.seed)
    obj = rep.to_json_obj()
    obj["bands"] = bs.to_json_obj()
    _dump(obj, args.report)
    if args.summary:
        Path(args.summary).write_text(rep.summary_csv())
    if not rep.passed:
        sys.stderr.write(json.dumps({"failures": rep.failures}, sort_keys=True, default=_json_default) + "\n")
        return 1
    return 0


def cmd_cycle(args) -> int:
    rep = verify_cycle_bounds(args.n, args.w, args.period, rotations=args.rotations, seed=args.seed)
    obj = rep.to_json_obj()
    if rep.m is not None or len(args.w) == args.n:
        period = args.w[: rep.m] if rep.m else args.w
        obj["monodromy"] = {"bands": [{"lo": lo, "hi": hi} for lo, hi in monodromy_bands(PeriodicZOperator(period))]}
    _dump(obj, args.report)
    if not rep.passed:
        fails = [{"lambda": c.lam, "kind": c.kind, "N_sup2": c.value, "bound": c.bound, "support": c.support}
                 for c in rep.failures]
        sys.stderr.write(json.dumps({"failures": fails}, sort_keys=True) + "\n")
        return 1
    return 0


def cmd_lift_sweep(args) -> int:
    base = resolve_graph(args.base)
    bs = band_scan(base, schedule=_schedule(args), grid_step=args.grid_step, workers=args.workers)
    rows = []
    ok = True
    for N in args.n:
        lift = n_lift(base, N, seed=args.seed)
        g = lift.lift
        rad = radii(g)
        rep = classify_and_report(g, full_spectrum(g), bs, rad, args.p, zeta_graph=base,
                                  rotations=args.rotations, seed=args.seed)
        bulk = rep.by_class("bulk")
        sup_checks = [p.check("sup_bulk") for p in bulk]
        bounds = [c.bound for c in sup_checks if c is not None and not c.skipped]
        rows.append({
            "N": N,
            "n": g.n,
            "connected": g.connected,
            "ell_G": rad.ell_G,
            "max_sup": max((p.sup_norm for p in rep.pairs), default=float("nan")),
            "max_sup_bulk": max((p.sup_norm for p in bulk), default=float("nan")),
            "bound_bulk": min(bounds) if bounds else float("nan"),
            "min_support": min(p.support for p in rep.pairs),
            "failures": len(rep.failures),
        })
        ok &= rep.passed
    fields = list(rows[0]) if rows else ["N"]
    dest = open(args.out, "w", newline="") if args.out not in (None, "-") else sys.stdout
    try:
        w = csv.DictWriter(dest, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if dest is not sys.stdout:
            dest.close()
    if args.json:
        _dump({"kind": "lift-sweep", "rows": rows}, args.json)
    return 0 if ok else 1


def cmd_ct_check(args) -> int:
    g = resolve_graph(args.graph)
    zt = boundary_zeta(g, args.lam, _schedule(args))
    if zt.classification != "gap":
        raise UsageError(f"lambda={args.lam} is classified {zt.classification!r}, not gap")
    delta = args.delta
    if delta is None:
        delta = _bands_for(g, args).distance_to_spectrum(args.lam)
    rep = combes_thomas_check(g, args.lam, delta, args.n_max, zt=zt)
    _dump(rep.to_json_obj(), args.out)
    return 0 if rep.passed else 1


PLOT_KINDS = {
    "supnorm-vs-ell": ("sup-norm against ell_G with the bulk bound 8 D z^-4 / sqrt(ell_G)", ("ell_G", "max_sup", "bound")),
    "ct-decay": ("cover sphere mass S_n against 4 delta^-2 (1 + delta/2D)^(-2n)", ("n", "S_n", "rhs")),
    "kernel-mass": ("kernel mass against 32 z^-4 / n", ("n", "mass", "bound")),
    "margin-vs-lambda": ("sup-norm margin (bound - sup) against eigenvalue", ("lambda", "margin", "class")),
}


def plot_rows(report: dict, kind: str) -> list[tuple]:
    if kind == "supnorm-vs-ell":
        if report.get("kind") == "lift-sweep":
            return [(r["ell_G"], r["max_sup_bulk"], r["bound_bulk"]) for r in report["rows"]]
        if "pairs" in report:
            sups = [p["sup"] for p in report["pairs"] if p["class"] == "bulk"]
            bnds = [c["bound"] for p in report["pairs"] for c in p["checks"]
                    if c["name"] == "sup_bulk" and "skipped" not in c]
            return [(report["ell_G"], max(sups, default=float("nan")), min(bnds, default=float("nan")))]
    elif kind == "ct-decay" and "rows" in report and "delta" in report:
        return [(r["n"], r["S_n"], r["rhs"]) for r in report["rows"]]
    elif kind == "kernel-mass" and "kernel_mass" in report:
        return [(r["n"], r["mass"], r["bound"]) for r in report["kernel_mass"]]
    elif kind == "margin-vs-lambda" and "pairs" in report:
        out = []
        for p in report["pairs"]:
            c = next((c for c in p["checks"] if c["name"] in ("sup_bulk", "sup_gap") and "skipped" not in c), None)
            if c is not None:
                out.append((p["lambda"], c["margin"], p["class"]))
        return out
    raise UsageError(f"report does not contain data for kind {kind!r}")


def emit_plotdata(report: dict, kind: str) -> str:
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    title, cols = PLOT_KINDS[kind]
    lines = [f"# {title}", "# " + " ".join(cols)]
    for row in plot_rows(report, kind):
        lines.append(" ".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def cmd_emit_plot(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read report {args.report}: {exc}") from exc
    text = emit_plotdata(report, args.kind)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covertree", description="Cover-tree Green functions and eigenvector delocalization checks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=True):
        if graph:
            sp.add_argument("--graph", required=True, help="graph JSON file or gen:<name>[:arg]")
        sp.add_argument("--grid-step", type=_positive, default=0.005)
        sp.add_argument("--eta-min", type=_positive, default=1e-9)
        sp.add_argument("--workers", type=int, default=None)

    sp = sub.add_parser("bands", help="band structure of the universal cover")
    common(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bands)

    sp = sub.add_parser("metrics", help="delocalization parameters at one energy")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--s", type=_floats, default=None)
    sp.add_argument("--kernel-n-max", type=int, default=10)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("verify", help="check every eigenpair against the delocalization bounds")
    common(sp)
    sp.add_argument("--bands", help="reuse a band file written by 'bands'")
    sp.add_argument("--p", type=_floats, default=[5.0, 6.0, 8.0])
    sp.add_argument("--report")
    sp.add_argument("--summary", help="CSV, one row per eigenpair")
    sp.add_argument("--rotations", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("cycle", help="sup-norm bounds on an N-cycle")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--w", type=_floats, default=[0.0], help="one period of the potential")
    sp.add_argument("--period", type=int, default=None)
    sp.add_argument("--rotations", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_cycle)

    sp = sub.add_parser("lift-sweep", help="verify random N-lifts of a base graph")
    sp.add_argument("--base", required=True)
    sp.add_argument("--n", type=_ints, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--p", type=_floats, default=[5.0, 6.0, 8.0])
    sp.add_argument("--rotations", type=int, default=20)
    sp.add_argument("--grid-step", type=_positive, default=0.005)
    sp.add_argument("--eta-min", type=_positive, default=1e-9)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out", help="CSV destination (default stdout)")
    sp.add_argument("--json", help="also write the rows as JSON (input for emit-plot)")
    sp.set_defaults(func=cmd_lift_sweep)

    sp = sub.add_parser("ct-check", help="resolvent decay on cover spheres at a gap energy")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--delta", type=_positive, default=None)
    sp.add_argument("--bands")
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_ct_check)

    sp = sub.add_parser("emit-plot", help="tabular plot data from a JSON report")
    sp.add_argument("--report", required=True)
    sp.add_argument("--kind", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_emit_plot)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if hasattr(args, "workers"):
            if args.workers is None:
                args.workers = workers_default()
            if args.workers < 1:
                raise UsageError("--workers must be >= 1")
        return args.func(args)
    except (UsageError, GraphError) as exc:
        sys.stderr.write(f"covertree: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
