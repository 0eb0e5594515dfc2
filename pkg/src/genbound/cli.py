"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 domain or validation error, 3 I/O error,
4-100 verification failures (3 + failure count, capped at 100).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from genbound import __version__
from genbound import bounds as bd
from genbound import experiments as ex
from genbound import mechanisms as mc
from genbound import repset as rs
from genbound import typespace as ts
from genbound.errors import CapacityError, GenboundError

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3
LOG2 = math.log(2.0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def failure_exit(failures: int) -> int:
    return EXIT_OK if failures == 0 else min(100, 3 + failures)


# ------------------------------------------------------------------------ helpers


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _eps(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"epsilon must be >= 0, got {text}")
    return v


def parse_eps_grid(text: str):
    """``lo:hi:points`` into a log-spaced grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected lo:hi:points")
    try:
        lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
        return ex.eps_grid(lo, hi, pts)
    except (ValueError, GenboundError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_prior(spec: str, m: int) -> ts.SourceDistribution:
    if spec == "uniform":
        return ts.SourceDistribution.uniform(m)
    obj = json.loads(Path(spec).read_text())
    probs = obj["probs"] if isinstance(obj, dict) else obj
    prior = ts.SourceDistribution(tuple(probs))
    if prior.m != m:
        raise ts.DimensionMismatchError(f"prior has {prior.m} symbols, mechanism has {m}")
    return prior


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    Path(out).write_text(text)


def _unit(args) -> tuple[float, str]:
    return (1.0 / LOG2, "bits") if args.bits else (1.0, "nats")


def _fmt(x: float | None, scale: float = 1.0) -> str:
    if x is None:
        return "n/a"
    if math.isinf(x):
        return "infinity"
    return f"{x * scale:.10g}"


def _report_rows(reports, eps, scale):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ex.CSV_HEADER)
    for fam, rep, _ in reports:
        w.writerow([
            repr(eps),
            fam,
            "" if rep is None else repr(rep.value * scale),
            "" if rep is None or rep.argmin_t is None else rep.argmin_t,
        ])
    return buf.getvalue()


# ----------------------------------------------------------------------- commands


def cmd_bound(args) -> int:
    q = bd.BoundQuery(args.n, args.m, args.eps, args.sigma)
    families = list(bd.BoundFamily) if args.family == "all" else [bd.BoundFamily(args.family)]
    reports = []
    for fam in families:
        try:
            reports.append((fam.value, bd.evaluate(fam, q, args.w_size), None))
        except GenboundError as exc:
            if len(families) == 1:
                raise
            reports.append((fam.value, None, str(exc)))
    scale, unit = _unit(args)

    if args.format == "json":
        def one(fam, rep, err):
            if rep is None:
                return {"family": fam, "error": err}
            d = rep.to_json()
            if args.bits:
                d["value_bits"] = rep.value * scale
            return d

        body = [one(*r) for r in reports]
        _emit(ex.dumps(body[0] if len(body) == 1 else body), args.out)
    elif args.format == "csv":
        _emit(_report_rows(reports, args.eps, scale), args.out)
    else:
        lines = []
        for fam, rep, err in reports:
            if rep is None:
                lines.append(f"{fam:<12} not applicable: {err}")
                continue
            t = "" if rep.argmin_t is None else f"  t={rep.argmin_t}"
            lines.append(f"{fam:<12} {_fmt(rep.value, scale)} {unit}{t}")
            for k, v in rep.terms.items():
                lines.append(f"    {k:<24} {_fmt(v, scale)}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.preset:
        n, m = ex.PRESETS[args.preset]
        n = args.n or n
        m = args.m or m
    elif args.n and args.m:
        n, m = args.n, args.m
    else:
        raise UsageError("give --preset or both --n and --m")
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    for f in families:
        try:
            bd.BoundFamily(f)
        except ValueError:
            raise UsageError(f"unknown family {f!r}") from None
    cells = ex.sweep_figure(n, m, args.eps_grid, families, jobs=args.jobs)
    scale, _ = _unit(args)
    if args.format == "json":
        body = [
            {"epsilon": c.epsilon, "family": c.family,
             "value_nats": c.value, "argmin_t": c.argmin_t}
            for c in cells
        ]
        _emit(ex.dumps({"n": n, "m": m, "rows": body}), args.out)
    else:
        _emit(ex.sweep_csv(cells, scale), args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    mech = mc.MechanismTable.load(args.mechanism)
    prior = _load_prior(args.prior, mech.m)
    mi, ml, eps, values, checks = ex.oracle_checks(mech, prior)
    scale, unit = _unit(args)
    if args.format == "json":
        body = {
            "n": mech.n,
            "m": mech.m,
            "audited_eps": eps,
            "exact_mi": mi,
            "exact_ml": ml,
            "bounds": values,
            "checks": [c.to_json() for c in checks],
            "unit": "nats",
        }
        _emit(ex.dumps(body), args.out)
    else:
        lines = [
            f"n={mech.n} m={mech.m} types={mech.num_types} outputs={mech.num_outputs}",
            f"epsilon      {_fmt(eps)}",
            f"mutual info  {_fmt(mi, scale)} {unit}",
            f"max leakage  {_fmt(ml, scale)} {unit}",
        ]
        for c in checks:
            if c.name == "mi<=ml":
                continue
            mark = "ok" if c.passed else "VIOLATED"
            lines.append(f"{c.name:<18} bound {_fmt(c.rhs, scale)}  slack {_fmt(c.slack, scale)}  {mark}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_grid(args) -> int:
    prior = _load_prior(args.prior, args.m) if args.prior else None
    g = rs.build_grid(args.n, args.m, args.t, args.variant, prior=prior)
    body = g.to_json()
    body["covering_radius"] = rs.covering_radius(g)
    body["covering_radius_bound"] = rs.covering_radius_bound(g)
    nb = rs.neighbor_distance_check(g)
    body["neighbor_distance"] = None if nb is None else nb.max_min_distance
    if args.format == "json":
        _emit(ex.dumps(body), args.out)
    else:
        lines = [
            f"variant={g.variant} n={g.n} m={g.m} t={g.t}",
            f"representatives={g.M} raw_cells={g.raw_cell_count} delta_t={g.delta_t}",
            f"covering radius {body['covering_radius']} (bound {body['covering_radius_bound']:.6g})",
            f"neighbor distance {'n/a' if nb is None else nb.max_min_distance}",
        ]
        lines += ["  " + ",".join(map(str, r.counts)) for r in g.representatives]
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    ranges = ex.BatteryRanges.full() if args.full else ex.BatteryRanges.quick()
    extra = [mc.MechanismTable.load(p) for p in args.mechanism]
    report = ex.run_verification_battery(ranges, seed=args.seed, tol=args.tolerance, extra_mechanisms=extra)
    if args.format == "human":
        lines = []
        for row in report["inequalities"]:
            mark = "PASS" if row["passed"] else "FAIL"
            if not row["asserted"]:
                mark = "INFO"
            lines.append(f"{mark} {row['inequality']}  n={row['count']}  worst slack {row['worst_slack']!r}")
        lines.append(f"{report['total'] - report['failures']}/{report['total']} inequalities pass")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(ex.dumps(report), args.out)
    return failure_exit(report["failures"])


def cmd_gen_exp(args) -> int:
    prior = _load_prior(args.prior, args.m)
    cfg = ex.ExperimentConfig(
        n=args.n,
        m=args.m,
        family=args.mechanism_family,
        param=args.param,
        prior=prior,
        trials=args.trials,
        seed=args.seed,
        etas=tuple(args.eta or (0.3,)),
    )
    if ts.type_count(cfg.n, cfg.m) > ts.DEFAULT_TYPE_CAP:
        raise CapacityError(f"type space for n={cfg.n}, m={cfg.m} exceeds the enumeration cap")
    report = ex.run_monte_carlo(cfg, jobs=args.jobs)
    _emit(ex.dumps(report.to_json()), args.out)
    return failure_exit(sum(1 for c in report.checks if c.asserted and not c.passed))


# ------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="genbound", description="Type-based information bounds for private learners.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, formats=("human", "json", "csv"), default="human"):
        sp.add_argument("--format", choices=formats, default=default)
        sp.add_argument("--out", help="output path (default: standard output)")
        return sp

    b = common(sub.add_parser("bound", help="evaluate one bound family or all of them"))
    b.add_argument("--n", type=_positive_int, required=True)
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--eps", type=_eps, default=0.0)
    b.add_argument("--sigma", type=float, default=0.5)
    b.add_argument("--family", default="all", choices=["all"] + [f.value for f in bd.BoundFamily])
    b.add_argument("--w-size", type=_positive_int, help="output alphabet size for ml_baseline")
    b.add_argument("--bits", action="store_true", help="report values in bits")
    b.set_defaults(func=cmd_bound)

    s = common(sub.add_parser("sweep", help="bound values over an epsilon grid (CSV)"), ("csv", "json"), "csv")
    s.add_argument("--preset", choices=sorted(ex.PRESETS))
    s.add_argument("--n", type=_positive_int)
    s.add_argument("--m", type=int)
    s.add_argument("--eps-grid", type=parse_eps_grid, default=ex.eps_grid(), metavar="LO:HI:POINTS")
    s.add_argument("--families", default=",".join(ex.SWEEP_FAMILIES))
    s.add_argument("--bits", action="store_true", help="report values in bits")
    s.add_argument("--jobs", type=_positive_int, default=None)
    s.set_defaults(func=cmd_sweep)

    a = common(sub.add_parser("audit", help="audit a mechanism file"), ("human", "json"))
    a.add_argument("--mechanism", required=True)
    a.add_argument("--prior", default="uniform", help="'uniform' or a JSON file of probabilities")
    a.add_argument("--bits", action="store_true", help="report values in bits")
    a.set_defaults(func=cmd_audit)

    g = common(sub.add_parser("grid", help="build and check a representative grid"), ("human", "json"))
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--t", type=_positive_int, required=True)
    g.add_argument("--variant", choices=[v.value for v in rs.GridVariant], default="full_cube")
    g.add_argument("--prior", help="JSON file of probabilities (typical variant)")
    g.set_defaults(func=cmd_grid)

    v = common(sub.add_parser("verify", help="run the verification battery"), ("json", "human"), "json")
    mode = v.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true")
    mode.add_argument("--full", action="store_true")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--mechanism", action="append", default=[], help="extra mechanism file (repeatable)")
    v.add_argument("--tolerance", type=float, default=ex.DEFAULT_TOL, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("gen-exp", help="Monte Carlo generalization experiment (JSON)")
    e.add_argument("--out")
    e.add_argument("--n", type=_positive_int, required=True)
    e.add_argument("--m", type=int, required=True)
    e.add_argument("--mechanism-family", choices=mc.MECHANISM_FAMILIES, default="rr")
    e.add_argument("--param", type=float)
    e.add_argument("--trials", type=_positive_int, default=10_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--eta", type=float, action="append", help="tail threshold (repeatable)")
    e.add_argument("--prior", default="uniform")
    e.add_argument("--jobs", type=_positive_int, default=None)
    e.set_defaults(func=cmd_gen_exp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", "absent") is None:
        try:
            args.jobs = ex.default_jobs()
        except ValueError:
            parser.error("GENBOUND_JOBS must be an integer")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (GenboundError, ValueError, KeyError) as exc:
        print(f"genbound: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"genbound: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
