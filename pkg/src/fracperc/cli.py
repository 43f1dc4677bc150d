"""Command line interface.

Exit codes: 0 all checks passed (or nothing to check), 1 a comparator or
acceptance criterion failed, 2 bad arguments or unparseable inputs.
Stochastic commands require an explicit --seed; there is no wall-clock
fallback, runs are reproducible or they do not start.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import __version__
from .acceptance import CRITERIA, reports_json, run_all
from .bounds import bound_record
from .contour import blocking_certificate, min_height_sampled
from .crossing import crossing_probability, crossing_witness, has_crossing
from .harness import Comparator, Experiment, run
from .lattice import GridConfig, retained_fraction, sample_retained_bits, sample_vacancies
from .render import RenderSpec, render_ppm
from .schedule import ScheduleError, parse_schedule
from .treeflow import TreeParseError, check_truncation_bound, load_tree, parse_zdist, verify_flow_sandwich


def _emit(args, payload: dict) -> None:
    if args.format == "csv":
        flat = _flatten(payload)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(flat.keys())
        writer.writerow(flat.values())
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _flatten(obj, prefix="") -> dict:
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}." if prefix else f"{k}."))
        return {k.rstrip("."): v for k, v in out.items()} if not prefix else out
    if isinstance(obj, list):
        return {prefix.rstrip("."): json.dumps(obj)}
    return {prefix.rstrip("."): obj}


def _common(sub, seed_required=True):
    if seed_required:
        sub.add_argument("--seed", type=int, required=True, help="master seed (required)")
    sub.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on this)")
    sub.add_argument("--out", help="write the summary here instead of stdout")
    sub.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fracperc",
        description="Fractal percolation: sampling, crossings, contours, and bound checks.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = ap.add_subparsers(dest="command", required=True)

    p = subs.add_parser("area", help="estimate the mean retained area fraction")
    _common(p)
    p.add_argument("--n", "--N", dest="n", type=int, default=2)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--trials", type=int, default=200)

    p = subs.add_parser("crossing", help="estimate the directed crossing probability")
    _common(p)
    p.add_argument("--n", "--N", dest="n", type=int, default=2)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--moves", choices=("udr", "ur"), default="udr")

    p = subs.add_parser("contour", help="estimate the mean lowest-contour height against its bound")
    _common(p)
    p.add_argument("--n", "--N", dest="n", type=int, default=2)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--span", choices=("strip", "full", "unit"), default="strip",
                   help="'unit' is an alias for 'full'")

    p = subs.add_parser("bound", help="print closed-form bounds (deterministic)")
    p.add_argument("--n", "--N", dest="n", type=int, default=2)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--interval", choices=("strip", "full", "unit"), default="strip",
                   help="'unit' is an alias for 'full'")
    p.add_argument("--kind", choices=("contour", "crossing", "both"), default="both")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = subs.add_parser("blocking", help="search one sample for a blocking certificate")
    _common(p)
    p.add_argument("--n", "--N", dest="n", type=int, default=2)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--band-index", type=int, required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--trial", type=int, default=0)

    p = subs.add_parser("treeflow", help="check the flow sandwich on a tree file")
    _common(p)
    p.add_argument("--tree", required=True, help="JSON tree file")
    p.add_argument("--trials", type=int, default=20000)

    p = subs.add_parser("lemma", help="check the exponential truncation bound")
    _common(p)
    p.add_argument("--zdist", required=True, help="point:Z | exp:MEAN | uniform:A,B | empirical:V1,V2,...")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--trials", type=int, default=100000)

    p = subs.add_parser("render", help="render one sample to a binary PPM")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", "--N", dest="n", type=int, default=2)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--cell-px", type=int, default=4)
    p.add_argument("--overlay", choices=("none", "vacancies", "crossing"), default="vacancies")
    p.add_argument("--out", required=True)

    p = subs.add_parser("verify-all", help="run the acceptance suite")
    _common(p)
    p.add_argument("--quick", action="store_true", help="reduced trial counts")
    p.add_argument("--only", help="comma-separated criterion keys")
    p.add_argument("--report", help="append one JSON line per criterion here")
    return ap


def _cmd_area(args) -> int:
    sched = parse_schedule(args.schedule)
    cfg = GridConfig.unit_square(args.n, args.r)
    rep = run(
        Experiment(
            "area",
            lambda s, t: retained_fraction(cfg, sched, s, t),
            args.trials,
            seed=args.seed,
            params={"n": args.n, "r": args.r, "schedule": sched.spec_string()},
        ),
        threads=args.threads,
    )
    _emit(args, rep.to_json_dict())
    return 0


def _cmd_crossing(args) -> int:
    sched = parse_schedule(args.schedule)
    cfg = GridConfig.unit_square(args.n, args.r)
    est = crossing_probability(cfg, sched, args.trials, args.seed, moves=args.moves)
    _emit(args, est.to_json_dict())
    return 0


def _cmd_contour(args) -> int:
    from .bounds import contour_height_bound

    sched = parse_schedule(args.schedule)
    n, r, k = args.n, args.r, args.k
    span = "full" if args.span == "unit" else args.span
    width = n ** (r - k) if span == "strip" else n ** r
    scale = float(n) ** -r
    bound = contour_height_bound(sched, n, k, r, span)

    def gen(s, t):
        res = min_height_sampled(sched, s, t, n=n, r=r, levels=(k, r), span=(0, width))
        if res.censored:
            return res.cap * scale, True
        return res.height * scale, False

    rep = run(
        Experiment(
            "contour",
            gen,
            args.trials,
            seed=args.seed,
            comparator=Comparator("upper_4se", bound),
            params={
                "n": n,
                "r": r,
                "k": k,
                "span": span,
                "schedule": sched.spec_string(),
            },
        ),
        threads=args.threads,
    )
    _emit(args, rep.to_json_dict())
    return 0 if rep.passed else 1


def _cmd_bound(args) -> int:
    sched = parse_schedule(args.schedule)
    interval = "full" if args.interval == "unit" else args.interval
    kinds = ("contour", "crossing") if args.kind == "both" else (args.kind,)
    records = [
        bound_record(sched, args.n, args.k, args.r, kind, interval).to_json_dict()
        for kind in kinds
    ]
    _emit(args, {"schedule": sched.spec_string(), "bounds": records})
    return 0


def _cmd_blocking(args) -> int:
    sched = parse_schedule(args.schedule)
    cfg = GridConfig.unit_square(args.n, args.r)
    vac = sample_vacancies(cfg, sched, args.seed, args.trial)
    cert = blocking_certificate(vac, args.k, args.band_index)
    out = cert.to_json_dict()
    out["schedule"] = sched.spec_string()
    out["seed"] = args.seed
    out["trial"] = args.trial
    if cert.found:
        bits = sample_retained_bits(cfg, sched, args.seed, args.trial)
        out["crossing_from_band"] = bool(has_crossing(bits, start_rows=cert.start_rows))
    _emit(args, out)
    return 0


def _cmd_treeflow(args) -> int:
    tree = load_tree(args.tree)
    rep = verify_flow_sandwich(tree, args.trials, args.seed)
    out = rep.to_json_dict()
    out["tree"] = args.tree
    out["seed"] = args.seed
    _emit(args, out)
    return 0 if rep.passed else 1


def _cmd_lemma(args) -> int:
    zdist = parse_zdist(args.zdist)
    rep = check_truncation_bound(zdist, args.theta, args.trials, args.seed)
    out = rep.to_json_dict()
    out["seed"] = args.seed
    _emit(args, out)
    return 0 if rep.passed else 1


def _cmd_render(args) -> int:
    sched = parse_schedule(args.schedule)
    cfg = GridConfig.unit_square(args.n, args.r)
    bits = sample_retained_bits(cfg, sched, args.seed, args.trial)
    vac = None
    path = None
    if args.overlay == "vacancies":
        vac = sample_vacancies(cfg, sched, args.seed, args.trial)
    elif args.overlay == "crossing":
        path = crossing_witness(bits)
    data = render_ppm(cfg, bits, vac=vac, path=path, spec=RenderSpec(cell_px=args.cell_px))
    with open(args.out, "wb") as fh:
        fh.write(data)
    sys.stdout.write(f"wrote {args.out} ({len(data)} bytes)\n")
    return 0


def _cmd_verify_all(args) -> int:
    keys = None
    if args.only:
        keys = [k.strip() for k in args.only.split(",") if k.strip()]
        known = {key for key, _, _ in CRITERIA}
        bad = [k for k in keys if k not in known]
        if bad:
            print(f"unknown criteria: {', '.join(bad)}", file=sys.stderr)
            return 2
    results = run_all(args.seed, quick=args.quick, keys=keys, echo=True)
    if args.report:
        with open(args.report, "a", encoding="utf-8") as fh:
            for res in results:
                fh.write(json.dumps(res.to_json_dict(), sort_keys=True) + "\n")
    payload = reports_json(results, include_wall=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    failures = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failures)}/{len(results)} criteria passed", flush=True)
    if failures:
        print("failed: " + ", ".join(failures), flush=True)
    return 1 if failures else 0


_DISPATCH = {
    "area": _cmd_area,
    "crossing": _cmd_crossing,
    "contour": _cmd_contour,
    "bound": _cmd_bound,
    "blocking": _cmd_blocking,
    "treeflow": _cmd_treeflow,
    "lemma": _cmd_lemma,
    "render": _cmd_render,
    "verify-all": _cmd_verify_all,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (ScheduleError, TreeParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
