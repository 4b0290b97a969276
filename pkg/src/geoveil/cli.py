"""Command-line entry point.

Exit codes: 0 success, 2 usage or validation error, 1 internal error.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .anonymity import (
    Action,
    AnonymityConfig,
    Kind,
    PoiIndex,
    decision_record,
    load_poi,
    process_outgoing,
    write_transcript,
)
from .metrics import exposure
from .model import DistanceMode, GeoveilError, MetricsConfig, Owner, UsageError, load_reports, save_reports
from .patterns import STUDY_PATTERNS, PatternSpec, as_reports, generate_xy
from .place import Fingerprint, PlaceConfig, PlaceProfile, iter_scans, load_profile, observe_scan, replay, save_profile
from .sim import run_anonymity_study, run_metric_study, write_metric_csv, write_trace_csv

SEED_ENV = "GEOVEIL_SEED"

PROFILES = {
    "sim": {"dmax": 500.0, "k": 10, "distance": "planar", "delta": 0.2, "delta_l": 3600.0},
    "deploy": {"dmax": 50_000.0, "k": 30, "distance": "geo", "delta": 0.2, "delta_l": 3600.0},
}
_DISTANCES = {"planar": DistanceMode.EUCLIDEAN, "geo": DistanceMode.HAVERSINE}


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _unit_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def _int_at_least(lo: int):
    def parse(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {text}")
        return v

    return parse


def _pattern(text: str) -> PatternSpec:
    try:
        return PatternSpec.parse(text)
    except UsageError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoveil", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, metrics=False, place=False, anon=False):
        sp.add_argument("--profile", choices=sorted(PROFILES), default="sim", help="parameter defaults (default: sim)")
        if metrics:
            sp.add_argument("--dmax", type=_positive_float, help="normalizing diameter in meters")
            sp.add_argument("--distance", choices=sorted(_DISTANCES), help="planar meters or geographic degrees")
        if place:
            sp.add_argument("--delta", type=_unit_float, help="fingerprint similarity threshold")
            sp.add_argument("--delta-l", type=_positive_float, help="stay duration (s) before a place is learned")
        if anon:
            sp.add_argument("--k", type=_int_at_least(1), help="anonymity set size")

    sp = sub.add_parser("metrics", help="coverage, uniformity and exposure of a report file")
    sp.add_argument("--input", required=True, type=Path)
    common(sp, metrics=True)

    sp = sub.add_parser("gen", help="generate synthetic activity reports")
    sp.add_argument("--pattern", type=_pattern, default=PatternSpec("uniform"))
    sp.add_argument("--n", type=_int_at_least(0), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--owner", choices=[o.value for o in Owner], default="mine")
    sp.add_argument("--independent-angle", action="store_true", help="draw the polar angle separately")
    sp.add_argument("--output", required=True, type=Path)
    common(sp, metrics=True)

    sp = sub.add_parser("anonymize", help="run reports through place detection and k-anonymity")
    sp.add_argument("--input", required=True, type=Path, help="the user's outgoing reports, in order")
    sp.add_argument("--pool", required=True, type=Path, help="downloaded crowdsourced pool snapshot")
    sp.add_argument("--poi", type=Path, help="POI CSV used for obfuscation")
    sp.add_argument("--allow-raw-location", action="store_true", help="submit unobfuscated when no POIs are given")
    sp.add_argument("--kind", choices=[k.value for k in Kind], default=Kind.CROWDSENSED.value)
    sp.add_argument("--places", type=Path, help="place profile JSON to start from")
    sp.add_argument("--places-out", type=Path, help="write the updated place profile here")
    sp.add_argument("--quantize", type=_positive_float, default=10.0, help="location cell size (m) for counting")
    sp.add_argument("--output", required=True, type=Path, help="submission transcript (JSONL)")
    common(sp, metrics=True, place=True, anon=True)

    sp = sub.add_parser("place-replay", help="replay a WiFi scan trace through place learning")
    sp.add_argument("--input", required=True, type=Path)
    sp.add_argument("--output", type=Path, help="learned profile JSON")
    common(sp, place=True)

    sp = sub.add_parser("sim-metric-study", help="metrics of synthetic activity patterns vs. point count")
    sp.add_argument("--pattern", type=_pattern, action="append", help="repeatable; default: the six study patterns")
    sp.add_argument("--n", type=_int_at_least(1), default=1200, help="largest point count")
    sp.add_argument("--step", type=_int_at_least(1), default=100)
    sp.add_argument("--runs", type=_int_at_least(1), default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=_int_at_least(1), default=1)
    sp.add_argument("--output", required=True, type=Path)
    common(sp, metrics=True)

    sp = sub.add_parser("sim-anonymity", help="compare greedy, random and naive submission")
    sp.add_argument("--pattern", type=_pattern, default=PatternSpec("beta", 5, 30))
    sp.add_argument("--omega", type=_int_at_least(0), default=1000, help="size of the other users' pool")
    sp.add_argument("--n", type=_int_at_least(1), default=100, help="real reports submitted")
    sp.add_argument("--runs", type=_int_at_least(1), default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=_int_at_least(1), default=1)
    sp.add_argument("--output", required=True, type=Path)
    common(sp, metrics=True, anon=True)
    return p


def _resolve(args: argparse.Namespace) -> None:
    defaults = PROFILES[args.profile]
    for name, value in defaults.items():
        if name != "distance" and hasattr(args, name) and getattr(args, name) is None:
            setattr(args, name, value)
    if hasattr(args, "seed"):
        env = os.environ.get(SEED_ENV)
        if env is not None and env.strip():
            try:
                args.seed = int(env)
            except ValueError:
                raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _metrics_cfg(args, crs=None) -> MetricsConfig:
    """Explicit --distance wins; otherwise follow the data, then the profile."""
    if args.distance is not None:
        mode = _DISTANCES[args.distance]
    elif crs is not None:
        mode = DistanceMode.for_crs(crs)
    else:
        mode = _DISTANCES[PROFILES[args.profile]["distance"]]
    return MetricsConfig(args.dmax, mode)


# ---------------------------------------------------------------------------


def cmd_metrics(args) -> int:
    pool = load_reports(args.input)
    if len(pool) == 0:
        raise UsageError("metrics undefined for empty report set")
    s = exposure(pool.reports, _metrics_cfg(args, pool.crs))
    print(f"n {s.n}")
    print(f"coverage {s.coverage:.6f}")
    print(f"uniformity {s.uniformity:.6f}")
    print(f"exposure {s.exposure:.6f}")
    return 0


def cmd_gen(args) -> int:
    spec = PatternSpec(
        args.pattern.kind, args.pattern.alpha, args.pattern.beta, args.dmax, args.seed, not args.independent_angle
    )
    xy = generate_xy(spec, args.n)
    save_reports(as_reports(xy, Owner(args.owner)), args.output)
    print(f"wrote {args.n} reports ({spec.label}, seed {args.seed}) to {args.output}")
    return 0


def cmd_anonymize(args) -> int:
    outgoing = load_reports(args.input)
    pool = load_reports(args.pool)
    poi = load_poi(args.poi) if args.poi else PoiIndex()
    profile = load_profile(args.places) if args.places else PlaceProfile()
    place_cfg = PlaceConfig(args.delta, args.delta_l)
    anon_cfg = AnonymityConfig(args.k, _metrics_cfg(args, outgoing.crs or pool.crs), args.quantize)
    kind = Kind(args.kind)

    history = []
    decisions = []
    for real in outgoing:
        scan = Fingerprint(real.ambient_aps, real.timestamp)
        d = process_outgoing(
            kind, real, scan, profile, pool, poi, place_cfg, anon_cfg,
            allow_raw=args.allow_raw_location, history=history,
        )
        decisions.append(d)
        if d.action is Action.SUBMIT:
            history.append(d.anonymity_set.real.owned_by(Owner.MINE))
        if kind is Kind.CROWDSENSED and scan.bssids:
            profile, _ = observe_scan(profile, scan, place_cfg)

    write_transcript(decisions, args.output)
    if args.places_out:
        save_profile(profile, args.places_out)
    submitted = sum(d.action is Action.SUBMIT for d in decisions)
    sent = sum(len(decision_record(d)["members"]) for d in decisions)
    print(f"submitted {submitted}")
    print(f"suppressed {len(decisions) - submitted}")
    print(f"reports_sent {sent}")
    return 0


def cmd_place_replay(args) -> int:
    result = replay(iter_scans(args.input), PlaceConfig(args.delta, args.delta_l))
    if args.output:
        save_profile(result.profile, args.output)
    print(f"scans {result.scans}")
    print(f"places_learned {result.places_learned}")
    print(f"suppressed {result.suppressed}")
    return 0


def cmd_sim_metric_study(args) -> int:
    patterns = args.pattern or list(STUDY_PATTERNS)
    if args.distance == "geo":
        raise UsageError("simulations run on the planar field")
    rows = run_metric_study(patterns, args.n, args.step, args.runs, args.seed, args.dmax, args.workers)
    meta = {"seed": args.seed, "runs": args.runs, "n_max": args.n, "step": args.step, "d_max": args.dmax}
    write_metric_csv(rows, args.output, meta)
    print(f"wrote {len(rows)} rows to {args.output}")
    return 0


def cmd_sim_anonymity(args) -> int:
    if args.distance == "geo":
        raise UsageError("simulations run on the planar field")
    traces = run_anonymity_study(args.pattern, args.omega, args.n, args.k, args.runs, args.seed, args.dmax, args.workers)
    meta = {"seed": args.seed, "runs": args.runs, "k": args.k, "d_max": args.dmax, "omega": args.omega, "n_real": args.n}
    write_trace_csv(traces, args.output, meta)
    print(f"wrote {sum(len(t.steps) for t in traces)} rows to {args.output}")
    return 0


COMMANDS = {
    "metrics": cmd_metrics,
    "gen": cmd_gen,
    "anonymize": cmd_anonymize,
    "place-replay": cmd_place_replay,
    "sim-metric-study": cmd_sim_metric_study,
    "sim-anonymity": cmd_sim_anonymity,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _resolve(args)
        return COMMANDS[args.command](args)
    except (GeoveilError, OSError) as e:
        print(f"geoveil {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # pragma: no cover - reported, not swallowed
        logging.getLogger(__name__).exception("internal error")
        print(f"geoveil {args.command}: internal error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
