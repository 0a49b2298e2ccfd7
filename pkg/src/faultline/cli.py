"""The faultline command line.

Subcommands: gen, serve, validate, fuzz, scenario, crawl, report.
Exit codes: 0 success, 1 usage error, 2 expectation/assertion failures,
3 internal error. All randomness flows from --seed; --time-scale and the
output directory honor environment overrides.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import time
from typing import List, Optional

log = logging.getLogger("faultline")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_EXPECTATION = 2
EXIT_INTERNAL = 3


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--time-scale", type=float,
                        default=float(os.environ.get("FAULTLINE_TIME_SCALE", "1.0")),
                        help="multiplier applied to every timing knob")
    parser.add_argument("--seed", type=int, default=0, help="rng seed")
    parser.add_argument("--workers", type=int, default=4,
                        help="parallel repository fetches per validation run")
    parser.add_argument("--output-dir",
                        default=os.environ.get("FAULTLINE_OUTPUT_DIR", "."),
                        help="base directory for generated artifacts")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultline",
        description="Differential RPKI conformance laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a repository tree from a recipe")
    p_gen.add_argument("--recipe", required=True, help="recipe JSON file")
    p_gen.add_argument("--out", required=True, help="output directory")
    _add_common(p_gen)

    p_serve = sub.add_parser("serve", help="serve saved pubpoint state over HTTP(S)")
    p_serve.add_argument("--state", required=True, help="directory written by gen")
    p_serve.add_argument("--plan", help="fault plan JSON")
    p_serve.add_argument("--bind", default="127.0.0.1:0", help="address:port")
    p_serve.add_argument("--tls", action="store_true",
                         help="serve https with the built-in test CA "
                              "(CA certificate is written to <state>/ca.pem)")
    _add_common(p_serve)

    p_val = sub.add_parser("validate", help="run the validator over TALs")
    p_val.add_argument("--tal", required=True, action="append",
                       help="TAL file (repeatable)")
    p_val.add_argument("--profile", default="STRICT_RFC",
                       help="built-in profile name or profile JSON path")
    p_val.add_argument("--cache", help="cache directory (persists between runs)")
    p_val.add_argument("--output", required=True, help="report output directory")
    p_val.add_argument("--trust-ca", help="PEM bundle to trust for repository TLS")
    _add_common(p_val)

    p_fuzz = sub.add_parser("fuzz", help="differential fuzzing campaign")
    p_fuzz.add_argument("--type", action="append", dest="types",
                        choices=["roa", "cert", "mft", "crl", "gbr"],
                        help="object type (repeatable; default all)")
    p_fuzz.add_argument("--profiles", default="RTN_LIKE,FORT_LIKE,RPC_LIKE,STRICT_RFC")
    p_fuzz.add_argument("--duration", type=float, help="wall-clock seconds")
    p_fuzz.add_argument("--iterations", type=int, help="iteration-bounded mode")
    p_fuzz.add_argument("--out", required=True, help="findings JSON path")
    _add_common(p_fuzz)

    p_scen = sub.add_parser("scenario", help="scenario corpus operations")
    scen_sub = p_scen.add_subparsers(dest="scenario_command", required=True)
    scen_sub.add_parser("list", help="list scenario ids")
    p_run = scen_sub.add_parser("run", help="run scenarios and check matrices")
    p_run.add_argument("target", help="scenario id or 'all'")
    p_run.add_argument("--profiles", default="RTN_LIKE,FORT_LIKE,RPC_LIKE,STRICT_RFC")
    p_run.add_argument("--report", help="verdict JSON output path")
    _add_common(p_run)
    p_dump = scen_sub.add_parser("dump", help="write scenario fixtures to disk")
    p_dump.add_argument("target", help="scenario id")
    p_dump.add_argument("--out", required=True)
    _add_common(p_dump)

    p_crawl = sub.add_parser("crawl", help="crawl RRDP targets and run the checklist")
    p_crawl.add_argument("--targets", required=True,
                         help="file with one notification URI per line")
    p_crawl.add_argument("--mode", choices=["live", "sim"], default="sim")
    p_crawl.add_argument("--state", help="run-state directory for alert diffs")
    p_crawl.add_argument("--report", help="report JSON output path")
    _add_common(p_crawl)

    p_rep = sub.add_parser("report", help="render run JSON files")
    p_rep.add_argument("inputs", nargs="+", help="one or more run JSON files")
    p_rep.add_argument("--format", choices=["text", "json", "csv"], default="text")
    _add_common(p_rep)
    return parser


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

def _cmd_gen(args) -> int:
    from .genrepo import InvalidRecipe, generate
    try:
        with open(args.recipe, "r", encoding="utf-8") as fh:
            recipe_text = fh.read()
        tal_path, hosts = generate(recipe_text, args.out)
    except InvalidRecipe as exc:
        print(f"invalid recipe: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {len(hosts)} publication point(s) under {args.out}")
    print(f"TAL: {tal_path}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from . import server as srv
    from .genrepo import InvalidRecipe, load_mounts
    from .pubpoint import EMPTY_PLAN, FaultPlan

    host, _, port = args.bind.rpartition(":")
    try:
        bind = (host or "127.0.0.1", int(port))
    except ValueError:
        print(f"invalid bind address {args.bind!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        mounts = load_mounts(args.state)
    except (InvalidRecipe, OSError) as exc:
        print(f"cannot load state: {exc}", file=sys.stderr)
        return EXIT_USAGE
    from .pubpoint import Fault, TLS_CERT, TLS_VALID

    plan = EMPTY_PLAN
    if args.plan:
        with open(args.plan, "r", encoding="utf-8") as fh:
            plan = FaultPlan.from_json(fh.read())
    if args.tls and not plan.first(TLS_CERT):
        plan = FaultPlan(plan.faults + (Fault(TLS_CERT, mode=TLS_VALID),))
    handle = srv.serve(plan=plan, bind=bind)
    if handle.ca_pem:
        ca_path = os.path.join(args.state, "ca.pem")
        with open(ca_path, "wb") as fh:
            fh.write(handle.ca_pem)
        print(f"test CA written to {ca_path}")
    for mount in mounts.values():
        mount.plan = plan
        handle.add_mount(mount)
    print(f"serving {len(mounts)} publication point(s) at {handle.base_url}")
    for host_label in sorted(mounts):
        print(f"  {handle.notification_uri(host_label)}")
    try:
        signal.pause()
    except (KeyboardInterrupt, AttributeError):
        pass
    finally:
        handle.shutdown_server()
    return EXIT_OK


def _cmd_validate(args) -> int:
    from . import engine
    from .fetch import HttpTransport
    from .profiles import get_profile
    from .reporting import CacheState
    from .rpkiobjects import Tal

    tals = []
    for path in args.tal:
        with open(path, "r", encoding="utf-8") as fh:
            name = os.path.splitext(os.path.basename(path))[0]
            tals.append(Tal.from_text(fh.read(), name=name))
    profile = get_profile(args.profile)
    cache = CacheState.load(args.cache) if args.cache else CacheState()
    trust_ca = None
    if args.trust_ca:
        with open(args.trust_ca, "rb") as fh:
            trust_ca = fh.read()
    transport = HttpTransport(trust_ca_pem=trust_ca)
    report, new_cache = engine.validate_tree(
        tals, transport, profile, cache,
        time_scale=args.time_scale, workers=args.workers)
    os.makedirs(args.output, exist_ok=True)
    with open(os.path.join(args.output, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(os.path.join(args.output, "vrps.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.vrps_csv())
    if args.cache:
        new_cache.save(args.cache)
    print(f"{len(report.vrps)} VRPs, {len(report.errors)} errors -> {args.output}")
    return EXIT_OK


def _cmd_fuzz(args) -> int:
    from .fuzzing import OBJECT_TYPES, fuzz_campaign

    if not args.duration and not args.iterations:
        print("one of --duration or --iterations is required", file=sys.stderr)
        return EXIT_USAGE
    types = tuple(args.types) if args.types else OBJECT_TYPES
    profiles = tuple(p.strip() for p in args.profiles.split(",") if p.strip())
    report = fuzz_campaign(
        object_types=types, profile_names=profiles,
        duration_seconds=args.duration, iterations=args.iterations,
        rng_seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    print(f"{report.iterations} inputs, {report.divergent_inputs} divergent, "
          f"{len(report.findings)} findings (duplicate ratio "
          f"{report.duplicate_ratio:.3f}) -> {args.out}")
    return EXIT_OK


def _cmd_scenario(args) -> int:
    from . import scenarios

    if args.scenario_command == "list":
        for scenario in scenarios.list_scenarios():
            cases = ", ".join(c.case_id for c in scenario.cases)
            print(f"{scenario.scenario_id}: {scenario.description} [{cases}]")
        return EXIT_OK

    if args.scenario_command == "dump":
        try:
            paths = scenarios.dump_scenario(args.target, args.out)
        except scenarios.UnknownScenario:
            print(f"unknown scenario {args.target!r}", file=sys.stderr)
            return EXIT_USAGE
        for path in paths:
            print(path)
        return EXIT_OK

    profiles = tuple(p.strip() for p in args.profiles.split(",") if p.strip())
    try:
        if args.target == "all":
            verdicts = scenarios.run_all(profiles, time_scale=args.time_scale,
                                         workers=args.workers)
        else:
            verdicts = scenarios.run_scenario(args.target, profiles,
                                              time_scale=args.time_scale,
                                              workers=args.workers)
    except scenarios.UnknownScenario:
        print(f"unknown scenario {args.target!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump([v.to_dict() for v in verdicts], fh, indent=2, sort_keys=True)
    mismatched = [v for v in verdicts if not v.matched]
    for verdict in verdicts:
        mark = "ok " if verdict.matched else "XX "
        print(f"{mark}{verdict.scenario_id}/{verdict.case_id} {verdict.profile}: "
              f"expected {verdict.expected.describe()}, observed "
              f"vrps={verdict.observed['vrps']} codes={verdict.observed['error_codes']}")
    print(f"{len(verdicts) - len(mismatched)}/{len(verdicts)} matched")
    return EXIT_OK if not mismatched else EXIT_EXPECTATION


def _cmd_crawl(args) -> int:
    from . import crawler as crawl_mod
    from .fetch import HttpTransport

    with open(args.targets, "r", encoding="utf-8") as fh:
        uris = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    interval = 60.0 if args.mode == "live" else 0.0
    targets = [crawl_mod.CrawlTarget(uri, per_host_interval=interval) for uri in uris]
    mode = crawl_mod.MODE_LIVE if args.mode == "live" else crawl_mod.MODE_SIMULATOR
    results = crawl_mod.crawl(targets, HttpTransport(), mode=mode)
    record = crawl_mod.RunRecord.from_results(results)

    diff = None
    if args.state:
        previous_runs = crawl_mod.load_runs(args.state)
        if previous_runs:
            diff = crawl_mod.diff_alerts(previous_runs[-1], record)
        crawl_mod.save_run(args.state, record)

    payload = {
        "targets": {uri: result.to_dict() for uri, result in results.items()},
        "alert_diff": diff.to_dict() if diff else None,
    }
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    total_failures = sum(len(r.failure_ids()) for r in results.values())
    print(f"crawled {len(results)} target(s), {total_failures} failure(s)")
    if diff is not None and diff.new_failures:
        print(f"{len(diff.new_failures)} new failure(s)")
        return EXIT_EXPECTATION
    return EXIT_OK


def _render_report(data, fmt: str) -> str:
    # Scenario verdict arrays, campaign reports, and crawl reports each
    # have a recognizable shape; render accordingly.
    if isinstance(data, list) and data and {"scenario", "profile"} <= set(data[0]):
        lines = []
        for v in sorted(data, key=lambda d: (d["scenario"], d["case"], d["profile"])):
            mark = "ok" if v["matched"] else "XX"
            lines.append(f"{mark} {v['scenario']}/{v['case']} {v['profile']}")
        matched = sum(1 for v in data if v["matched"])
        lines.append(f"{matched}/{len(data)} matched")
        return "\n".join(lines)
    if isinstance(data, dict) and "findings" in data:
        lines = ["occurrences  type  accept-pattern  error-codes"]
        for f in sorted(data["findings"], key=lambda f: -f["occurrence_count"]):
            fp = f["fingerprint"]
            pattern = "".join("A" if a == "accept" else "R" for a in fp["accept_pattern"])
            codes = ";".join(",".join(s) for s in fp["error_code_sets"])
            lines.append(f"{f['occurrence_count']:>11}  {fp['object_type']:<5} "
                         f"{pattern:<14} {codes}")
        return "\n".join(lines)
    if isinstance(data, dict) and "targets" in data:
        lines = []
        for uri, target in sorted(data["targets"].items()):
            checks = target["compliance"]["checks"]
            failed = [c for c, ok in checks.items() if not ok]
            lines.append(f"{uri}: {target['compliance']['availability']}"
                         + (f" failed={failed}" if failed else ""))
        if data.get("alert_diff"):
            diff = data["alert_diff"]
            lines.append(f"new={len(diff['new_failures'])} "
                         f"resolved={len(diff['resolved_failures'])} "
                         f"persisting={len(diff['persisting_failures'])}")
        return "\n".join(lines)
    raise ValueError("unrecognized report schema")


def _cmd_report(args) -> int:
    outputs = []
    for path in args.inputs:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if args.format == "json":
            outputs.append(json.dumps(data, indent=2, sort_keys=True))
            continue
        if args.format == "csv" and isinstance(data, dict) and "vrps" in data:
            lines = ["ASN,IP Prefix,Max Length,Trust Anchor"]
            lines.extend(
                f"AS{v['asn']},{v['prefix']},{v['max_length']},{v['trust_anchor']}"
                for v in data["vrps"])
            outputs.append("\n".join(lines))
            continue
        try:
            outputs.append(_render_report(data, args.format))
        except ValueError as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    print("\n\n".join(outputs))
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "serve": _cmd_serve,
    "validate": _cmd_validate,
    "fuzz": _cmd_fuzz,
    "scenario": _cmd_scenario,
    "crawl": _cmd_crawl,
    "report": _cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    level_name = getattr(args, "log_level", "warning").upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING))
    try:
        return _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # CLI boundary: report, do not traceback-dump
        log.error("internal error: %s", exc, exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
