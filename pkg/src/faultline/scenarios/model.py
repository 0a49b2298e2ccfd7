"""Scenario machinery: expectation matrices, builders, and the runner.

A scenario bundles one or more cases; each case builds a fresh fixture
(deterministic for a fixed key set), optionally advances it through
phases (serving new serials), and carries a per-profile expectation.
Cases default to the in-memory transport; TLS and transfer-rate cases
force a real HTTP(S) endpoint because their behavior is socket-level.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .. import engine, profiles, pubpoint, server as srv
from ..cabuild import Fixture
from ..fetch import HttpTransport, MemTransport
from ..profiles import PROFILE_ORDER, BUILTIN_PROFILES, InterpretationProfile
from ..reporting import CacheState, ValidationReport
from ..rpkiobjects import Tal

ACCEPT = "ACCEPT"
REJECT = "REJECT"
FALLBACK = "FALLBACK"
BOUNDED_STALL = "BOUNDED_STALL"
DEPTH_CUTOFF = "DEPTH_CUTOFF"


class UnknownScenario(KeyError):
    pass


@dataclass(frozen=True)
class Expected:
    kind: str
    vrp_count: Optional[int] = None
    error_codes: Tuple[str, ...] = ()
    fallback: Optional[str] = None
    max_seconds: Optional[float] = None   # unscaled; multiplied by time scale
    depth: Optional[int] = None
    asns: Optional[Tuple[int, ...]] = None
    stall_metric: str = "fetch"           # "fetch" or "repo"

    def describe(self) -> str:
        if self.kind == ACCEPT:
            return f"ACCEPT({self.vrp_count})"
        if self.kind == REJECT:
            return f"REJECT({','.join(self.error_codes)})"
        if self.kind == FALLBACK:
            return f"FALLBACK({self.fallback},{self.vrp_count})"
        if self.kind == BOUNDED_STALL:
            return f"BOUNDED_STALL({self.max_seconds}s,{','.join(self.error_codes)})"
        return f"DEPTH_CUTOFF({self.depth})"

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in ("vrp_count", "fallback", "max_seconds", "depth"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.error_codes:
            out["error_codes"] = list(self.error_codes)
        if self.asns is not None:
            out["asns"] = list(self.asns)
        return out


def accept(vrp_count: int, codes: Sequence[str] = (), asns: Optional[Sequence[int]] = None) -> Expected:
    return Expected(ACCEPT, vrp_count=vrp_count, error_codes=tuple(codes),
                    asns=tuple(asns) if asns is not None else None)


def reject(*codes: str, vrp_count: int = 0) -> Expected:
    return Expected(REJECT, vrp_count=vrp_count, error_codes=codes)


def fallback(kind: str, vrp_count: int, codes: Sequence[str] = ()) -> Expected:
    return Expected(FALLBACK, vrp_count=vrp_count, fallback=kind, error_codes=tuple(codes))


def bounded_stall(max_seconds: float, *codes: str, vrp_count: Optional[int] = None,
                  metric: str = "fetch") -> Expected:
    return Expected(BOUNDED_STALL, vrp_count=vrp_count, error_codes=codes,
                    max_seconds=max_seconds, stall_metric=metric)


def depth_cutoff(depth: int, vrp_count: Optional[int] = None) -> Expected:
    return Expected(DEPTH_CUTOFF, depth=depth, vrp_count=vrp_count)


@dataclass
class BuiltCase:
    fixture: Fixture
    tal: Tal
    # Called between validation runs; run count is len(phases) + 1.
    phases: List[Callable[[], None]] = field(default_factory=list)


@dataclass
class CaseSpec:
    case_id: str
    build: Callable[..., BuiltCase]     # kwargs: notify_base, ta_cert_base
    expectations: Dict[str, Expected]
    description: str = ""
    force_http: bool = False
    alternate_channel: bool = True
    # When set, the final phase is re-run on a cold cache and the hook
    # compares warm (delta-path) vs cold (snapshot-path) reports.
    compare_paths: Optional[Callable[[str, ValidationReport, ValidationReport],
                                     Tuple[bool, str]]] = None


@dataclass
class Scenario:
    scenario_id: str
    description: str
    rfc_topic: str
    cases: List[CaseSpec]


@dataclass
class CaseVerdict:
    scenario_id: str
    case_id: str
    profile: str
    expected: Expected
    observed: dict
    matched: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "case": self.case_id,
            "profile": self.profile,
            "expected": self.expected.to_dict(),
            "observed": self.observed,
            "matched": self.matched,
            "note": self.note,
        }


def _observe(report: ValidationReport, elapsed_fetch: float, elapsed_repo: float) -> dict:
    return {
        "vrps": len(report.vrps),
        "asns": sorted({v.asn for v in report.vrps}),
        "error_codes": list(report.error_codes()),
        "fallbacks": sorted({kind for _, kind in report.stats.fallbacks_taken}),
        "max_depth": report.stats.max_depth_reached,
        "slowest_fetch_seconds": round(elapsed_fetch, 4),
        "repo_seconds": round(elapsed_repo, 4),
    }


def _matches(expected: Expected, observed: dict, time_scale: float) -> bool:
    codes_ok = set(expected.error_codes) <= set(observed["error_codes"])
    vrps_ok = expected.vrp_count is None or observed["vrps"] == expected.vrp_count
    if expected.asns is not None and observed["asns"] != sorted(expected.asns):
        return False
    if expected.kind == ACCEPT:
        return vrps_ok and codes_ok
    if expected.kind == REJECT:
        return vrps_ok and codes_ok
    if expected.kind == FALLBACK:
        return vrps_ok and codes_ok and expected.fallback in observed["fallbacks"]
    if expected.kind == BOUNDED_STALL:
        scaled = expected.max_seconds * time_scale
        elapsed = (observed["slowest_fetch_seconds"] if expected.stall_metric == "fetch"
                   else observed["repo_seconds"])
        return codes_ok and vrps_ok and 0.8 * scaled <= elapsed <= 1.2 * scaled
    if expected.kind == DEPTH_CUTOFF:
        return observed["max_depth"] == expected.depth and vrps_ok and codes_ok
    return False


def _run_built(built: BuiltCase, profile: InterpretationProfile, transport,
               time_scale: float, workers: int,
               rerun_cold: bool) -> Tuple[ValidationReport, Optional[ValidationReport]]:
    cache: Optional[CacheState] = None
    report: Optional[ValidationReport] = None
    report, cache = engine.validate_tree([built.tal], transport, profile,
                                         time_scale=time_scale, workers=workers)
    for phase in built.phases:
        phase()
        report, cache = engine.validate_tree([built.tal], transport, profile, cache,
                                             time_scale=time_scale, workers=workers)
    cold = None
    if rerun_cold:
        cold, _ = engine.validate_tree([built.tal], transport, profile,
                                       time_scale=time_scale, workers=workers)
    return report, cold


def run_case(scenario: Scenario, case: CaseSpec, profile_names: Sequence[str], *,
             time_scale: float = 1.0, workers: int = 1) -> List[CaseVerdict]:
    verdicts: List[CaseVerdict] = []
    shared: Optional[BuiltCase] = None  # single-phase fixtures are read-only
    for name in profile_names:
        profile = BUILTIN_PROFILES[name] if name in BUILTIN_PROFILES \
            else profiles.get_profile(name)
        handle = None
        if case.force_http:
            built, handle, transport = _build_http(case)
        else:
            if shared is not None:
                built = shared
            else:
                built = case.build()
                if not built.phases and case.compare_paths is None:
                    shared = built
            transport = built.fixture.mem_transport()
            if not case.alternate_channel:
                transport.fetch_tree = _no_alternate  # type: ignore[assignment]
        try:
            report, cold = _run_built(built, profile, transport, time_scale, workers,
                                      rerun_cold=case.compare_paths is not None)
        finally:
            if handle is not None:
                handle.shutdown_server()
        repo_max = max(report.stats.repo_elapsed.values(), default=0.0)
        slowest_fetch = max(report.stats.fetch_durations.values(), default=0.0)
        observed = _observe(report, slowest_fetch, repo_max)
        expected = case.expectations[name]
        matched = _matches(expected, observed, time_scale)
        note = ""
        if case.compare_paths is not None and cold is not None:
            ok, note = case.compare_paths(name, report, cold)
            matched = matched and ok
        verdicts.append(CaseVerdict(scenario.scenario_id, case.case_id, name,
                                    expected, observed, matched, note))
    return verdicts


def _no_alternate(ca_repository, limits=None, tls_policy=None):
    from ..fetch import FetchUnavailable
    raise FetchUnavailable("no alternate channel configured for this fixture")


def _build_http(case: CaseSpec):
    """Start an endpoint, then build the fixture against its base URL.

    RRDP is an HTTPS protocol, so the endpoint always speaks TLS; the
    certificate mode defaults to a locally-trusted valid chain unless the
    case's fault plan picks a broken one.
    """
    probe = case.build()  # determines the TLS requirement via mount plans
    tls_fault = None
    for mount in probe.fixture.mounts.values():
        tls_fault = tls_fault or mount.plan.first(pubpoint.TLS_CERT)
    if tls_fault is None:
        tls_fault = pubpoint.Fault(pubpoint.TLS_CERT, mode=pubpoint.TLS_VALID)
    handle = srv.PubPointServer(("127.0.0.1", 0), tls_fault=tls_fault)
    import threading
    threading.Thread(target=handle.serve_forever, daemon=True).start()
    base = handle.base_url
    built = case.build(
        notify_base=lambda host: f"{base}/{host}/notification.xml",
        ta_cert_base=lambda host: f"{base}/{host}/ta.cer",
    )
    built.fixture.serve_all(handle)
    rsync_map = {host: base for host in built.fixture.mounts} if case.alternate_channel else {}
    transport = HttpTransport(rsync_map=rsync_map, trust_ca_pem=handle.ca_pem)
    return built, handle, transport
