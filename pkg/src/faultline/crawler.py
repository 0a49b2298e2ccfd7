"""Repository crawler: fetch everything, validate nothing, record all.

The crawler is the validator's opposite: it accepts any repository data
so that the true published state is observable even when validation
would discard it. On top of the inventory it runs the RRDP syntax
checklist, inspects TLS deployment, tracks availability, and builds a
provenance graph linking failures back to the files that caused them.
Two crawls diff into alert sets with contacts pulled from Ghostbusters
records.
"""

from __future__ import annotations

import datetime
import json
import os
import re
import socket
import ssl
import time
import urllib.parse
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from . import pubpoint, rpkiobjects, rrdpclient
from .fetch import (
    FetchError,
    FetchLimits,
    FetchStatusError,
    TLS_IGNORE,
    TlsVerificationError,
)
from .rrdpclient import RrdpParseError, parse_notification

MODE_LIVE = "LIVE"
MODE_SIMULATOR = "SIMULATOR"

# Compliance checklist names.
XML_NAMESPACE = "XML_NAMESPACE"
US_ASCII_ENCODING = "US_ASCII_ENCODING"
VERSION_ATTRIBUTE = "VERSION_ATTRIBUTE"
SINGLE_SNAPSHOT = "SINGLE_SNAPSHOT"
CONTIGUOUS_DELTAS = "CONTIGUOUS_DELTAS"
HASH_CONSISTENCY = "HASH_CONSISTENCY"
ALL_CHECKS = (XML_NAMESPACE, US_ASCII_ENCODING, VERSION_ATTRIBUTE,
              SINGLE_SNAPSHOT, CONTIGUOUS_DELTAS, HASH_CONSISTENCY)

AVAILABILITY_OK = "OK"
PERMANENTLY_OFFLINE = "PERMANENTLY_OFFLINE"
INVALID_NOTIFICATION = "INVALID_NOTIFICATION"


class UnknownFailure(KeyError):
    pass


@dataclass
class CrawlTarget:
    notification_uri: str
    per_host_interval: float = 60.0
    last_attempt: float = 0.0

    def __post_init__(self):
        # Live crawling is throttled to one request per host per minute;
        # only the simulator may go faster.
        if self.per_host_interval < 0:
            raise ValueError("per_host_interval must be non-negative")


@dataclass
class ComplianceResult:
    availability: str
    checks: Dict[str, bool] = field(default_factory=dict)

    def passed(self) -> bool:
        return self.availability == AVAILABILITY_OK and all(self.checks.values())

    def to_dict(self) -> dict:
        return {"availability": self.availability, "checks": dict(self.checks)}


@dataclass
class TlsFinding:
    valid_chain: bool
    expired: bool
    self_signed: bool
    has_dns_id: bool
    wildcard_in_dns_name: bool
    common_name_present: bool

    def __post_init__(self):
        if self.expired and self.valid_chain:
            raise ValueError("an expired certificate cannot head a valid chain")

    def to_dict(self) -> dict:
        return {
            "valid_chain": self.valid_chain,
            "expired": self.expired,
            "self_signed": self.self_signed,
            "has_dns_id": self.has_dns_id,
            "wildcard_in_dns_name": self.wildcard_in_dns_name,
            "common_name_present": self.common_name_present,
        }


# ---------------------------------------------------------------------------
# Provenance graph
# ---------------------------------------------------------------------------

NODE_NOTIFICATION = "NOTIFICATION"
NODE_SNAPSHOT = "SNAPSHOT"
NODE_DELTA = "DELTA"
NODE_OBJECT = "OBJECT"
NODE_CHECK = "CHECK"
NODE_FAILURE = "FAILURE"

REL_FETCHED_FROM = "FETCHED_FROM"
REL_LISTED_IN = "LISTED_IN"
REL_HASH_OF = "HASH_OF"
REL_CAUSED_BY = "CAUSED_BY"

_TERMINAL_KINDS = {NODE_NOTIFICATION, NODE_OBJECT}


class ProvenanceGraph:
    """Directed acyclic graph oriented from effects toward causes."""

    def __init__(self):
        self.nodes: Dict[str, str] = {}          # id -> kind
        self.edges: Dict[str, List[Tuple[str, str]]] = {}  # src -> [(dst, relation)]

    def add_node(self, kind: str, node_id: str) -> str:
        existing = self.nodes.get(node_id)
        if existing is not None and existing != kind:
            raise ValueError(f"node {node_id} already present with kind {existing}")
        self.nodes[node_id] = kind
        self.edges.setdefault(node_id, [])
        return node_id

    def add_edge(self, src: str, dst: str, relation: str):
        if src not in self.nodes or dst not in self.nodes:
            raise KeyError("both endpoints must exist before linking")
        if self._reaches(dst, src):
            raise ValueError(f"edge {src}->{dst} would create a cycle")
        if (dst, relation) not in self.edges[src]:
            self.edges[src].append((dst, relation))

    def _reaches(self, start: str, goal: str) -> bool:
        stack, seen = [start], set()
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(dst for dst, _ in self.edges.get(node, ()))
        return False

    def failures(self) -> List[str]:
        return sorted(n for n, kind in self.nodes.items() if kind == NODE_FAILURE)

    def is_acyclic(self) -> bool:
        # add_edge refuses cycles, so a full recheck is a structure audit.
        seen: Set[str] = set()
        state: Dict[str, int] = {}

        def visit(node: str) -> bool:
            state[node] = 1
            for dst, _ in self.edges.get(node, ()):
                mark = state.get(dst, 0)
                if mark == 1 or (mark == 0 and not visit(dst)):
                    return False
            state[node] = 2
            return True

        return all(state.get(n, 0) == 2 or visit(n) for n in self.nodes)

    def trace_cause(self, failure_id: str) -> List[str]:
        """Shortest cause path from a failure to a terminal notification or
        object node; ties broken lexicographically on the path."""
        if self.nodes.get(failure_id) != NODE_FAILURE:
            raise UnknownFailure(failure_id)
        frontier: List[List[str]] = [[failure_id]]
        visited = {failure_id}
        while frontier:
            next_frontier: List[List[str]] = []
            terminals = []
            for path in frontier:
                node = path[-1]
                outgoing = self.edges.get(node, ())
                if not outgoing and self.nodes[node] in _TERMINAL_KINDS:
                    terminals.append(path)
                    continue
                for dst, _ in sorted(outgoing):
                    if dst not in visited:
                        next_frontier.append(path + [dst])
            if terminals:
                return min(terminals)
            for path in next_frontier:
                visited.add(path[-1])
            frontier = sorted(next_frontier)
        raise UnknownFailure(f"{failure_id} has no path to a terminal cause")

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n, "kind": k} for n, k in sorted(self.nodes.items())],
            "edges": [
                {"from": src, "to": dst, "relation": rel}
                for src in sorted(self.edges)
                for dst, rel in sorted(self.edges[src])
            ],
        }


# ---------------------------------------------------------------------------
# Syntax checks
# ---------------------------------------------------------------------------

_ENCODING_RE = re.compile(br'encoding\s*=\s*["\']([^"\']+)["\']', re.IGNORECASE)


def _declared_encoding(data: bytes) -> Optional[str]:
    head = data[:200]
    if not head.lstrip().startswith(b"<?xml"):
        return None
    match = _ENCODING_RE.search(head.split(b"?>", 1)[0])
    return match.group(1).decode("ascii", "replace").lower() if match else None


def _root_info(data: bytes) -> Tuple[Optional[str], Optional[str]]:
    """(namespace, version attribute) of the root element, or Nones."""
    import xml.etree.ElementTree as ET
    try:
        root = ET.fromstring(data)
    except ET.ParseError:
        return None, None
    ns = root.tag[1:].split("}", 1)[0] if root.tag.startswith("{") else None
    return ns, root.get("version")


def check_rrdp_syntax(notification: bytes, snapshot: Optional[bytes],
                      deltas: Sequence[bytes]) -> ComplianceResult:
    """Evaluate the six syntax checks independently; a notification that
    does not parse at all classifies as INVALID_NOTIFICATION."""
    try:
        parsed = parse_notification(notification)
    except RrdpParseError:
        return ComplianceResult(availability=INVALID_NOTIFICATION)

    files: List[bytes] = [notification]
    if snapshot is not None:
        files.append(snapshot)
    files.extend(deltas)

    checks: Dict[str, bool] = {}
    namespaces = [_root_info(f)[0] for f in files]
    checks[XML_NAMESPACE] = all(ns == pubpoint.RRDP_NS for ns in namespaces)

    ascii_ok = True
    for f in files:
        declared = _declared_encoding(f)
        if declared not in (None, "us-ascii"):
            ascii_ok = False
        if any(b > 0x7F for b in f):
            ascii_ok = False
    checks[US_ASCII_ENCODING] = ascii_ok

    checks[VERSION_ATTRIBUTE] = all(_root_info(f)[1] == "1" for f in files)
    checks[SINGLE_SNAPSHOT] = len(parsed.snapshots) == 1

    serials = sorted(serial for serial, _, _ in parsed.deltas)
    contiguous = True
    if serials:
        contiguous = (serials == list(range(serials[0], serials[-1] + 1))
                      and serials[-1] == parsed.serial)
    checks[CONTIGUOUS_DELTAS] = contiguous

    hash_ok = True
    if parsed.snapshots:
        snap_hash = parsed.snapshots[0][1]
        if snapshot is None or pubpoint.sha256_hex(snapshot) != snap_hash:
            hash_ok = False
    listed = {serial: digest for serial, _, digest in parsed.deltas}
    fetched = dict(zip([s for s, _, _ in parsed.deltas], deltas))
    for serial, digest in listed.items():
        data = fetched.get(serial)
        if data is None or pubpoint.sha256_hex(data) != digest:
            hash_ok = False
    checks[HASH_CONSISTENCY] = hash_ok
    return ComplianceResult(availability=AVAILABILITY_OK, checks=checks)


# ---------------------------------------------------------------------------
# TLS inspection
# ---------------------------------------------------------------------------

def check_tls(endpoint_uri: str, trust_ca_pem: Optional[bytes] = None,
              timeout: float = 10.0) -> Optional[TlsFinding]:
    """Inspect the certificate an https endpooint presents; plain-http
    endpoints yield None."""
    parsed = urllib.parse.urlsplit(endpoint_uri)
    if parsed.scheme != "https":
        return None
    host, port = parsed.hostname, parsed.port or 443

    valid_chain = False
    try:
        ctx = ssl.create_default_context()
        if trust_ca_pem:
            ctx.load_verify_locations(cadata=trust_ca_pem.decode("ascii"))
        with socket.create_connection((host, port), timeout=timeout) as sock:
            with ctx.wrap_socket(sock, server_hostname=host):
                valid_chain = True
    except (ssl.SSLError, OSError, ValueError):
        valid_chain = False

    der: Optional[bytes] = None
    try:
        ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
        ctx.check_hostname = False
        ctx.verify_mode = ssl.CERT_NONE
        with socket.create_connection((host, port), timeout=timeout) as sock:
            with ctx.wrap_socket(sock) as tls:
                der = tls.getpeercert(binary_form=True)
    except (ssl.SSLError, OSError):
        der = None
    if der is None:
        # No certificate observable (protocol-level breakage).
        return TlsFinding(valid_chain=False, expired=False, self_signed=False,
                          has_dns_id=False, wildcard_in_dns_name=False,
                          common_name_present=False)

    from cryptography import x509
    from cryptography.x509.oid import ExtensionOID, NameOID

    cert = x509.load_der_x509_certificate(der)
    now = datetime.datetime.now(datetime.timezone.utc)
    expired = cert.not_valid_after_utc < now
    self_signed = cert.issuer == cert.subject
    dns_names: List[str] = []
    try:
        san = cert.extensions.get_extension_for_oid(ExtensionOID.SUBJECT_ALTERNATIVE_NAME)
        dns_names = san.value.get_values_for_type(x509.DNSName)
    except x509.ExtensionNotFound:
        dns_names = []
    common_names = cert.subject.get_attributes_for_oid(NameOID.COMMON_NAME)
    return TlsFinding(
        valid_chain=valid_chain and not expired,
        expired=expired,
        self_signed=self_signed,
        has_dns_id=bool(dns_names),
        wildcard_in_dns_name=any("*" in n for n in dns_names),
        common_name_present=bool(common_names),
    )


# ---------------------------------------------------------------------------
# Crawl
# ---------------------------------------------------------------------------

@dataclass
class TargetResult:
    target: str
    compliance: ComplianceResult
    tls: Optional[TlsFinding]
    inventory: Dict[str, str]                 # uri -> "ok" | failure class
    objects: Dict[str, bytes] = field(default_factory=dict)
    graph: ProvenanceGraph = field(default_factory=ProvenanceGraph)
    listed_delta_count: int = 0
    parsed_delta_count: int = 0

    def failure_ids(self) -> List[str]:
        return self.graph.failures()

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "compliance": self.compliance.to_dict(),
            "tls": self.tls.to_dict() if self.tls else None,
            "inventory": dict(sorted(self.inventory.items())),
            "failures": self.failure_ids(),
            "listed_delta_count": self.listed_delta_count,
            "parsed_delta_count": self.parsed_delta_count,
        }


class Crawler:
    def __init__(self, transport, mode: str = MODE_SIMULATOR,
                 trust_ca_pem: Optional[bytes] = None, attempts: int = 3):
        self.transport = transport
        self.mode = mode
        self.trust_ca_pem = trust_ca_pem
        self.attempts = attempts
        self.request_log: List[Tuple[float, str, str]] = []  # (time, host, uri)
        self._last_request: Dict[str, float] = {}

    # -- polite fetching ------------------------------------------------------

    def _wait_turn(self, host: str, interval: float):
        if self.mode != MODE_LIVE or interval <= 0:
            return
        last = self._last_request.get(host)
        if last is not None:
            remaining = interval - (time.monotonic() - last)
            if remaining > 0:
                time.sleep(remaining)

    def _get(self, uri: str, interval: float) -> bytes:
        host = urllib.parse.urlsplit(uri).netloc
        self._wait_turn(host, interval)
        self._last_request[host] = time.monotonic()
        self.request_log.append((time.monotonic(), host, uri))
        return self.transport.get(uri, FetchLimits(timeout_seconds=60), TLS_IGNORE).data

    # -- per-target crawl -------------------------------------------------------

    def crawl_target(self, target: CrawlTarget) -> TargetResult:
        uri = target.notification_uri
        graph = ProvenanceGraph()
        notif_node = graph.add_node(NODE_NOTIFICATION, f"notification:{uri}")

        notification = None
        last_error: Optional[str] = None
        for attempt in range(self.attempts):
            try:
                notification = self._get(uri, target.per_host_interval)
                break
            except FetchStatusError as exc:
                last_error = f"HTTP {exc.status}"
                notification = None
                break  # reachable but refusing: not an offline condition
            except (TlsVerificationError, FetchError) as exc:
                last_error = str(exc)
                if attempt + 1 < self.attempts:
                    self._wait_turn(urllib.parse.urlsplit(uri).netloc,
                                    target.per_host_interval)
        tls = self._tls_for(uri)
        if notification is None:
            availability = (INVALID_NOTIFICATION if last_error and last_error.startswith("HTTP")
                            else PERMANENTLY_OFFLINE)
            failure = graph.add_node(NODE_FAILURE, f"failure:unreachable:{uri}")
            graph.add_edge(failure, notif_node, REL_CAUSED_BY)
            return TargetResult(uri, ComplianceResult(availability=availability),
                                tls, {uri: availability}, graph=graph)

        inventory: Dict[str, str] = {uri: "ok"}
        objects: Dict[str, bytes] = {}
        try:
            parsed = parse_notification(notification)
        except RrdpParseError:
            failure = graph.add_node(NODE_FAILURE, f"failure:invalid-notification:{uri}")
            graph.add_edge(failure, notif_node, REL_CAUSED_BY)
            return TargetResult(uri, ComplianceResult(availability=INVALID_NOTIFICATION),
                                tls, inventory, graph=graph)

        snapshot_bytes = None
        delta_bytes: List[bytes] = []
        listed_deltas = len(parsed.deltas)
        parsed_deltas = 0

        if parsed.snapshots:
            snap_uri = parsed.snapshots[0][0]
            snap_node = graph.add_node(NODE_SNAPSHOT, f"snapshot:{snap_uri}")
            graph.add_edge(snap_node, notif_node, REL_LISTED_IN)
            snapshot_bytes = self._fetch_listed(snap_uri, target, inventory, graph, snap_node)
            if snapshot_bytes is not None:
                try:
                    _, _, snap_objects = rrdpclient.parse_snapshot(snapshot_bytes)
                except RrdpParseError:
                    snap_objects = {}
                for obj_uri, data in snap_objects.items():
                    objects[obj_uri] = data
                    inventory[obj_uri] = "ok"
                    node = graph.add_node(NODE_OBJECT, f"object:{obj_uri}")
                    graph.add_edge(node, snap_node, REL_FETCHED_FROM)

        for serial, delta_uri, _ in parsed.deltas:
            delta_node = graph.add_node(NODE_DELTA, f"delta:{delta_uri}")
            graph.add_edge(delta_node, notif_node, REL_LISTED_IN)
            data = self._fetch_listed(delta_uri, target, inventory, graph, delta_node)
            if data is None:
                delta_bytes.append(b"")
                continue
            delta_bytes.append(data)
            try:
                _, _, entries = rrdpclient.parse_delta(data)
                parsed_deltas += 1
            except RrdpParseError:
                entries = []
            for entry in entries:
                if entry.kind != "publish" or entry.data is None:
                    continue
                objects.setdefault(entry.uri, entry.data)
                inventory.setdefault(entry.uri, "ok")
                node = graph.add_node(NODE_OBJECT, f"object:{entry.uri}")
                graph.add_edge(node, delta_node, REL_FETCHED_FROM)

        compliance = check_rrdp_syntax(notification, snapshot_bytes, delta_bytes)
        for check, ok in compliance.checks.items():
            check_node = graph.add_node(NODE_CHECK, f"check:{check}:{uri}")
            graph.add_edge(check_node, notif_node, REL_CAUSED_BY)
            if not ok:
                failure = graph.add_node(NODE_FAILURE, f"failure:{check}:{uri}")
                graph.add_edge(failure, check_node, REL_CAUSED_BY)

        self._check_manifest_listings(objects, inventory, graph)
        return TargetResult(uri, compliance, tls, inventory, objects=objects, graph=graph,
                            listed_delta_count=listed_deltas, parsed_delta_count=parsed_deltas)

    def _fetch_listed(self, uri: str, target: CrawlTarget, inventory: Dict[str, str],
                      graph: ProvenanceGraph, node: str) -> Optional[bytes]:
        try:
            data = self._get(uri, target.per_host_interval)
            inventory[uri] = "ok"
            return data
        except (FetchError, TlsVerificationError) as exc:
            inventory[uri] = "unavailable"
            failure = graph.add_node(NODE_FAILURE, f"failure:fetch:{uri}")
            graph.add_edge(failure, node, REL_CAUSED_BY)
            return None

    def _check_manifest_listings(self, objects: Dict[str, bytes],
                                 inventory: Dict[str, str], graph: ProvenanceGraph):
        """Hash-check every manifest entry against the fetched inventory;
        mismatches become failures with full provenance."""
        from . import cms

        for mft_uri, data in sorted(objects.items()):
            if not mft_uri.endswith(".mft"):
                continue
            try:
                mft = rpkiobjects.parse_manifest(data)
            except Exception:
                mft_node = graph.add_node(NODE_OBJECT, f"object:{mft_uri}")
                failure = graph.add_node(NODE_FAILURE, f"failure:manifest-parse:{mft_uri}")
                graph.add_edge(failure, mft_node, REL_CAUSED_BY)
                continue
            base = mft_uri.rsplit("/", 1)[0]
            mft_node = graph.add_node(NODE_OBJECT, f"object:{mft_uri}")
            for name, want in mft.file_list:
                entry_uri = f"{base}/{urllib.parse.quote(name, safe='.-_~')}"
                entry_node = graph.add_node(NODE_OBJECT, f"object:{entry_uri}")
                graph.add_edge(entry_node, mft_node, REL_LISTED_IN)
                present = objects.get(entry_uri)
                if present is None:
                    inventory.setdefault(entry_uri, "missing")
                    check = graph.add_node(NODE_CHECK, f"check:listing:{entry_uri}")
                    graph.add_edge(check, entry_node, REL_CAUSED_BY)
                    failure = graph.add_node(NODE_FAILURE, f"failure:listing:{entry_uri}")
                    graph.add_edge(failure, check, REL_CAUSED_BY)
                elif cms.hash_object(present) != want:
                    check = graph.add_node(NODE_CHECK, f"check:hash:{entry_uri}")
                    graph.add_edge(check, entry_node, REL_HASH_OF)
                    failure = graph.add_node(NODE_FAILURE, f"failure:hash:{entry_uri}")
                    graph.add_edge(failure, check, REL_CAUSED_BY)

    def _tls_for(self, uri: str) -> Optional[TlsFinding]:
        if self.mode == MODE_SIMULATOR and not uri.startswith("https://127."):
            return None  # in-memory transports have no TLS surface
        try:
            return check_tls(uri, trust_ca_pem=self.trust_ca_pem)
        except Exception:
            return None


def crawl(targets: Sequence[CrawlTarget], transport, mode: str = MODE_SIMULATOR,
          trust_ca_pem: Optional[bytes] = None) -> Dict[str, TargetResult]:
    crawler = Crawler(transport, mode=mode, trust_ca_pem=trust_ca_pem)
    results = {}
    for target in targets:
        results[target.notification_uri] = crawler.crawl_target(target)
    return results


# ---------------------------------------------------------------------------
# Contacts and alert diffs
# ---------------------------------------------------------------------------

def extract_gbr_contacts(objects: Dict[str, bytes]) -> Dict[str, List[str]]:
    """Repository host -> contact strings from well-formed vCards; broken
    vCards are skipped, not fatal."""
    contacts: Dict[str, List[str]] = {}
    for uri, data in sorted(objects.items()):
        if not uri.endswith(".gbr"):
            continue
        try:
            gbr = rpkiobjects.parse_gbr(data)
        except Exception:
            continue
        host = urllib.parse.urlsplit(uri).netloc
        rendered = [f"{prop}={value}" for prop, value in gbr.vcard]
        contacts.setdefault(host, []).extend(rendered)
    return contacts


@dataclass
class AlertEntry:
    failure_id: str
    first_seen: str
    contact: Optional[str] = None

    def to_dict(self) -> dict:
        return {"failure_id": self.failure_id, "first_seen": self.first_seen,
                "contact": self.contact}


@dataclass
class AlertDiff:
    new_failures: List[AlertEntry]
    resolved_failures: List[AlertEntry]
    persisting_failures: List[AlertEntry]

    def to_dict(self) -> dict:
        return {
            "new_failures": [e.to_dict() for e in self.new_failures],
            "resolved_failures": [e.to_dict() for e in self.resolved_failures],
            "persisting_failures": [e.to_dict() for e in self.persisting_failures],
        }


@dataclass
class RunRecord:
    timestamp: str
    failures: Dict[str, str]            # failure id -> first_seen timestamp
    contacts: Dict[str, List[str]] = field(default_factory=dict)

    @classmethod
    def from_results(cls, results: Dict[str, TargetResult],
                     timestamp: Optional[str] = None) -> "RunRecord":
        stamp = timestamp or datetime.datetime.now(datetime.timezone.utc).isoformat()
        failures = {}
        contacts: Dict[str, List[str]] = {}
        for result in results.values():
            for failure in result.failure_ids():
                failures[failure] = stamp
            for host, found in extract_gbr_contacts(result.objects).items():
                contacts.setdefault(host, []).extend(found)
        return cls(timestamp=stamp, failures=failures, contacts=contacts)

    def to_dict(self) -> dict:
        return {"timestamp": self.timestamp, "failures": self.failures,
                "contacts": self.contacts}

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(timestamp=data["timestamp"], failures=dict(data["failures"]),
                   contacts={k: list(v) for k, v in data.get("contacts", {}).items()})


def _contact_for(failure_id: str, contacts: Dict[str, List[str]]) -> Optional[str]:
    for host, found in contacts.items():
        if host and host in failure_id and found:
            return "; ".join(found)
    return None


def diff_alerts(previous: RunRecord, current: RunRecord) -> AlertDiff:
    """Partition the union of both runs' failures into new, resolved, and
    persisting; contacts attach when a Ghostbusters record covers the
    failing publication point."""
    contacts = {**previous.contacts, **current.contacts}
    new, resolved, persisting = [], [], []
    for failure_id in sorted(set(previous.failures) | set(current.failures)):
        contact = _contact_for(failure_id, contacts)
        if failure_id in previous.failures and failure_id in current.failures:
            persisting.append(AlertEntry(failure_id, previous.failures[failure_id], contact))
        elif failure_id in current.failures:
            new.append(AlertEntry(failure_id, current.failures[failure_id], contact))
        else:
            resolved.append(AlertEntry(failure_id, previous.failures[failure_id], contact))
    return AlertDiff(new, resolved, persisting)


# -- run-state persistence (append-only) --------------------------------------

def save_run(state_dir: str, record: RunRecord) -> str:
    os.makedirs(state_dir, exist_ok=True)
    safe_stamp = record.timestamp.replace(":", "").replace("+", "Z")
    path = os.path.join(state_dir, f"run-{safe_stamp}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
    return path


def load_runs(state_dir: str) -> List[RunRecord]:
    if not os.path.isdir(state_dir):
        return []
    records = []
    for name in sorted(os.listdir(state_dir)):
        if name.startswith("run-") and name.endswith(".json"):
            with open(os.path.join(state_dir, name), "r", encoding="utf-8") as fh:
                records.append(RunRecord.from_dict(json.load(fh)))
    return records
