"""Repository update processing: delta vs snapshot paths and fallbacks.

The update policy is where three of the nastiest interoperability knobs
live: what to do on a delta hash mismatch, on duplicate delta entries,
and on 5xx responses. All outcomes are reported as issues plus a record
of which fallback (snapshot, alternate channel, cache) was taken.
"""

from __future__ import annotations

import base64
import binascii
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import profiles, pubpoint
from .fetch import (
    FetchError,
    FetchLimits,
    FetchStatusError,
    FetchTimeout,
    FetchTooSlow,
    FetchUnavailable,
    TLS_ENFORCE,
    TLS_IGNORE,
    TlsVerificationError,
)
from .profiles import InterpretationProfile
from .reporting import CacheEntry, CacheState, ErrorCode, Issue, Stats

VIA_DELTA = "DELTA"
VIA_SNAPSHOT = "SNAPSHOT"
VIA_ALTERNATE = "ALTERNATE"
VIA_CACHE = "CACHE"
VIA_UNCHANGED = "UNCHANGED"
VIA_NONE = "NONE"


@dataclass(frozen=True)
class RepoRef:
    ca_repository: str
    manifest_uri: str
    notify_uri: Optional[str] = None


@dataclass
class RepoView:
    objects: Dict[str, bytes] = field(default_factory=dict)
    tombstones: Dict[str, bytes] = field(default_factory=dict)
    fetched_via: str = VIA_NONE
    fallbacks: List[str] = field(default_factory=list)
    issues: List[Issue] = field(default_factory=list)


# ---------------------------------------------------------------------------
# RRDP XML parsing (shared with the crawler)
# ---------------------------------------------------------------------------

class RrdpParseError(ValueError):
    pass


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _namespace(tag: str) -> Optional[str]:
    if tag.startswith("{"):
        return tag[1:].split("}", 1)[0]
    return None


@dataclass(frozen=True)
class NotificationFile:
    session_id: str
    serial: int
    snapshots: Tuple[Tuple[str, str], ...]        # (uri, hash)
    deltas: Tuple[Tuple[int, str, str], ...]      # (serial, uri, hash)
    namespace: Optional[str]
    version: Optional[str]


def parse_notification(data: bytes) -> NotificationFile:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise RrdpParseError(f"notification does not parse: {exc}") from exc
    if _local(root.tag) != "notification":
        raise RrdpParseError(f"unexpected root element {root.tag}")
    snapshots: List[Tuple[str, str]] = []
    deltas: List[Tuple[int, str, str]] = []
    for child in root:
        name = _local(child.tag)
        if name == "snapshot":
            snapshots.append((child.get("uri", ""), child.get("hash", "").lower()))
        elif name == "delta":
            try:
                serial = int(child.get("serial", ""))
            except ValueError as exc:
                raise RrdpParseError("delta serial is not an integer") from exc
            deltas.append((serial, child.get("uri", ""), child.get("hash", "").lower()))
    try:
        serial = int(root.get("serial", ""))
    except ValueError as exc:
        raise RrdpParseError("notification serial is not an integer") from exc
    return NotificationFile(
        session_id=root.get("session_id", ""),
        serial=serial,
        snapshots=tuple(snapshots),
        deltas=tuple(deltas),
        namespace=_namespace(root.tag),
        version=root.get("version"),
    )


@dataclass(frozen=True)
class DeltaEntryParsed:
    kind: str
    uri: str
    data: Optional[bytes] = None
    hash: Optional[str] = None


def parse_snapshot(data: bytes) -> Tuple[str, int, Dict[str, bytes]]:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise RrdpParseError(f"snapshot does not parse: {exc}") from exc
    if _local(root.tag) != "snapshot":
        raise RrdpParseError(f"unexpected root element {root.tag}")
    objects: Dict[str, bytes] = {}
    for child in root:
        if _local(child.tag) != "publish":
            continue
        uri = child.get("uri", "")
        try:
            objects[uri] = base64.b64decode((child.text or "").strip() or "", validate=False)
        except binascii.Error as exc:
            raise RrdpParseError(f"publish body for {uri} is not base64") from exc
    try:
        serial = int(root.get("serial", ""))
    except ValueError as exc:
        raise RrdpParseError("snapshot serial is not an integer") from exc
    return root.get("session_id", ""), serial, objects


def parse_delta(data: bytes) -> Tuple[str, int, List[DeltaEntryParsed]]:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise RrdpParseError(f"delta does not parse: {exc}") from exc
    if _local(root.tag) != "delta":
        raise RrdpParseError(f"unexpected root element {root.tag}")
    entries: List[DeltaEntryParsed] = []
    for child in root:
        name = _local(child.tag)
        if name == "publish":
            try:
                payload = base64.b64decode((child.text or "").strip() or "", validate=False)
            except binascii.Error as exc:
                raise RrdpParseError("publish body is not base64") from exc
            entries.append(DeltaEntryParsed("publish", child.get("uri", ""),
                                            data=payload, hash=child.get("hash")))
        elif name == "withdraw":
            entries.append(DeltaEntryParsed("withdraw", child.get("uri", ""),
                                            hash=child.get("hash")))
    try:
        serial = int(root.get("serial", ""))
    except ValueError as exc:
        raise RrdpParseError("delta serial is not an integer") from exc
    return root.get("session_id", ""), serial, entries


# ---------------------------------------------------------------------------
# Update processing
# ---------------------------------------------------------------------------

class LimitedFetcher:
    """Wraps a transport with profile limits and error classification."""

    def __init__(self, transport, profile: InterpretationProfile, time_scale: float,
                 stats: Stats, issues: List[Issue]):
        self.transport = transport
        self.profile = profile
        self.time_scale = time_scale
        self.stats = stats
        self.issues = issues
        self.tls_warned = False
        self.limits = FetchLimits(
            timeout_seconds=profile.rrdp_timeout_seconds * time_scale,
            min_rate_bytes_per_second=(profile.min_transfer_rate[0]
                                       if profile.min_transfer_rate else None),
            min_rate_grace_seconds=(profile.min_transfer_rate[1] * time_scale
                                    if profile.min_transfer_rate else None),
        )
        self.tls_policy = (TLS_IGNORE if profile.https_cert_validation == profiles.IGNORE_PER_8182
                           else TLS_ENFORCE)

    def _note_tls_warning(self, uri: str):
        if not self.tls_warned:
            self.tls_warned = True
            self.stats.note_knob("https_cert_validation", self.profile.https_cert_validation)
            self.issues.append(Issue(ErrorCode.TLS_VALIDATION_FAILED, uri,
                                     message="fetched despite TLS validation failure"))

    def _timed(self, uri: str, started: float):
        elapsed = time.monotonic() - started
        previous = self.stats.fetch_durations.get(uri, 0.0)
        if elapsed > previous:
            self.stats.fetch_durations[uri] = elapsed

    def get(self, uri: str) -> Optional[bytes]:
        attempts = 0
        while True:
            attempts += 1
            started = time.monotonic()
            try:
                result = self.transport.get(uri, self.limits, self.tls_policy)
                self._timed(uri, started)
                if result.tls_warning:
                    self._note_tls_warning(uri)
                return result.data
            except FetchStatusError as exc:
                self._timed(uri, started)
                if exc.status >= 500 and attempts == 1:
                    self.stats.note_knob("http_5xx", self.profile.http_5xx)
                    if self.profile.http_5xx == profiles.RETRY_ONCE_AFTER:
                        time.sleep(self.profile.http_5xx_retry_seconds * self.time_scale)
                        continue
                self.issues.append(Issue(ErrorCode.REPO_UNAVAILABLE, uri,
                                         message=f"HTTP {exc.status}"))
                return None
            except FetchTimeout as exc:
                self._timed(uri, started)
                self.issues.append(Issue(ErrorCode.TIMEOUT, uri, message=str(exc)))
                return None
            except FetchTooSlow as exc:
                self._timed(uri, started)
                self.stats.note_knob("min_transfer_rate", "abort")
                self.issues.append(Issue(ErrorCode.TRANSFER_TOO_SLOW, uri, message=str(exc)))
                return None
            except TlsVerificationError as exc:
                self._timed(uri, started)
                self.stats.note_knob("https_cert_validation", self.profile.https_cert_validation)
                self.issues.append(Issue(ErrorCode.TLS_VALIDATION_FAILED, uri, message=str(exc)))
                self.issues.append(Issue(ErrorCode.REPO_UNAVAILABLE, uri,
                                         message="TLS validation enforced"))
                return None
            except (FetchUnavailable, FetchError) as exc:
                self._timed(uri, started)
                self.issues.append(Issue(ErrorCode.REPO_UNAVAILABLE, uri, message=str(exc)))
                return None

    def tree(self, ca_repository: str) -> Optional[Dict[str, bytes]]:
        try:
            return self.transport.fetch_tree(ca_repository, self.limits, self.tls_policy)
        except FetchError as exc:
            self.issues.append(Issue(ErrorCode.REPO_UNAVAILABLE, ca_repository,
                                     message=f"alternate channel: {exc}"))
            return None


def process_repository_update(transport, repo: RepoRef, cache: CacheState,
                              profile: InterpretationProfile, *,
                              time_scale: float = 1.0,
                              stats: Optional[Stats] = None) -> RepoView:
    stats = stats or Stats()
    view = RepoView()
    fetcher = LimitedFetcher(transport, profile, time_scale, stats, view.issues)
    entry = cache.get(repo.notify_uri) if repo.notify_uri else None

    def use_cache(reason_fallback: bool = True) -> RepoView:
        if entry is not None:
            view.objects = dict(entry.objects)
            view.fetched_via = VIA_CACHE
            if reason_fallback:
                view.fallbacks.append(VIA_CACHE)
        else:
            view.fetched_via = VIA_NONE
        return view

    def use_alternate() -> RepoView:
        tree = fetcher.tree(repo.ca_repository)
        if tree is None:
            return use_cache()
        view.objects = tree
        view.fetched_via = VIA_ALTERNATE
        view.fallbacks.append(VIA_ALTERNATE)
        if repo.notify_uri:
            # No session/serial to record; force a snapshot on the next run.
            cache.put(repo.notify_uri, CacheEntry(
                session_id="", serial=-1, objects=dict(tree),
                manifest_numbers=dict(entry.manifest_numbers) if entry else {}))
        return view

    if not repo.notify_uri:
        return use_alternate()

    notif_bytes = fetcher.get(repo.notify_uri)
    if notif_bytes is None:
        return use_alternate()
    try:
        notif = parse_notification(notif_bytes)
    except RrdpParseError as exc:
        view.issues.append(Issue(ErrorCode.MALFORMED_OBJECT, repo.notify_uri, message=str(exc)))
        return use_alternate()

    def apply_snapshot(as_fallback: bool) -> RepoView:
        if not notif.snapshots:
            view.issues.append(Issue(ErrorCode.MALFORMED_OBJECT, repo.notify_uri,
                                     message="notification lists no snapshot"))
            return use_alternate()
        snap_uri, snap_hash = notif.snapshots[0]
        data = fetcher.get(snap_uri)
        if data is None:
            return use_alternate()
        if pubpoint.sha256_hex(data) != snap_hash:
            view.issues.append(Issue(ErrorCode.HASH_MISMATCH, snap_uri,
                                     message="snapshot hash differs from notification"))
            return use_alternate()
        try:
            session, serial, objects = parse_snapshot(data)
        except RrdpParseError as exc:
            view.issues.append(Issue(ErrorCode.MALFORMED_OBJECT, snap_uri, message=str(exc)))
            return use_alternate()
        view.objects = objects
        view.fetched_via = VIA_SNAPSHOT
        if as_fallback:
            view.fallbacks.append(VIA_SNAPSHOT)
        cache.put(repo.notify_uri, CacheEntry(
            session_id=notif.session_id, serial=notif.serial, objects=dict(objects),
            manifest_numbers=dict(entry.manifest_numbers) if entry else {}))
        return view

    if entry is not None and entry.session_id == notif.session_id:
        if entry.serial == notif.serial:
            view.objects = dict(entry.objects)
            view.fetched_via = VIA_UNCHANGED
            return view
        if entry.serial < notif.serial:
            available = {serial for serial, _, _ in notif.deltas}
            needed = range(entry.serial + 1, notif.serial + 1)
            if all(s in available for s in needed):
                return _apply_deltas(fetcher, repo, notif, entry, cache, profile,
                                     stats, view, apply_snapshot, use_alternate, use_cache,
                                     list(needed))
    return apply_snapshot(as_fallback=False)


def _apply_deltas(fetcher, repo, notif, entry, cache, profile: InterpretationProfile,
                  stats: Stats, view: RepoView, apply_snapshot, use_alternate, use_cache,
                  serials: List[int]) -> RepoView:
    delta_meta = {serial: (uri, digest) for serial, uri, digest in notif.deltas}
    objects = dict(entry.objects)
    tombstones: Dict[str, bytes] = {}
    for serial in serials:
        uri, expected_hash = delta_meta[serial]
        data = fetcher.get(uri)
        if data is None:
            return apply_snapshot(as_fallback=True)
        if pubpoint.sha256_hex(data) != expected_hash:
            view.issues.append(Issue(ErrorCode.DELTA_HASH_MISMATCH, uri,
                                     message="delta hash differs from notification"))
            stats.note_knob("delta_hash_mismatch", profile.delta_hash_mismatch)
            if profile.delta_hash_mismatch == profiles.ABORT_USE_CACHE:
                return use_cache()
            return apply_snapshot(as_fallback=True)
        try:
            _, _, entries = parse_delta(data)
        except RrdpParseError as exc:
            view.issues.append(Issue(ErrorCode.MALFORMED_OBJECT, uri, message=str(exc)))
            return apply_snapshot(as_fallback=True)

        seen: Dict[Tuple[str, str], int] = {}
        for e in entries:
            seen[(e.kind, e.uri)] = seen.get((e.kind, e.uri), 0) + 1
        duplicates = [key for key, count in seen.items() if count > 1]
        if duplicates:
            view.issues.append(Issue(
                ErrorCode.DUPLICATE_DELTA_ENTRY, uri,
                message=f"duplicate entries: {sorted(u for _, u in duplicates)}"))
            stats.note_knob("duplicate_delta_entry", profile.duplicate_delta_entry)
            if profile.duplicate_delta_entry == profiles.FALLBACK_SNAPSHOT:
                return apply_snapshot(as_fallback=True)
            if profile.duplicate_delta_entry == profiles.ABORT_TO_ALTERNATE:
                return use_alternate()
            # IGNORE_DUPLICATE: apply each distinct entry once.
        applied = set()
        for e in entries:
            key = (e.kind, e.uri)
            if key in applied:
                continue
            applied.add(key)
            if e.kind == "publish":
                objects[e.uri] = e.data or b""
            else:
                if e.uri in objects:
                    tombstones[e.uri] = objects.pop(e.uri)

    view.objects = objects
    view.tombstones = tombstones
    view.fetched_via = VIA_DELTA
    cache.put(repo.notify_uri, CacheEntry(
        session_id=notif.session_id, serial=notif.serial, objects=dict(objects),
        manifest_numbers=dict(entry.manifest_numbers)))
    return view
