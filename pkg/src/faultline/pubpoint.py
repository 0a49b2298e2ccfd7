"""Publication-point state: object map, delta log, and RRDP XML.

A RepositoryState is an immutable value; every mutation batch returns a
new state with the serial advanced by one and a delta record appended.
The XML emitters take the fault plan so that misbehavior (wrong
namespace, duplicated entries, broken hashes) is injected exactly where
a faulty repository would produce it.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
import uuid
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

RRDP_NS = "http://www.ripe.net/rpki/rrdp"

PUBLISH = "publish"
WITHDRAW = "withdraw"

# Fault kinds.
HTTP_STATUS = "http_status"
RATE_LIMIT = "rate_limit"
BROKEN_DELTA_HASH = "broken_delta_hash"
DUPLICATE_DELTA_ENTRY = "duplicate_delta_entry"
WITHDRAW_KEEP_IN_MANIFEST = "withdraw_keep_in_manifest"
DEEP_CHAIN = "deep_chain"
WIDE_CHAIN = "wide_chain"
TLS_CERT = "tls_cert"
WRONG_XML_NAMESPACE = "wrong_xml_namespace"
MULTIPLE_SNAPSHOT_ENTRIES = "multiple_snapshot_entries"
NONCONTIGUOUS_DELTAS = "noncontiguous_deltas"
NON_ASCII_XML = "non_ascii_xml"
WRONG_VERSION_ATTRIBUTE = "wrong_version_attribute"

TLS_VALID = "VALID"
TLS_SELF_SIGNED = "SELF_SIGNED"
TLS_EXPIRED = "EXPIRED"
TLS_MALFORMED = "MALFORMED"
TLS_NONE = "NONE"

_FAULT_KINDS = {
    HTTP_STATUS, RATE_LIMIT, BROKEN_DELTA_HASH, DUPLICATE_DELTA_ENTRY,
    WITHDRAW_KEEP_IN_MANIFEST, DEEP_CHAIN, WIDE_CHAIN, TLS_CERT,
    WRONG_XML_NAMESPACE, MULTIPLE_SNAPSHOT_ENTRIES, NONCONTIGUOUS_DELTAS,
    NON_ASCII_XML, WRONG_VERSION_ATTRIBUTE,
}


class UnknownUri(KeyError):
    """Withdraw of a URI that is not published."""


class SerialOutOfRange(IndexError):
    """Delta requested outside the retained log."""


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class Fault:
    kind: str
    code: Optional[int] = None
    path_pattern: Optional[str] = None
    bytes_per_second: Optional[int] = None
    serial: Optional[int] = None
    uri: Optional[str] = None
    depth: Optional[int] = None
    child_count: Optional[int] = None
    mode: Optional[str] = None
    wildcard_dns: bool = False
    omit_common_name: bool = False

    def __post_init__(self):
        if self.kind not in _FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")


@dataclass(frozen=True)
class FaultPlan:
    faults: Tuple[Fault, ...] = ()

    def __post_init__(self):
        for limited in (RATE_LIMIT, TLS_CERT):
            if sum(1 for f in self.faults if f.kind == limited) > 1:
                raise ValueError(f"at most one {limited} fault per plan")

    def first(self, kind: str) -> Optional[Fault]:
        for f in self.faults:
            if f.kind == kind:
                return f
        return None

    def all(self, kind: str) -> Tuple[Fault, ...]:
        return tuple(f for f in self.faults if f.kind == kind)

    def has(self, kind: str) -> bool:
        return self.first(kind) is not None

    def to_json(self) -> str:
        out = []
        for f in self.faults:
            entry = {"kind": f.kind}
            for name in ("code", "path_pattern", "bytes_per_second", "serial", "uri",
                         "depth", "child_count", "mode"):
                value = getattr(f, name)
                if value is not None:
                    entry[name] = value
            if f.wildcard_dns:
                entry["wildcard_dns"] = True
            if f.omit_common_name:
                entry["omit_common_name"] = True
            out.append(entry)
        return json.dumps(out, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FaultPlan":
        data = json.loads(text)
        return cls(tuple(Fault(**entry) for entry in data))


EMPTY_PLAN = FaultPlan()


@dataclass(frozen=True)
class DeltaEntry:
    kind: str
    uri: str
    data: Optional[bytes] = None
    hash: Optional[str] = None  # sha256 hex of replaced/withdrawn object


@dataclass(frozen=True)
class DeltaRecord:
    serial: int
    entries: Tuple[DeltaEntry, ...]


@dataclass(frozen=True)
class RepositoryState:
    host: str
    session_id: str
    serial: int = 0
    objects: Tuple[Tuple[str, bytes], ...] = ()
    delta_log: Tuple[DeltaRecord, ...] = ()

    @classmethod
    def fresh(cls, host: str, session_id: Optional[str] = None) -> "RepositoryState":
        return cls(host=host, session_id=session_id or str(uuid.uuid4()))

    def object_map(self) -> Dict[str, bytes]:
        return dict(self.objects)

    def get(self, uri: str) -> Optional[bytes]:
        for u, data in self.objects:
            if u == uri:
                return data
        return None

    def apply_batch(self, entries: Sequence[Tuple[str, str, Optional[bytes]]]) -> "RepositoryState":
        """One mutation batch: [(kind, uri, data)]; serial advances by 1."""
        objects = self.object_map()
        recorded: List[DeltaEntry] = []
        for kind, uri, data in entries:
            if kind == PUBLISH:
                previous = objects.get(uri)
                recorded.append(DeltaEntry(
                    PUBLISH, uri, data=data,
                    hash=sha256_hex(previous) if previous is not None else None,
                ))
                objects[uri] = data
            elif kind == WITHDRAW:
                if uri not in objects:
                    raise UnknownUri(uri)
                recorded.append(DeltaEntry(WITHDRAW, uri, hash=sha256_hex(objects[uri])))
                del objects[uri]
            else:
                raise ValueError(f"unknown delta entry kind {kind!r}")
        serial = self.serial + 1
        record = DeltaRecord(serial=serial, entries=tuple(recorded))
        return replace(
            self,
            serial=serial,
            objects=tuple(sorted(objects.items())),
            delta_log=self.delta_log + (record,),
        )

    def publish(self, uri: str, data: bytes) -> "RepositoryState":
        return self.apply_batch([(PUBLISH, uri, data)])

    def withdraw(self, uri: str) -> "RepositoryState":
        return self.apply_batch([(WITHDRAW, uri, None)])

    def reset_session(self, new_session_id: str) -> "RepositoryState":
        """Normal-operation session rollover: new id, serial restarts, log cleared."""
        return replace(self, session_id=new_session_id, serial=1, delta_log=())

    def delta(self, serial: int) -> DeltaRecord:
        for record in self.delta_log:
            if record.serial == serial:
                return record
        raise SerialOutOfRange(serial)


# ---------------------------------------------------------------------------
# RRDP XML
# ---------------------------------------------------------------------------

def _esc(value: str) -> str:
    return (value.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _xml_prologue(plan: FaultPlan) -> str:
    if plan.has(NON_ASCII_XML):
        return '<?xml version="1.0" encoding="UTF-8"?>\n<!-- café -->\n'
    return '<?xml version="1.0" encoding="US-ASCII"?>\n'


def _root_attrs(state: RepositoryState, plan: FaultPlan, serial: Optional[int] = None) -> str:
    attrs = []
    if not plan.has(WRONG_XML_NAMESPACE):
        attrs.append(f'xmlns="{RRDP_NS}"')
    version = "2" if plan.has(WRONG_VERSION_ATTRIBUTE) else "1"
    attrs.append(f'version="{version}"')
    attrs.append(f'session_id="{_esc(state.session_id)}"')
    attrs.append(f'serial="{serial if serial is not None else state.serial}"')
    return " ".join(attrs)


def snapshot_path(state: RepositoryState) -> str:
    return f"{state.session_id}/{state.serial}/snapshot.xml"


def delta_path(state: RepositoryState, serial: int) -> str:
    return f"{state.session_id}/{serial}/delta.xml"


def snapshot_xml(state: RepositoryState, plan: FaultPlan = EMPTY_PLAN) -> bytes:
    lines = [_xml_prologue(plan)]
    lines.append(f"<snapshot {_root_attrs(state, plan)}>\n")
    for uri, data in state.objects:
        b64 = base64.b64encode(data).decode("ascii")
        lines.append(f'  <publish uri="{_esc(uri)}">{b64}</publish>\n')
    lines.append("</snapshot>\n")
    return "".join(lines).encode("utf-8")


def delta_xml(state: RepositoryState, serial: int, plan: FaultPlan = EMPTY_PLAN) -> bytes:
    record = state.delta(serial)
    duplicates = {
        f.uri for f in plan.all(DUPLICATE_DELTA_ENTRY) if f.serial == serial
    }
    lines = [_xml_prologue(plan)]
    lines.append(f"<delta {_root_attrs(state, plan, serial=serial)}>\n")
    for entry in record.entries:
        if entry.kind == PUBLISH:
            b64 = base64.b64encode(entry.data or b"").decode("ascii")
            hash_attr = f' hash="{entry.hash}"' if entry.hash else ""
            element = f'  <publish uri="{_esc(entry.uri)}"{hash_attr}>{b64}</publish>\n'
            lines.append(element)
            if entry.uri in duplicates:
                lines.append(element)
        else:
            element = f'  <withdraw uri="{_esc(entry.uri)}" hash="{entry.hash}"/>\n'
            lines.append(element)
            if entry.uri in duplicates:
                lines.append(element)
    lines.append("</delta>\n")
    return "".join(lines).encode("utf-8")


def notification_xml(state: RepositoryState, plan: FaultPlan = EMPTY_PLAN,
                     base_url: str = "") -> bytes:
    """Notification listing the snapshot and the retained deltas.

    ``base_url`` prefixes the snapshot/delta URIs (the server mount point
    plus pubpoint host path).
    """
    base = base_url.rstrip("/") + "/" if base_url else ""
    snap = snapshot_xml(state, plan)
    lines = [_xml_prologue(plan)]
    lines.append(f"<notification {_root_attrs(state, plan)}>\n")
    snap_el = f'  <snapshot uri="{_esc(base + snapshot_path(state))}" hash="{sha256_hex(snap)}"/>\n'
    lines.append(snap_el)
    if plan.has(MULTIPLE_SNAPSHOT_ENTRIES):
        lines.append(snap_el)

    records = list(state.delta_log)
    if plan.has(NONCONTIGUOUS_DELTAS) and len(records) >= 3:
        # Drop the second-newest delta: the listing keeps older serials, so
        # a genuine gap appears (a shortened contiguous suffix would still
        # be legal). Needs at least three retained deltas.
        del records[-2]
    for record in records:
        data = delta_xml(state, record.serial, plan)
        digest = sha256_hex(data)
        broken = plan.first(BROKEN_DELTA_HASH)
        if broken is not None and broken.serial == record.serial:
            digest = sha256_hex(data + b"!broken")
        lines.append(
            f'  <delta serial="{record.serial}" '
            f'uri="{_esc(base + delta_path(state, record.serial))}" hash="{digest}"/>\n'
        )
    lines.append("</notification>\n")
    return "".join(lines).encode("utf-8")


def filelist_text(state: RepositoryState) -> bytes:
    """Alternate-channel directory listing: one "uri hash" line per object."""
    lines = [f"{uri} {sha256_hex(data)}" for uri, data in state.objects]
    return ("\n".join(lines) + "\n").encode("ascii")
