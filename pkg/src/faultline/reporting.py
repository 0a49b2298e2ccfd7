"""Validator output: VRPs, normalized errors, stats, and the cache.

Error codes form a closed enum with stable names because fingerprint
de-duplication hashes them; free-text messages are auxiliary only.
Reports serialize deterministically (sorted VRPs, errors sorted by
(object uri, code), sorted JSON keys).
"""

from __future__ import annotations

import base64
import hashlib
import ipaddress
import json
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from . import iputil


class ErrorCode(Enum):
    # Extension policy
    UNKNOWN_CRITICAL_EXT = "UNKNOWN_CRITICAL_EXT"
    DUPLICATE_EXT = "DUPLICATE_EXT"
    UNDECODABLE_EXT = "UNDECODABLE_EXT"
    FORBIDDEN_EXT = "FORBIDDEN_EXT"
    MISSING_MANDATORY_EXT = "MISSING_MANDATORY_EXT"
    # Certificate policy extension
    UNSUPPORTED_POLICY_OID = "UNSUPPORTED_POLICY_OID"
    EXTRA_QUALIFIER = "EXTRA_QUALIFIER"
    INCONSISTENT_POLICY_OIDS = "INCONSISTENT_POLICY_OIDS"
    # Names
    EXTRA_ISSUER_ATTRIBUTE = "EXTRA_ISSUER_ATTRIBUTE"
    ISSUER_SUBJECT_MISMATCH = "ISSUER_SUBJECT_MISMATCH"
    # Resources
    RESOURCE_OVERCLAIM = "RESOURCE_OVERCLAIM"
    ILLEGAL_AS_NUMBER = "ILLEGAL_AS_NUMBER"
    IP_NOT_CANONICAL = "IP_NOT_CANONICAL"
    ROA_MAXLENGTH_INVALID = "ROA_MAXLENGTH_INVALID"
    # Object integrity
    NON_CANONICAL_ENCODING = "NON_CANONICAL_ENCODING"
    MALFORMED_OBJECT = "MALFORMED_OBJECT"
    SIGNATURE_INVALID = "SIGNATURE_INVALID"
    CMS_INVALID = "CMS_INVALID"
    UNSUPPORTED_SIGNATURE_ALG = "UNSUPPORTED_SIGNATURE_ALG"
    CERT_EXPIRED = "CERT_EXPIRED"
    CERT_NOT_YET_VALID = "CERT_NOT_YET_VALID"
    CERT_REVOKED = "CERT_REVOKED"
    SIGNED_OBJECT_URI_MISMATCH = "SIGNED_OBJECT_URI_MISMATCH"
    EXTRA_SIA_URI = "EXTRA_SIA_URI"
    # Manifest / CRL
    MISSING_LISTED_FILE = "MISSING_LISTED_FILE"
    HASH_MISMATCH = "HASH_MISMATCH"
    MANIFEST_NUMBER_NOT_INCREMENTED = "MANIFEST_NUMBER_NOT_INCREMENTED"
    STALE_MANIFEST = "STALE_MANIFEST"
    MISSING_MANIFEST = "MISSING_MANIFEST"
    MISSING_CRL = "MISSING_CRL"
    STALE_CRL = "STALE_CRL"
    # Repository / transport
    DELTA_HASH_MISMATCH = "DELTA_HASH_MISMATCH"
    DUPLICATE_DELTA_ENTRY = "DUPLICATE_DELTA_ENTRY"
    REPO_UNAVAILABLE = "REPO_UNAVAILABLE"
    TRANSFER_TOO_SLOW = "TRANSFER_TOO_SLOW"
    TIMEOUT = "TIMEOUT"
    TLS_VALIDATION_FAILED = "TLS_VALIDATION_FAILED"
    DUBIOUS_HOST = "DUBIOUS_HOST"
    # Chain shape
    DEPTH_LIMIT_EXCEEDED = "DEPTH_LIMIT_EXCEEDED"
    BREADTH_LIMIT_EXCEEDED = "BREADTH_LIMIT_EXCEEDED"
    # Trust anchor
    TAL_KEY_MISMATCH = "TAL_KEY_MISMATCH"
    TAL_UNREACHABLE = "TAL_UNREACHABLE"


@dataclass(frozen=True)
class Issue:
    code: ErrorCode
    object_uri: str
    field_path: str = ""
    message: str = ""

    def sort_key(self):
        return (self.object_uri, self.code.value, self.field_path, self.message)

    def to_dict(self) -> dict:
        return {
            "code": self.code.value,
            "object_uri": self.object_uri,
            "field_path": self.field_path,
            "message": self.message,
        }


@dataclass(frozen=True, order=True)
class Vrp:
    asn: int
    family: int
    addr: int
    length: int
    max_length: int
    trust_anchor: str = ""
    source_uri: str = ""

    def __post_init__(self):
        bits = iputil.family_bits(self.family)
        if not 0 <= self.length <= self.max_length <= bits:
            raise ValueError("VRP length/maxLength out of range")
        if not 0 <= self.asn <= 2**32 - 1:
            raise ValueError("VRP ASN out of range")

    def prefix_str(self) -> str:
        addr = ipaddress.IPv4Address(self.addr) if self.family == iputil.V4 \
            else ipaddress.IPv6Address(self.addr)
        return f"{addr}/{self.length}"

    def payload(self) -> tuple:
        """The routing-relevant tuple, ignoring provenance fields."""
        return (self.asn, self.family, self.addr, self.length, self.max_length)

    def csv_row(self) -> str:
        return f"AS{self.asn},{self.prefix_str()},{self.max_length},{self.trust_anchor}"

    def to_dict(self) -> dict:
        return {
            "asn": self.asn,
            "prefix": self.prefix_str(),
            "max_length": self.max_length,
            "trust_anchor": self.trust_anchor,
            "source_uri": self.source_uri,
        }


@dataclass
class Stats:
    objects_fetched: int = 0
    objects_accepted: int = 0
    cas_visited: int = 0
    max_depth_reached: int = 0
    fallbacks_taken: List[Tuple[str, str]] = field(default_factory=list)
    repo_elapsed: Dict[str, float] = field(default_factory=dict)
    fetch_durations: Dict[str, float] = field(default_factory=dict)
    knob_events: set = field(default_factory=set)

    def note_knob(self, knob: str, branch: str):
        self.knob_events.add(f"{knob}:{branch}")

    def to_dict(self) -> dict:
        # repo_elapsed stays runtime-only: wall-clock values would break
        # the byte-identical-report determinism guarantee.
        return {
            "objects_fetched": self.objects_fetched,
            "objects_accepted": self.objects_accepted,
            "cas_visited": self.cas_visited,
            "max_depth_reached": self.max_depth_reached,
            "fallbacks_taken": [list(f) for f in self.fallbacks_taken],
            "knob_events": sorted(self.knob_events),
        }


@dataclass
class ValidationReport:
    vrps: Tuple[Vrp, ...] = ()
    errors: Tuple[Issue, ...] = ()
    stats: Stats = field(default_factory=Stats)

    def finalized(self) -> "ValidationReport":
        return ValidationReport(
            vrps=tuple(sorted(set(self.vrps))),
            errors=tuple(sorted(set(self.errors), key=Issue.sort_key)),
            stats=self.stats,
        )

    def vrp_payloads(self) -> frozenset:
        return frozenset(v.payload() for v in self.vrps)

    def error_codes(self) -> Tuple[str, ...]:
        return tuple(sorted({e.code.value for e in self.errors}))

    def errors_for(self, uri_prefix: str) -> Tuple[Issue, ...]:
        return tuple(e for e in self.errors if e.object_uri.startswith(uri_prefix))

    def to_dict(self) -> dict:
        return {
            "vrps": [v.to_dict() for v in self.vrps],
            "errors": [e.to_dict() for e in self.errors],
            "stats": self.stats.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def vrps_csv(self) -> str:
        lines = ["ASN,IP Prefix,Max Length,Trust Anchor"]
        lines.extend(v.csv_row() for v in self.vrps)
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------

@dataclass
class CacheEntry:
    session_id: str
    serial: int
    objects: Dict[str, bytes] = field(default_factory=dict)
    # manifest uri -> (manifest number, object sha256 hex)
    manifest_numbers: Dict[str, Tuple[int, str]] = field(default_factory=dict)

    def clone(self) -> "CacheEntry":
        return CacheEntry(self.session_id, self.serial, dict(self.objects),
                          dict(self.manifest_numbers))


class CacheState:
    """Per-repository survivors of the last successfully applied update."""

    def __init__(self):
        self.entries: Dict[str, CacheEntry] = {}

    def get(self, notify_uri: str) -> Optional[CacheEntry]:
        return self.entries.get(notify_uri)

    def put(self, notify_uri: str, entry: CacheEntry):
        self.entries[notify_uri] = entry

    def clone(self) -> "CacheState":
        out = CacheState()
        out.entries = {k: v.clone() for k, v in self.entries.items()}
        return out

    # -- persistence ---------------------------------------------------------

    def save(self, directory: str):
        os.makedirs(directory, exist_ok=True)
        index = {}
        for notify_uri, entry in sorted(self.entries.items()):
            repo_key = hashlib.sha256(notify_uri.encode()).hexdigest()[:16]
            repo_dir = os.path.join(directory, repo_key)
            os.makedirs(repo_dir, exist_ok=True)
            files = {}
            for uri, data in sorted(entry.objects.items()):
                fname = hashlib.sha256(uri.encode()).hexdigest()[:24] + ".bin"
                with open(os.path.join(repo_dir, fname), "wb") as fh:
                    fh.write(data)
                files[uri] = fname
            index[notify_uri] = {
                "dir": repo_key,
                "session_id": entry.session_id,
                "serial": entry.serial,
                "manifest_numbers": {k: list(v) for k, v in entry.manifest_numbers.items()},
                "files": files,
            }
        with open(os.path.join(directory, "cache.json"), "w", encoding="utf-8") as fh:
            json.dump(index, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, directory: str) -> "CacheState":
        state = cls()
        index_path = os.path.join(directory, "cache.json")
        if not os.path.exists(index_path):
            return state
        with open(index_path, "r", encoding="utf-8") as fh:
            index = json.load(fh)
        for notify_uri, meta in index.items():
            objects = {}
            for uri, fname in meta["files"].items():
                with open(os.path.join(directory, meta["dir"], fname), "rb") as fh:
                    objects[uri] = fh.read()
            state.put(notify_uri, CacheEntry(
                session_id=meta["session_id"],
                serial=meta["serial"],
                objects=objects,
                manifest_numbers={k: (int(v[0]), str(v[1]))
                                  for k, v in meta["manifest_numbers"].items()},
            ))
        return state
