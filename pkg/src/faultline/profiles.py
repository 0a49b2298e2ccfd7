"""Interpretation profiles: one explicit knob per RFC ambiguity.

A profile is a complete bundle of policy decisions. The four built-ins
are behavior models pinned to Routinator 0.14.2, Fort 1.6.6, and
rpki-client 9.5 era observations, plus a literal-reading STRICT_RFC
baseline; they are not emulators and drift from future releases is
expected. Field defaults equal the STRICT_RFC profile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from typing import Dict, Optional, Tuple

from . import oids as _oids

# Knob value constants (strings so profiles serialize naturally).
REJECT = "REJECT"
ACCEPT = "ACCEPT"
IGNORE = "IGNORE"
ENFORCE = "ENFORCE"
APPLY_RECONSIDERED = "APPLY_RECONSIDERED"
ALLOW_ZERO_OR_ONE = "ALLOW_ZERO_OR_ONE"
FORBID = "FORBID"
ACCEPT_IF_ON_ALLOWLIST = "ACCEPT_IF_ON_ALLOWLIST"
IGNORE_PER_8182 = "IGNORE_PER_8182"
DER_STRICT = "DER_STRICT"
BER_TOLERANT = "BER_TOLERANT"
PRIORITIZE_MANIFEST = "PRIORITIZE_MANIFEST"
DELETE_THEN_FAIL = "DELETE_THEN_FAIL"
PERMANENT_FAIL = "PERMANENT_FAIL"
RETRY_ONCE_AFTER = "RETRY_ONCE_AFTER"
TWOS_COMPLEMENT_REJECT_NEGATIVE = "TWOS_COMPLEMENT_REJECT_NEGATIVE"
UNSIGNED = "UNSIGNED"
LENIENT = "LENIENT"
REJECT_MERGEABLE_AND_RANGE_ANOMALY = "REJECT_MERGEABLE_AND_RANGE_ANOMALY"
REJECT_ALL_NONCANONICAL = "REJECT_ALL_NONCANONICAL"
FALLBACK_SNAPSHOT = "FALLBACK_SNAPSHOT"
ABORT_TO_ALTERNATE = "ABORT_TO_ALTERNATE"
IGNORE_DUPLICATE = "IGNORE_DUPLICATE"
ABORT_USE_CACHE = "ABORT_USE_CACHE"
ENFORCE_ON_DELTA = "ENFORCE_ON_DELTA"

_CHOICES: Dict[str, Tuple[str, ...]] = {
    "rfc8360_oids": (REJECT, APPLY_RECONSIDERED),
    "cp_qualifier": (ALLOW_ZERO_OR_ONE, FORBID),
    "extra_cp_qualifiers": (REJECT, IGNORE),
    "unknown_critical_extension": (REJECT, ACCEPT_IF_ON_ALLOWLIST),
    "duplicate_unknown_extension": (REJECT, IGNORE),
    "undecodable_noncritical_extension": (REJECT, IGNORE),
    "unknown_noncritical_extension": (REJECT, IGNORE),
    "https_cert_validation": (ENFORCE, IGNORE_PER_8182),
    "encoding_ruleset": (DER_STRICT, BER_TOLERANT),
    "withdraw_vs_manifest": (PRIORITIZE_MANIFEST, DELETE_THEN_FAIL),
    "issuer_extra_attributes": (REJECT, ACCEPT),
    "http_5xx": (PERMANENT_FAIL, RETRY_ONCE_AFTER),
    "asid_interpretation": (TWOS_COMPLEMENT_REJECT_NEGATIVE, UNSIGNED),
    "ip_canonicality": (LENIENT, REJECT_MERGEABLE_AND_RANGE_ANOMALY, REJECT_ALL_NONCANONICAL),
    "duplicate_delta_entry": (FALLBACK_SNAPSHOT, ABORT_TO_ALTERNATE, IGNORE_DUPLICATE),
    "delta_hash_mismatch": (FALLBACK_SNAPSHOT, ABORT_USE_CACHE),
    "manifest_number_increment": (ENFORCE_ON_DELTA, IGNORE),
    "dubious_host_uris": (REJECT, ACCEPT),
    "ecc_signatures": (ACCEPT, REJECT),
    "signed_object_uri_match": (ENFORCE, IGNORE),
    "issuer_subject_name_match": (ENFORCE, IGNORE),
    "extra_sia_signedobject_uris": (REJECT, IGNORE),
}


@dataclass(frozen=True)
class InterpretationProfile:
    name: str = "STRICT_RFC"
    rfc8360_oids: str = APPLY_RECONSIDERED
    require_consistent_policy_oids: bool = False
    cp_qualifier: str = ALLOW_ZERO_OR_ONE
    extra_cp_qualifiers: str = REJECT
    unknown_critical_extension: str = REJECT
    critical_extension_allowlist: Tuple[str, ...] = ()
    duplicate_unknown_extension: str = REJECT
    undecodable_noncritical_extension: str = REJECT
    unknown_noncritical_extension: str = REJECT
    https_cert_validation: str = IGNORE_PER_8182
    encoding_ruleset: str = DER_STRICT
    withdraw_vs_manifest: str = PRIORITIZE_MANIFEST
    issuer_extra_attributes: str = REJECT
    max_chain_depth: int = 100
    max_children_breadth: Optional[int] = 100  # None means UNLIMITED
    http_5xx: str = PERMANENT_FAIL
    http_5xx_retry_seconds: float = 4.0
    min_transfer_rate: Optional[Tuple[float, float]] = None  # (bytes/s, grace s)
    rrdp_timeout_seconds: float = 600.0
    asid_interpretation: str = TWOS_COMPLEMENT_REJECT_NEGATIVE
    ip_canonicality: str = REJECT_ALL_NONCANONICAL
    duplicate_delta_entry: str = FALLBACK_SNAPSHOT
    delta_hash_mismatch: str = FALLBACK_SNAPSHOT
    manifest_number_increment: str = ENFORCE_ON_DELTA
    dubious_host_uris: str = ACCEPT
    ecc_signatures: str = REJECT
    signed_object_uri_match: str = ENFORCE
    issuer_subject_name_match: str = ENFORCE
    extra_sia_signedobject_uris: str = REJECT

    def __post_init__(self):
        for knob, allowed in _CHOICES.items():
            if getattr(self, knob) not in allowed:
                raise ValueError(f"{knob}={getattr(self, knob)!r} not in {allowed}")
        if self.max_chain_depth < 1:
            raise ValueError("max_chain_depth must be positive")
        if self.max_children_breadth is not None and self.max_children_breadth < 1:
            raise ValueError("max_children_breadth must be positive or UNLIMITED")
        if self.rrdp_timeout_seconds <= 0:
            raise ValueError("rrdp_timeout_seconds must be positive")

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "max_children_breadth":
                value = "UNLIMITED" if value is None else value
            elif f.name == "min_transfer_rate":
                value = None if value is None else {
                    "bytes_per_second": value[0], "grace_seconds": value[1]}
            elif f.name == "critical_extension_allowlist":
                value = list(value)
            out[f.name] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "InterpretationProfile":
        kwargs = dict(data)
        if kwargs.get("max_children_breadth") == "UNLIMITED":
            kwargs["max_children_breadth"] = None
        rate = kwargs.get("min_transfer_rate")
        if isinstance(rate, dict):
            kwargs["min_transfer_rate"] = (rate["bytes_per_second"], rate["grace_seconds"])
        elif isinstance(rate, list):
            kwargs["min_transfer_rate"] = tuple(rate)
        allow = kwargs.get("critical_extension_allowlist")
        if isinstance(allow, list):
            kwargs["critical_extension_allowlist"] = tuple(allow)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "InterpretationProfile":
        return cls.from_dict(json.loads(text))

    def with_knobs(self, **kwargs) -> "InterpretationProfile":
        return replace(self, **kwargs)


STRICT_RFC = InterpretationProfile(name="STRICT_RFC")

RTN_LIKE = InterpretationProfile(
    name="RTN_LIKE",
    rfc8360_oids=APPLY_RECONSIDERED,
    require_consistent_policy_oids=False,
    extra_cp_qualifiers=IGNORE,
    unknown_critical_extension=REJECT,
    duplicate_unknown_extension=IGNORE,
    undecodable_noncritical_extension=IGNORE,
    unknown_noncritical_extension=IGNORE,
    https_cert_validation=ENFORCE,
    encoding_ruleset=BER_TOLERANT,
    withdraw_vs_manifest=PRIORITIZE_MANIFEST,
    issuer_extra_attributes=ACCEPT,
    max_chain_depth=31,
    max_children_breadth=None,
    http_5xx=PERMANENT_FAIL,
    min_transfer_rate=None,
    rrdp_timeout_seconds=360.0,
    asid_interpretation=TWOS_COMPLEMENT_REJECT_NEGATIVE,
    ip_canonicality=LENIENT,
    duplicate_delta_entry=FALLBACK_SNAPSHOT,
    delta_hash_mismatch=FALLBACK_SNAPSHOT,
    manifest_number_increment=ENFORCE_ON_DELTA,
    dubious_host_uris=REJECT,
    ecc_signatures=REJECT,
    signed_object_uri_match=IGNORE,
    issuer_subject_name_match=IGNORE,
    extra_sia_signedobject_uris=IGNORE,
)

FORT_LIKE = InterpretationProfile(
    name="FORT_LIKE",
    rfc8360_oids=APPLY_RECONSIDERED,
    require_consistent_policy_oids=True,
    extra_cp_qualifiers=REJECT,
    unknown_critical_extension=REJECT,
    duplicate_unknown_extension=REJECT,
    undecodable_noncritical_extension=REJECT,
    unknown_noncritical_extension=IGNORE,
    https_cert_validation=ENFORCE,
    encoding_ruleset=BER_TOLERANT,
    withdraw_vs_manifest=DELETE_THEN_FAIL,
    issuer_extra_attributes=REJECT,
    max_chain_depth=30,
    max_children_breadth=None,
    http_5xx=RETRY_ONCE_AFTER,
    http_5xx_retry_seconds=4.0,
    min_transfer_rate=(10000.0, 24.0),
    rrdp_timeout_seconds=24.0,  # rate-guard horizon; unconfirmed by sources
    asid_interpretation=UNSIGNED,
    ip_canonicality=REJECT_ALL_NONCANONICAL,
    duplicate_delta_entry=IGNORE_DUPLICATE,
    delta_hash_mismatch=FALLBACK_SNAPSHOT,
    manifest_number_increment=IGNORE,
    dubious_host_uris=ACCEPT,
    ecc_signatures=REJECT,
    signed_object_uri_match=ENFORCE,
    issuer_subject_name_match=ENFORCE,
    extra_sia_signedobject_uris=REJECT,
)

RPC_LIKE = InterpretationProfile(
    name="RPC_LIKE",
    rfc8360_oids=REJECT,
    require_consistent_policy_oids=False,
    extra_cp_qualifiers=REJECT,
    unknown_critical_extension=ACCEPT_IF_ON_ALLOWLIST,
    critical_extension_allowlist=(_oids.SUBJECT_ALT_NAME,),
    duplicate_unknown_extension=REJECT,
    undecodable_noncritical_extension=REJECT,
    unknown_noncritical_extension=IGNORE,
    https_cert_validation=ENFORCE,
    encoding_ruleset=BER_TOLERANT,
    withdraw_vs_manifest=PRIORITIZE_MANIFEST,
    issuer_extra_attributes=REJECT,
    max_chain_depth=11,
    max_children_breadth=None,
    http_5xx=PERMANENT_FAIL,
    min_transfer_rate=None,
    rrdp_timeout_seconds=900.0,
    asid_interpretation=TWOS_COMPLEMENT_REJECT_NEGATIVE,
    ip_canonicality=REJECT_MERGEABLE_AND_RANGE_ANOMALY,
    duplicate_delta_entry=ABORT_TO_ALTERNATE,
    delta_hash_mismatch=ABORT_USE_CACHE,
    manifest_number_increment=ENFORCE_ON_DELTA,
    dubious_host_uris=ACCEPT,
    ecc_signatures=ACCEPT,
    signed_object_uri_match=IGNORE,
    issuer_subject_name_match=ENFORCE,
    extra_sia_signedobject_uris=IGNORE,
)

BUILTIN_PROFILES: Dict[str, InterpretationProfile] = {
    p.name: p for p in (RTN_LIKE, FORT_LIKE, RPC_LIKE, STRICT_RFC)
}

# Canonical comparison order used by scenario matrices and fingerprints.
PROFILE_ORDER = ("RTN_LIKE", "FORT_LIKE", "RPC_LIKE", "STRICT_RFC")


def get_profile(name_or_path: str) -> InterpretationProfile:
    """Resolve a built-in name or a profile JSON file path."""
    if name_or_path in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name_or_path]
    with open(name_or_path, "r", encoding="utf-8") as fh:
        return InterpretationProfile.from_json(fh.read())
