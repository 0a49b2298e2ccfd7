"""Per-certificate policy checks, each governed by profile knobs.

Every function returns a list of (code, field_path, message) tuples; an
empty list is an accept. Callers attach object URIs and decide whether a
rejection kills a single object or a subtree. Knob consultations are
recorded on the stats object so campaigns can count decision-point
coverage.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

from . import asn1, iputil, oids, profiles
from .asn1 import IntegerInterpretation, RawInteger
from .iputil import ResourceSet
from .profiles import InterpretationProfile
from .reporting import ErrorCode, Stats
from .x509build import ResourceCertificate

CheckIssue = Tuple[ErrorCode, str, str]

_NAME_ATTRS_ALLOWED = {oids.AT_COMMON_NAME, oids.AT_SERIAL_NUMBER}

_MANDATORY_ALWAYS = (
    oids.SUBJECT_KEY_IDENTIFIER,
    oids.KEY_USAGE,
    oids.CERTIFICATE_POLICIES,
    oids.SUBJECT_INFO_ACCESS,
)
_MANDATORY_NON_TA = (
    oids.AUTHORITY_KEY_IDENTIFIER,
    oids.CRL_DISTRIBUTION_POINTS,
    oids.AUTHORITY_INFO_ACCESS,
)


def check_extensions(cert: ResourceCertificate, profile: InterpretationProfile,
                     *, is_ca: bool, is_ta: bool = False,
                     stats: Optional[Stats] = None) -> List[CheckIssue]:
    issues: List[CheckIssue] = []
    stats = stats or Stats()
    counts: dict = {}
    for ext in cert.extensions:
        counts[ext.oid] = counts.get(ext.oid, 0) + 1

    flagged_dup = set()
    for ext in cert.extensions:
        known = ext.oid in oids.RPKI_CERT_EXTENSIONS
        path = f"extensions.{ext.oid}"

        if counts[ext.oid] > 1 and ext.oid not in flagged_dup:
            flagged_dup.add(ext.oid)
            if known:
                issues.append((ErrorCode.DUPLICATE_EXT, path, "duplicate extension"))
            else:
                stats.note_knob("duplicate_unknown_extension", profile.duplicate_unknown_extension)
                if profile.duplicate_unknown_extension == profiles.REJECT:
                    issues.append((ErrorCode.DUPLICATE_EXT, path, "duplicate unknown extension"))

        if known:
            if ext.decode_failed:
                issues.append((ErrorCode.UNDECODABLE_EXT, path, "extension value does not decode"))
            continue

        if ext.critical:
            stats.note_knob("unknown_critical_extension", profile.unknown_critical_extension)
            if (profile.unknown_critical_extension == profiles.ACCEPT_IF_ON_ALLOWLIST
                    and ext.oid in profile.critical_extension_allowlist):
                continue
            issues.append((ErrorCode.UNKNOWN_CRITICAL_EXT, path, "unrecognized critical extension"))
            continue

        if ext.decode_failed:
            stats.note_knob("undecodable_noncritical_extension",
                            profile.undecodable_noncritical_extension)
            if profile.undecodable_noncritical_extension == profiles.REJECT:
                issues.append((ErrorCode.UNDECODABLE_EXT, path,
                               "unknown extension value does not decode"))
            continue

        stats.note_knob("unknown_noncritical_extension", profile.unknown_noncritical_extension)
        if profile.unknown_noncritical_extension == profiles.REJECT:
            issues.append((ErrorCode.FORBIDDEN_EXT, path,
                           "extension not permitted by the resource certificate profile"))

    present = set(counts)
    mandatory = list(_MANDATORY_ALWAYS)
    if not is_ta:
        mandatory.extend(_MANDATORY_NON_TA)
    if is_ca:
        mandatory.append(oids.BASIC_CONSTRAINTS)
    for oid in mandatory:
        if oid not in present:
            issues.append((ErrorCode.MISSING_MANDATORY_EXT, f"extensions.{oid}",
                           "mandatory extension absent"))
    if oids.IP_ADDR_BLOCKS not in present and oids.AS_IDENTIFIERS not in present:
        issues.append((ErrorCode.MISSING_MANDATORY_EXT, "extensions.resources",
                       "no resource delegation extension"))
    return issues


def check_cp(cert: ResourceCertificate, profile: InterpretationProfile,
             parent_policy_oid: Optional[str] = None,
             stats: Optional[Stats] = None) -> Tuple[List[CheckIssue], Optional[str]]:
    """Validate the certificate policies extension; returns the effective
    policy OID for consistency checks down the chain."""
    issues: List[CheckIssue] = []
    stats = stats or Stats()
    ext = cert.ext(oids.CERTIFICATE_POLICIES)
    if ext is None or ext.decoded is None:
        return issues, None  # absence/decodability handled by check_extensions
    policies_list = ext.decoded
    path = "certificate_policies"
    if len(policies_list) != 1:
        issues.append((ErrorCode.UNSUPPORTED_POLICY_OID, path,
                       f"{len(policies_list)} policies; exactly one required"))
        return issues, None

    policy_oid, qualifiers = policies_list[0]
    if policy_oid == oids.CP_IPADDR_ASNUMBER_V2:
        stats.note_knob("rfc8360_oids", profile.rfc8360_oids)
        if profile.rfc8360_oids == profiles.REJECT:
            issues.append((ErrorCode.UNSUPPORTED_POLICY_OID, path,
                           "reconsidered-validation policy OID not supported"))
    elif policy_oid != oids.CP_IPADDR_ASNUMBER:
        issues.append((ErrorCode.UNSUPPORTED_POLICY_OID, path,
                       f"unexpected policy {policy_oid}"))

    stats.note_knob("cp_qualifier", profile.cp_qualifier)
    if profile.cp_qualifier == profiles.FORBID:
        if qualifiers:
            issues.append((ErrorCode.EXTRA_QUALIFIER, path, "policy qualifier not permitted"))
    else:
        baseline = 1 if qualifiers and qualifiers[0][0] == oids.CPS_QUALIFIER else 0
        extra = len(qualifiers) - baseline
        if extra > 0:
            stats.note_knob("extra_cp_qualifiers", profile.extra_cp_qualifiers)
            if profile.extra_cp_qualifiers == profiles.REJECT:
                issues.append((ErrorCode.EXTRA_QUALIFIER, path,
                               f"{extra} qualifier(s) beyond one CPS"))

    if (profile.require_consistent_policy_oids and parent_policy_oid is not None
            and policy_oid != parent_policy_oid):
        stats.note_knob("require_consistent_policy_oids", "True")
        issues.append((ErrorCode.INCONSISTENT_POLICY_OIDS, path,
                       f"policy {policy_oid} differs from issuer's {parent_policy_oid}"))
    return issues, policy_oid


def check_issuer_subject(cert: ResourceCertificate,
                         parent_cert: Optional[ResourceCertificate],
                         profile: InterpretationProfile,
                         stats: Optional[Stats] = None) -> List[CheckIssue]:
    issues: List[CheckIssue] = []
    stats = stats or Stats()
    for which, attrs in (("issuer", cert.issuer), ("subject", cert.subject)):
        extra = [oid for oid, _ in attrs if oid not in _NAME_ATTRS_ALLOWED]
        if extra:
            stats.note_knob("issuer_extra_attributes", profile.issuer_extra_attributes)
            if profile.issuer_extra_attributes == profiles.REJECT:
                issues.append((ErrorCode.EXTRA_ISSUER_ATTRIBUTE, which,
                               f"attributes beyond CommonName/serialNumber: {extra}"))
    if parent_cert is not None:
        stats.note_knob("issuer_subject_name_match", profile.issuer_subject_name_match)
        if profile.issuer_subject_name_match == profiles.ENFORCE \
                and cert.issuer != parent_cert.subject:
            issues.append((ErrorCode.ISSUER_SUBJECT_MISMATCH, "issuer",
                           "issuer name differs from issuing certificate subject"))
    return issues


def check_resources(cert: ResourceCertificate, parent_effective: Optional[ResourceSet],
                    profile: InterpretationProfile, policy_oid: Optional[str],
                    stats: Optional[Stats] = None) -> Tuple[ResourceSet, List[CheckIssue]]:
    """Containment check; returns the certificate's effective resources.

    The reconsidered algorithm (signaled by the v2 policy OID) trims
    overclaims instead of rejecting.
    """
    issues: List[CheckIssue] = []
    stats = stats or Stats()
    try:
        own = ResourceSet.build(cert.ip_resources, cert.as_resources, parent=parent_effective)
    except ValueError as exc:
        issues.append((ErrorCode.MALFORMED_OBJECT, "resources", str(exc)))
        return ResourceSet(), issues
    if parent_effective is None:
        return own, issues
    if parent_effective.contains(own):
        return own, issues
    reconsidered = (profile.rfc8360_oids == profiles.APPLY_RECONSIDERED
                    and policy_oid == oids.CP_IPADDR_ASNUMBER_V2)
    if reconsidered:
        stats.note_knob("rfc8360_oids", "reconsidered_trim")
        return own.intersection(parent_effective), issues
    issues.append((ErrorCode.RESOURCE_OVERCLAIM, "resources",
                   "resources not contained in issuing certificate"))
    return own.intersection(parent_effective), issues


_STRICT_FATAL = frozenset({
    iputil.MERGEABLE_ADJACENT_PREFIXES, iputil.RANGE_EXPRESSIBLE_AS_PREFIX,
    iputil.UNSORTED, iputil.OVERLAP,
})
_MIDDLE_FATAL = frozenset({iputil.MERGEABLE_ADJACENT_PREFIXES, iputil.UNSORTED, iputil.OVERLAP})


def check_ip_canonicality(cert: ResourceCertificate, profile: InterpretationProfile,
                          stats: Optional[Stats] = None) -> List[CheckIssue]:
    """Non-canonical delegation-extension form: three enforcement levels."""
    stats = stats or Stats()
    entries = cert.ip_resources
    if not entries:
        return []
    try:
        _, findings = iputil.canonicalize_ip_resources(entries)
    except iputil.OverlapConflict:
        findings = [iputil.OVERLAP]
    if not findings:
        return []
    stats.note_knob("ip_canonicality", profile.ip_canonicality)
    if profile.ip_canonicality == profiles.LENIENT:
        return []
    fatal = _STRICT_FATAL if profile.ip_canonicality == profiles.REJECT_ALL_NONCANONICAL \
        else _MIDDLE_FATAL
    hits = [f for f in findings if f in fatal]
    if hits:
        return [(ErrorCode.IP_NOT_CANONICAL, "ip_resources", ",".join(hits))]
    return []


def decode_roa_asid(raw: RawInteger, profile: InterpretationProfile,
                    stats: Optional[Stats] = None) -> Tuple[Optional[int], List[CheckIssue]]:
    """AS id octets under the profile's integer reading; AS numbers are
    32-bit unsigned, anything outside that is illegal."""
    stats = stats or Stats()
    stats.note_knob("asid_interpretation", profile.asid_interpretation)
    if profile.asid_interpretation == profiles.UNSIGNED:
        value = asn1.decode_integer(raw, IntegerInterpretation.UNSIGNED)
    else:
        value = asn1.decode_integer(raw, IntegerInterpretation.TWOS_COMPLEMENT)
    if value < 0:
        return None, [(ErrorCode.ILLEGAL_AS_NUMBER, "as_id",
                       f"two's-complement value {value} is negative")]
    if value > 2**32 - 1:
        return None, [(ErrorCode.ILLEGAL_AS_NUMBER, "as_id", f"{value} exceeds 32 bits")]
    return value, []
