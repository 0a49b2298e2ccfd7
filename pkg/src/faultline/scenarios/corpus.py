"""The scenario corpus: twelve RFC-flaw reproductions, two crash
regressions, and two field-observed VRP inconsistencies.

Every case materializes a complete repository fixture plus a fault plan
and an expectation matrix over the four built-in profiles. Builders are
deterministic; multi-phase cases advance the publication point between
validation runs so warm caches exercise the delta path.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from .. import asn1, oids, pubpoint
from ..asn1 import RawInteger
from ..cabuild import Fixture
from ..iputil import IpPrefix, IpRange, V4
from ..pubpoint import Fault, FaultPlan
from ..reporting import ErrorCode
from ..x509build import encode_ip_resources
from .model import (
    BuiltCase,
    CaseSpec,
    Scenario,
    accept,
    bounded_stall,
    depth_cutoff,
    fallback,
    reject,
)

_PRIVATE_OID = "1.3.6.1.4.1.54321.99"
_V1 = oids.CP_IPADDR_ASNUMBER
_V2 = oids.CP_IPADDR_ASNUMBER_V2

E = ErrorCode


def _fixture(notify_base=None, ta_cert_base=None, seed: int = 0) -> Fixture:
    return Fixture(seed=seed, notify_base=notify_base, ta_cert_base=ta_cert_base)


def _single_roa(notify_base=None, ta_cert_base=None, *, child_kwargs: Optional[dict] = None,
                roa_asn=None, roa_prefix: str = "10.0.77.0/24",
                roa_kwargs: Optional[dict] = None,
                mft_ee_kwargs: Optional[dict] = None) -> BuiltCase:
    fixture = _fixture(notify_base, ta_cert_base)
    ta = fixture.add_ta()
    child = ta.add_child("alpha", **(child_kwargs or {}))
    asn = roa_asn if roa_asn is not None else fixture.next_asn()
    child.add_roa("marker", asn, [roa_prefix], **(roa_kwargs or {}))
    ta.commit()
    child.commit(mft_ee_kwargs=mft_ee_kwargs)
    return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta))


def _all(expected) -> Dict[str, "object"]:
    return {"RTN_LIKE": expected, "FORT_LIKE": expected,
            "RPC_LIKE": expected, "STRICT_RFC": expected}


# ---------------------------------------------------------------------------
# S01 certificate policies / reconsidered-validation OIDs
# ---------------------------------------------------------------------------

def _s01() -> Scenario:
    def whole_pp(notify_base=None, ta_cert_base=None):
        return _single_roa(
            notify_base, ta_cert_base,
            child_kwargs={"policies": ((_V2, ()),)},
            roa_kwargs={"ee_kwargs": {"policies": ((_V2, ()),)}},
            mft_ee_kwargs={"policies": ((_V2, ()),)},
        )

    def mixed(notify_base=None, ta_cert_base=None):
        return _single_roa(notify_base, ta_cert_base,
                           child_kwargs={"policies": ((_V2, ()),)})

    one_qual = ((_V1, ((oids.CPS_QUALIFIER, "https://example.net/cps"),)),)

    def one_qualifier(notify_base=None, ta_cert_base=None):
        return _single_roa(notify_base, ta_cert_base,
                           roa_kwargs={"ee_kwargs": {"policies": one_qual}})

    two_qual = ((_V1, ((oids.CPS_QUALIFIER, "https://example.net/cps"),
                       (oids.UNOTICE_QUALIFIER, "user notice"))),)

    def extra_qualifiers(notify_base=None, ta_cert_base=None):
        return _single_roa(notify_base, ta_cert_base,
                           roa_kwargs={"ee_kwargs": {"policies": two_qual}})

    return Scenario(
        scenario_id="S01_CP_QUALIFIER",
        description="Certificate-policy OID support and qualifier handling",
        rfc_topic="RFC 6487 4.8.9 / RFC 7318 / RFC 8360 certificate policies",
        cases=[
            CaseSpec("whole_pp_v2", whole_pp, {
                "RTN_LIKE": accept(1),
                "FORT_LIKE": accept(1),
                "RPC_LIKE": reject(E.UNSUPPORTED_POLICY_OID.value),
                "STRICT_RFC": accept(1),
            }, description="entire publication point signals reconsidered validation"),
            CaseSpec("mixed_oids", mixed, {
                "RTN_LIKE": accept(1),
                "FORT_LIKE": reject(E.INCONSISTENT_POLICY_OIDS.value),
                "RPC_LIKE": reject(E.UNSUPPORTED_POLICY_OID.value),
                "STRICT_RFC": accept(1),
            }, description="CA certificate v2, its products standard"),
            CaseSpec("one_qualifier", one_qualifier, _all(accept(1)),
                     description="single CPS qualifier is the baseline"),
            CaseSpec("extra_qualifiers", extra_qualifiers, {
                "RTN_LIKE": accept(1),
                "FORT_LIKE": reject(E.EXTRA_QUALIFIER.value),
                "RPC_LIKE": reject(E.EXTRA_QUALIFIER.value),
                "STRICT_RFC": reject(E.EXTRA_QUALIFIER.value),
            }, description="second qualifier beyond the permitted CPS"),
        ],
    )


# ---------------------------------------------------------------------------
# S02 X.509 extension handling
# ---------------------------------------------------------------------------

def _s02() -> Scenario:
    san_value = asn1.der_encode(asn1.sequence(
        asn1.context_primitive(2, b"alt.example.net")))
    null_value = asn1.der_encode(asn1.null())

    def with_ext(extra):
        def build(notify_base=None, ta_cert_base=None):
            return _single_roa(notify_base, ta_cert_base,
                               roa_kwargs={"ee_kwargs": {"extra_extensions": extra}})
        return build

    return Scenario(
        scenario_id="S02_X509_EXTENSIONS",
        description="Unknown/duplicate/undecodable extension policy",
        rfc_topic="RFC 6487 1 and 4.8 vs RFC 5280 4.2 extension rules",
        cases=[
            CaseSpec("critical_unknown", with_ext([(oids.SUBJECT_ALT_NAME, True, san_value)]), {
                "RTN_LIKE": reject(E.UNKNOWN_CRITICAL_EXT.value),
                "FORT_LIKE": reject(E.UNKNOWN_CRITICAL_EXT.value),
                "RPC_LIKE": accept(1),
                "STRICT_RFC": reject(E.UNKNOWN_CRITICAL_EXT.value),
            }, description="critical subjectAltName, known to generic X.509 stacks"),
            CaseSpec("duplicate_unknown",
                     with_ext([(_PRIVATE_OID, False, null_value)] * 2), {
                "RTN_LIKE": accept(1),
                "FORT_LIKE": reject(E.DUPLICATE_EXT.value),
                "RPC_LIKE": reject(E.DUPLICATE_EXT.value),
                "STRICT_RFC": reject(E.DUPLICATE_EXT.value),
            }, description="the same unknown non-critical extension twice"),
            CaseSpec("undecodable_value", with_ext([(_PRIVATE_OID, False, b"\xff")]), {
                "RTN_LIKE": accept(1),
                "FORT_LIKE": reject(E.UNDECODABLE_EXT.value),
                "RPC_LIKE": reject(E.UNDECODABLE_EXT.value),
                "STRICT_RFC": reject(E.UNDECODABLE_EXT.value),
            }, description="unknown extension whose value is not valid DER"),
            CaseSpec("unknown_noncritical", with_ext([(_PRIVATE_OID, False, null_value)]), {
                "RTN_LIKE": accept(1),
                "FORT_LIKE": accept(1),
                "RPC_LIKE": accept(1),
                "STRICT_RFC": reject(E.FORBIDDEN_EXT.value),
            }, description="well-formed unknown non-critical extension"),
        ],
    )


# ---------------------------------------------------------------------------
# S03 HTTPS certificate validation
# ---------------------------------------------------------------------------

def _s03() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        built = _single_roa(notify_base, ta_cert_base)
        plan = FaultPlan((Fault(pubpoint.TLS_CERT, mode=pubpoint.TLS_SELF_SIGNED),))
        for mount in built.fixture.mounts.values():
            mount.plan = plan
        return built

    return Scenario(
        scenario_id="S03_HTTPS_VALIDATION",
        description="Self-signed repository TLS certificate",
        rfc_topic="RFC 8182 4.3 fetch-despite-TLS-failure mandate",
        cases=[CaseSpec("self_signed", build, {
            "RTN_LIKE": reject(E.TLS_VALIDATION_FAILED.value),
            "FORT_LIKE": reject(E.TLS_VALIDATION_FAILED.value),
            "RPC_LIKE": reject(E.TLS_VALIDATION_FAILED.value),
            "STRICT_RFC": accept(1, codes=(E.TLS_VALIDATION_FAILED.value,)),
        }, force_http=True, alternate_channel=False,
            description="profiles enforcing TLS stop; the literal reading fetches anyway")],
    )


# ---------------------------------------------------------------------------
# S04 DER-only requirement
# ---------------------------------------------------------------------------

def _s04() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.add_ta()
        child = ta.add_child("alpha")
        child.add_roa("marker", fixture.next_asn(), ["10.0.77.0/24"])
        child.objects["marker.roa"] = asn1.to_ber_indefinite(child.objects["marker.roa"])
        fixture.commit_all()
        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta))

    return Scenario(
        scenario_id="S04_DER_ENCODING",
        description="Signed object encoded with BER indefinite lengths",
        rfc_topic="RFC 6488 DER-only mandate vs RFC 5652 BER tolerance",
        cases=[CaseSpec("ber_object", build, {
            "RTN_LIKE": accept(1),
            "FORT_LIKE": accept(1),
            "RPC_LIKE": accept(1),
            "STRICT_RFC": reject(E.NON_CANONICAL_ENCODING.value),
        }, description="no deployed behavior model enforces DER-only")],
    )


# ---------------------------------------------------------------------------
# S05 RRDP withdraw vs manifest listing
# ---------------------------------------------------------------------------

def _s05() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.add_ta()
        child = ta.add_child("alpha")
        child.add_roa("keepme", fixture.next_asn(), ["10.0.20.0/24"])
        fixture.commit_all()

        def withdraw_keep():
            child.remove_object("keepme.roa", keep_in_manifest=True)
            child.commit()

        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta), phases=[withdraw_keep])

    return Scenario(
        scenario_id="S05_RRDP_WITHDRAW",
        description="Withdraw of an object the manifest still lists",
        rfc_topic="RFC 8182 withdraw semantics vs RFC 9286 manifest authority",
        cases=[CaseSpec("withdraw_but_listed", build, {
            "RTN_LIKE": accept(1),
            "FORT_LIKE": reject(E.MISSING_LISTED_FILE.value),
            "RPC_LIKE": accept(1),
            "STRICT_RFC": accept(1),
        }, description="signed manifest against unsigned withdraw")],
    )


# ---------------------------------------------------------------------------
# S06 undefined terms: extra issuer attributes
# ---------------------------------------------------------------------------

def _s06() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        return _single_roa(
            notify_base, ta_cert_base,
            child_kwargs={"subject_extra": ((oids.AT_ORGANIZATION_NAME, "Example Org"),)})

    return Scenario(
        scenario_id="S06_TERM_DEFINITIONS",
        description="OrganizationName attribute beyond CommonName/serialNumber",
        rfc_topic="RFC 6487 4.4 'field' vs RFC 5280 4.1.2.4 'attribute'",
        cases=[CaseSpec("organisation_name", build, {
            "RTN_LIKE": accept(1),
            "FORT_LIKE": reject(E.EXTRA_ISSUER_ATTRIBUTE.value),
            "RPC_LIKE": reject(E.EXTRA_ISSUER_ATTRIBUTE.value),
            "STRICT_RFC": reject(E.EXTRA_ISSUER_ATTRIBUTE.value),
        }, description="name-attribute vagueness decided three ways")],
    )


# ---------------------------------------------------------------------------
# S07 repository chain limits
# ---------------------------------------------------------------------------

def _s07() -> Scenario:
    def deep(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.build_chain(depth=40, breadth=1)
        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta))

    def wide(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.build_chain(depth=1, breadth=500)
        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta))

    return Scenario(
        scenario_id="S07_CHAIN_LIMITS",
        description="Delegation depth limits and missing breadth limits",
        rfc_topic="RFC 6481 chain length advice; RFC 8182 'some kind of bound'",
        cases=[
            CaseSpec("depth_40", deep, {
                "RTN_LIKE": depth_cutoff(31, vrp_count=31),
                "FORT_LIKE": depth_cutoff(30, vrp_count=30),
                "RPC_LIKE": depth_cutoff(11, vrp_count=11),
                "STRICT_RFC": depth_cutoff(40, vrp_count=40),
            }, description="forty-link chain against the depth defaults"),
            CaseSpec("breadth_500", wide, {
                "RTN_LIKE": accept(500),
                "FORT_LIKE": accept(500),
                "RPC_LIKE": accept(500),
                "STRICT_RFC": accept(100, codes=(E.BREADTH_LIMIT_EXCEEDED.value,)),
            }, description="no deployed behavior model bounds children per CA"),
        ],
    )


# ---------------------------------------------------------------------------
# S08 service availability
# ---------------------------------------------------------------------------

def _availability_fixture(notify_base=None, ta_cert_base=None, *, fillers: int = 0,
                          plan: Optional[FaultPlan] = None) -> BuiltCase:
    fixture = _fixture(notify_base, ta_cert_base)
    ta = fixture.add_ta()
    ta.add_roa("ta-marker", fixture.next_asn(), ["10.0.70.0/24"])
    child = ta.add_child("alpha")
    child.add_roa("marker", fixture.next_asn(), ["10.0.71.0/24"])
    for i in range(fillers):
        child.add_roa(f"filler{i}", fixture.next_asn(), [str(fixture.next_prefix())])
    fixture.commit_all()
    if plan is not None:
        fixture.mounts[child.host].plan = plan
    return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta))


def _s08() -> Scenario:
    def status404(notify_base=None, ta_cert_base=None):
        return _availability_fixture(notify_base, ta_cert_base, plan=FaultPlan((
            Fault(pubpoint.HTTP_STATUS, code=404, path_pattern="notification"),)))

    def status503(notify_base=None, ta_cert_base=None):
        return _availability_fixture(notify_base, ta_cert_base, plan=FaultPlan((
            Fault(pubpoint.HTTP_STATUS, code=503, path_pattern="notification"),)))

    def rate100(notify_base=None, ta_cert_base=None):
        return _availability_fixture(notify_base, ta_cert_base, fillers=10,
                                     plan=FaultPlan((
                                         Fault(pubpoint.RATE_LIMIT, bytes_per_second=100),)))

    unavailable = reject(E.REPO_UNAVAILABLE.value, vrp_count=1)
    return Scenario(
        scenario_id="S08_AVAILABILITY",
        description="Unavailable, temporarily failing, and slow repositories",
        rfc_topic="RFC 6481/6484 availability rules; RFC 8182 missing flow control",
        cases=[
            CaseSpec("http_404", status404, _all(unavailable),
                     alternate_channel=False,
                     description="permanent unavailability stops fetching at once"),
            CaseSpec("http_503", status503, {
                "RTN_LIKE": unavailable,
                "FORT_LIKE": bounded_stall(4.0, E.REPO_UNAVAILABLE.value,
                                           vrp_count=1, metric="repo"),
                "RPC_LIKE": unavailable,
                "STRICT_RFC": unavailable,
            }, alternate_channel=False,
                description="one behavior model retries temporal errors once"),
            CaseSpec("rate_100Bps", rate100, {
                "RTN_LIKE": bounded_stall(360.0, E.TIMEOUT.value, vrp_count=1),
                "FORT_LIKE": bounded_stall(24.0, E.TRANSFER_TOO_SLOW.value, vrp_count=1),
                "RPC_LIKE": bounded_stall(900.0, E.TIMEOUT.value, vrp_count=1),
                "STRICT_RFC": bounded_stall(600.0, E.TIMEOUT.value, vrp_count=1),
            }, force_http=True, alternate_channel=False,
                description="slow-rate stream against rate guards and timeouts"),
        ],
    )


# ---------------------------------------------------------------------------
# S09 ASN.1 INTEGER sign interpretation
# ---------------------------------------------------------------------------

def _s09() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        return _single_roa(notify_base, ta_cert_base,
                           roa_asn=RawInteger(b"\xff"), roa_prefix="10.0.9.0/24")

    return Scenario(
        scenario_id="S09_ASN1_INTEGER",
        description="AS id content octets 0xFF: -1 or 255",
        rfc_topic="RFC 3779/6482 ASId bounds vs ASN.1 INTEGER semantics",
        cases=[CaseSpec("asid_0xff", build, {
            "RTN_LIKE": reject(E.ILLEGAL_AS_NUMBER.value),
            "FORT_LIKE": accept(1, asns=(255,)),
            "RPC_LIKE": reject(E.ILLEGAL_AS_NUMBER.value),
            "STRICT_RFC": reject(E.ILLEGAL_AS_NUMBER.value),
        }, description="two's-complement readers reject, unsigned readers accept")],
    )


# ---------------------------------------------------------------------------
# S10 IP address representation
# ---------------------------------------------------------------------------

def _raw_ip(entries) -> bytes:
    return encode_ip_resources(entries)


def _s10() -> Scenario:
    def case_build(raw_entries, roa_prefix):
        def build(notify_base=None, ta_cert_base=None):
            return _single_roa(
                notify_base, ta_cert_base, roa_prefix=roa_prefix,
                roa_kwargs={"ee_kwargs": {"raw_ip_resources": _raw_ip(raw_entries)}})
        return build

    mergeable = [IpPrefix.parse("10.0.50.0/25"), IpPrefix.parse("10.0.50.128/25")]
    adjacent_range = [IpPrefix.parse("10.0.51.0/25"), IpPrefix.parse("10.0.51.128/26")]
    lo = int.from_bytes(bytes([10, 0, 52, 0]), "big")
    range_prefix = [IpRange(V4, lo, lo + 255)]

    rejects = reject(E.IP_NOT_CANONICAL.value)
    return Scenario(
        scenario_id="S10_IP_REPRESENTATION",
        description="Non-canonical delegation-extension forms",
        rfc_topic="RFC 3779 canonical form vs RFC 6482/9582 ROA ordering",
        cases=[
            CaseSpec("mergeable_prefixes", case_build(mergeable, "10.0.50.0/24"), {
                "RTN_LIKE": accept(1), "FORT_LIKE": rejects,
                "RPC_LIKE": rejects, "STRICT_RFC": rejects,
            }, description="two neighbors that combine into one prefix"),
            CaseSpec("adjacent_into_range", case_build(adjacent_range, "10.0.51.0/25"), {
                "RTN_LIKE": accept(1), "FORT_LIKE": rejects,
                "RPC_LIKE": rejects, "STRICT_RFC": rejects,
            }, description="two neighbors that combine only into a range"),
            CaseSpec("range_for_prefix", case_build(range_prefix, "10.0.52.0/24"), {
                "RTN_LIKE": accept(1), "FORT_LIKE": rejects,
                "RPC_LIKE": accept(1), "STRICT_RFC": rejects,
            }, description="a range written where a prefix exists"),
        ],
    )


# ---------------------------------------------------------------------------
# S11 duplicate delta entries
# ---------------------------------------------------------------------------

def _s11() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.add_ta()
        child = ta.add_child("alpha")
        child.add_roa("one", fixture.next_asn(), ["10.0.40.0/24"])
        fixture.commit_all()

        def duplicate_publish():
            uri = child.add_roa("two", fixture.next_asn(), ["10.0.41.0/24"])
            child.commit()
            fixture.mounts[child.host].plan = FaultPlan((
                Fault(pubpoint.DUPLICATE_DELTA_ENTRY, serial=child.state.serial, uri=uri),))

        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta), phases=[duplicate_publish])

    dup = E.DUPLICATE_DELTA_ENTRY.value
    return Scenario(
        scenario_id="S11_DELTA_DUPLICATION",
        description="The same publish entry twice within one delta",
        rfc_topic="RFC 8182 silence on duplicate delta entries",
        cases=[CaseSpec("duplicate_publish", build, {
            "RTN_LIKE": fallback("SNAPSHOT", 2, codes=(dup,)),
            "FORT_LIKE": accept(2, codes=(dup,)),
            "RPC_LIKE": fallback("ALTERNATE", 2, codes=(dup,)),
            "STRICT_RFC": fallback("SNAPSHOT", 2, codes=(dup,)),
        }, description="snapshot vs alternate channel vs apply-once")],
    )


# ---------------------------------------------------------------------------
# S12 notification hash handling
# ---------------------------------------------------------------------------

def _s12() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.add_ta()
        child = ta.add_child("alpha")
        child.add_roa("one", fixture.next_asn(), ["10.0.30.0/24"])
        fixture.commit_all()

        def break_hash():
            child.add_roa("two", fixture.next_asn(), ["10.0.31.0/24"])
            child.commit()
            fixture.mounts[child.host].plan = FaultPlan((
                Fault(pubpoint.BROKEN_DELTA_HASH, serial=child.state.serial),))

        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta), phases=[break_hash])

    mismatch = E.DELTA_HASH_MISMATCH.value
    return Scenario(
        scenario_id="S12_NOTIFICATION_HASH",
        description="Advertised delta hash does not match the delta file",
        rfc_topic="RFC 8182 3.4.1 vs 3.5.1.3 'reject the file' ambiguity",
        cases=[CaseSpec("broken_delta_hash", build, {
            "RTN_LIKE": fallback("SNAPSHOT", 2, codes=(mismatch,)),
            "FORT_LIKE": fallback("SNAPSHOT", 2, codes=(mismatch,)),
            "RPC_LIKE": fallback("CACHE", 1, codes=(mismatch,)),
            "STRICT_RFC": fallback("SNAPSHOT", 2, codes=(mismatch,)),
        }, alternate_channel=False,
            description="snapshot fallback vs retained cache")],
    )


# ---------------------------------------------------------------------------
# Crash regressions
# ---------------------------------------------------------------------------

def _r01() -> Scenario:
    weird = b"caf\xbf".decode("utf-8", "surrogateescape")

    def build(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.add_ta()
        child = ta.add_child("alpha")
        child.add_roa(weird, fixture.next_asn(), ["10.0.60.0/24"])
        fixture.commit_all()
        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta))

    return Scenario(
        scenario_id="R01_UTF8_MANIFEST",
        description="Manifest file name with a lone UTF-8 continuation byte",
        rfc_topic="manifest fileList byte handling (CVE-2025-0638 class)",
        cases=[CaseSpec("utf8_continuation", build, _all(accept(1)),
                        description="raw 0xBF survives codec, transport, and matching")],
    )


def _r02() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.add_ta()
        child = ta.add_child("alpha")
        ta.commit()
        child.commit(manifest_entries=[])
        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta))

    return Scenario(
        scenario_id="R02_EMPTY_FILELIST",
        description="Manifest with an empty file list",
        rfc_topic="manifest entry iteration bounds (CVE-2024-56375 class)",
        cases=[CaseSpec("empty_filelist", build, _all(accept(0)),
                        description="zero entries must terminate normally")],
    )


# ---------------------------------------------------------------------------
# Field inconsistencies
# ---------------------------------------------------------------------------

def _f01() -> Scenario:
    marker_count = 5

    def build(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.add_ta()
        child = ta.add_child("alpha")
        for i in range(marker_count):
            child.add_roa(f"r{i}", fixture.next_asn(), [str(fixture.next_prefix())])
        fixture.commit_all()

        def reissue_same_number():
            for i in range(marker_count):
                child.add_roa(f"r{i}", 64800 + i, [str(fixture.next_prefix())])
            child.commit(manifest_number=child.manifest_number)

        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta),
                         phases=[reissue_same_number])

    def compare(profile_name, warm, cold):
        if len(cold.vrps) != marker_count:
            return False, f"snapshot path yielded {len(cold.vrps)} VRPs"
        deficit = len(cold.vrps) - len(warm.vrps)
        expected = 0 if profile_name == "FORT_LIKE" else marker_count
        if deficit != expected:
            return False, f"delta-path deficit {deficit}, expected {expected}"
        return True, f"delta-path deficit {deficit}"

    nn = E.MANIFEST_NUMBER_NOT_INCREMENTED.value
    return Scenario(
        scenario_id="F01_MFT_NUMBER",
        description="Manifest re-issued with an unchanged number",
        rfc_topic="incremental-only manifest number enforcement",
        cases=[CaseSpec("number_not_incremented", build, {
            "RTN_LIKE": reject(nn, vrp_count=0),
            "FORT_LIKE": accept(marker_count),
            "RPC_LIKE": reject(nn, vrp_count=0),
            "STRICT_RFC": reject(nn, vrp_count=0),
        }, compare_paths=compare,
            description="delta path loses the marker VRPs, snapshot path keeps them")],
    )


def _f02() -> Scenario:
    def build(notify_base=None, ta_cert_base=None):
        fixture = _fixture(notify_base, ta_cert_base)
        ta = fixture.add_ta()
        ta.add_roa("ta-marker", fixture.next_asn(), ["10.0.70.0/24"])
        child = ta.add_child("oddport", host="oddport.pp.test:8730")
        child.add_roa("marker", fixture.next_asn(), ["10.0.71.0/24"])
        fixture.commit_all()
        return BuiltCase(fixture=fixture, tal=fixture.tal_for(ta))

    return Scenario(
        scenario_id="F02_DUBIOUS_HOST",
        description="Repository URI with an explicit port number",
        rfc_topic="URI structure policing outside any RFC requirement",
        cases=[CaseSpec("port_in_host", build, {
            "RTN_LIKE": reject(E.DUBIOUS_HOST.value, vrp_count=1),
            "FORT_LIKE": accept(2),
            "RPC_LIKE": accept(2),
            "STRICT_RFC": accept(2),
        }, description="one behavior model refuses unusual host syntax")],
    )


def build_corpus() -> Dict[str, Scenario]:
    scenarios = [
        _s01(), _s02(), _s03(), _s04(), _s05(), _s06(), _s07(), _s08(),
        _s09(), _s10(), _s11(), _s12(), _r01(), _r02(), _f01(), _f02(),
    ]
    return {s.scenario_id: s for s in scenarios}
