"""Structure-aware differential fuzzing with fingerprint de-duplication.

Mutations are applied to build parameters and the object is re-signed,
so inputs stay parseable and reach semantic validation; BREAK_ENCODING
is the deliberate exception and corrupts raw bytes. Each test input
carries a unique marker (AS number, prefix) so the mutated object's fate
is attributable in every profile's output. Divergent inputs collapse
into findings keyed by (object type, accept pattern, error-code sets);
replay data makes every finding reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import asn1, engine, oids
from .asn1 import RawInteger
from .cabuild import Fixture
from .profiles import BUILTIN_PROFILES, PROFILE_ORDER, InterpretationProfile
from .reporting import ValidationReport
from .rpkiobjects import RoaPrefix, Tal

OBJECT_TYPES = ("roa", "cert", "mft", "crl", "gbr")

FLIP_BYTES = "FLIP_BYTES"
RESIZE = "RESIZE"
SWAP_OID = "SWAP_OID"
DUPLICATE_FIELD = "DUPLICATE_FIELD"
DROP_FIELD = "DROP_FIELD"
SET_EXTREME_INTEGER = "SET_EXTREME_INTEGER"
BREAK_ENCODING = "BREAK_ENCODING"
INJECT_RAW = "INJECT_RAW"

_PRIVATE_OID = "1.3.6.1.4.1.54321.99"


class Draws:
    """Wraps the rng so every draw is recorded (or replayed) for
    deterministic regeneration of a mutated input."""

    def __init__(self, rng=None, trace: Optional[Sequence[int]] = None):
        self.rng = rng
        self.trace: List[int] = list(trace) if trace is not None else []
        self._replay = trace is not None
        self._pos = 0

    def _next(self, lo: int, hi: int) -> int:
        if self._replay:
            value = self.trace[self._pos]
            self._pos += 1
            return value
        value = self.rng.randint(lo, hi)
        self.trace.append(value)
        return value

    def int(self, lo: int, hi: int) -> int:
        return self._next(lo, hi)

    def choice(self, seq):
        return seq[self._next(0, len(seq) - 1)]


@dataclass(frozen=True)
class Mutator:
    target_field_path: str
    kind: str
    weight: float
    apply: Callable[[dict, Draws], None] = field(compare=False)

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("mutator weights must be positive")


@dataclass(frozen=True)
class MutationGrammar:
    object_type: str
    mutators: Tuple[Mutator, ...]

    def __post_init__(self):
        if self.object_type not in OBJECT_TYPES:
            raise ValueError(f"unknown object type {self.object_type}")
        if not self.mutators:
            raise ValueError("grammar requires at least one mutator")

    def pick(self, draws: Draws) -> Mutator:
        total = sum(m.weight for m in self.mutators)
        point = draws.int(0, 10_000_000) / 10_000_000 * total
        acc = 0.0
        for mutator in self.mutators:
            acc += mutator.weight
            if point <= acc:
                return mutator
        return self.mutators[-1]

    def find(self, path: str, kind: str) -> Mutator:
        for m in self.mutators:
            if m.target_field_path == path and m.kind == kind:
                return m
        raise KeyError(f"no mutator {kind} at {path}")


@dataclass(frozen=True)
class TestInput:
    seed_id: str
    object_type: str
    mutation_trace: Tuple[Tuple[str, str, Tuple[int, ...]], ...]
    fingerprint_asn: int
    fingerprint_prefix: str
    base_time: int

    def to_dict(self) -> dict:
        return {
            "seed_id": self.seed_id,
            "object_type": self.object_type,
            "mutation_trace": [
                {"kind": kind, "field_path": path, "draws": list(draws)}
                for kind, path, draws in self.mutation_trace
            ],
            "fingerprint_asn": self.fingerprint_asn,
            "fingerprint_prefix": self.fingerprint_prefix,
            "base_time": self.base_time,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TestInput":
        return cls(
            seed_id=data["seed_id"],
            object_type=data["object_type"],
            mutation_trace=tuple(
                (m["kind"], m["field_path"], tuple(m["draws"]))
                for m in data["mutation_trace"]
            ),
            fingerprint_asn=data["fingerprint_asn"],
            fingerprint_prefix=data["fingerprint_prefix"],
            base_time=data["base_time"],
        )


@dataclass(frozen=True)
class InconsistencyFingerprint:
    object_type: str
    accept_pattern: Tuple[bool, ...]
    error_code_sets: Tuple[Tuple[str, ...], ...]

    def to_dict(self) -> dict:
        return {
            "object_type": self.object_type,
            "accept_pattern": ["accept" if b else "reject" for b in self.accept_pattern],
            "error_code_sets": [list(s) for s in self.error_code_sets],
        }


@dataclass
class Finding:
    fingerprint: InconsistencyFingerprint
    first_input: TestInput
    occurrence_count: int = 1
    first_seen: int = 0

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint.to_dict(),
            "first_input": self.first_input.to_dict(),
            "occurrence_count": self.occurrence_count,
            "first_seen": self.first_seen,
        }


# ---------------------------------------------------------------------------
# Mutation effects
# ---------------------------------------------------------------------------

def _corrupt(data: bytes, draws: Draws) -> bytes:
    mode = draws.int(0, 2)
    if mode == 0 and len(data) > 8:
        return data[: len(data) // 2]  # truncate
    if mode == 1:
        pos = draws.int(0, max(0, len(data) - 1))
        flip = draws.int(1, 255)
        return data[:pos] + bytes([data[pos] ^ flip]) + data[pos + 1:]
    return b"\x00\x00" + data  # garbage prefix breaks the outer tag


def _ext_variants(draws: Draws) -> List[Tuple[str, bool, bytes]]:
    san = asn1.der_encode(asn1.sequence(asn1.context_primitive(2, b"alt.example.net")))
    null = asn1.der_encode(asn1.null())
    variant = draws.int(0, 3)
    if variant == 0:
        return [(oids.SUBJECT_ALT_NAME, True, san)]
    if variant == 1:
        return [(_PRIVATE_OID, False, null)] * 2
    if variant == 2:
        return [(_PRIVATE_OID, False, b"\xff")]
    return [(_PRIVATE_OID, False, null)]


def _noncanonical_ip(draws: Draws):
    from .iputil import IpPrefix, IpRange, V4
    base = 10 << 24 | draws.int(0, 200) << 16 | draws.int(0, 255) << 8
    variant = draws.int(0, 2)
    if variant == 0:
        entries = [IpPrefix(V4, base, 25), IpPrefix(V4, base + 128, 25)]
        prefix = RoaPrefix(V4, base, 24)
    elif variant == 1:
        entries = [IpPrefix(V4, base, 25), IpPrefix(V4, base + 128, 26)]
        prefix = RoaPrefix(V4, base, 25)
    else:
        entries = [IpRange(V4, base, base + 255)]
        prefix = RoaPrefix(V4, base, 24)
    from .x509build import encode_ip_resources
    return encode_ip_resources(entries), prefix


def _merge_ee(effect: dict, key: str, patch: dict):
    merged = dict(effect.get(key, {}))
    merged.update(patch)
    effect[key] = merged


def _roa_mutators() -> List[Mutator]:
    def extreme_asid(effect, draws):
        raw = draws.choice([b"\xff", b"\x00", b"\x80",
                            b"\x01\x00\x00\x00\x00", b"\x00\xff"])
        effect["roa_asn"] = RawInteger(raw)

    def resize_asid(effect, draws):
        pad = draws.int(1, 4)
        effect["roa_asn"] = RawInteger(b"\x00" * pad + b"\xff")

    def drop_maxlen(effect, draws):
        effect["roa_prefix_maxlen"] = None

    def extreme_maxlen(effect, draws):
        effect["roa_prefix_maxlen"] = draws.choice([24, 32, 40, 0])

    def dup_prefix(effect, draws):
        effect["roa_duplicate_prefix"] = True

    def swap_policy(effect, draws):
        _merge_ee(effect, "roa_ee", {"policies": ((oids.CP_IPADDR_ASNUMBER_V2, ()),)})

    def extra_qualifiers(effect, draws):
        quals = ((oids.CPS_QUALIFIER, "https://example.net/cps"),
                 (oids.UNOTICE_QUALIFIER, "notice"))
        _merge_ee(effect, "roa_ee", {"policies": ((oids.CP_IPADDR_ASNUMBER, quals),)})

    def inject_ext(effect, draws):
        _merge_ee(effect, "roa_ee", {"extra_extensions": _ext_variants(draws)})

    def noncanonical_ip(effect, draws):
        raw, prefix = _noncanonical_ip(draws)
        _merge_ee(effect, "roa_ee", {"raw_ip_resources": raw})
        effect["roa_prefix_override"] = prefix

    def break_encoding(effect, draws):
        effect["roa_transform"] = lambda data: _corrupt(data, draws)

    return [
        Mutator("roa.as_id", SET_EXTREME_INTEGER, 3.0, extreme_asid),
        Mutator("roa.as_id", RESIZE, 1.0, resize_asid),
        Mutator("roa.prefixes[0].max_length", DROP_FIELD, 1.0, drop_maxlen),
        Mutator("roa.prefixes[0].max_length", SET_EXTREME_INTEGER, 1.0, extreme_maxlen),
        Mutator("roa.prefixes", DUPLICATE_FIELD, 1.0, dup_prefix),
        Mutator("roa.ee.certificate_policies", SWAP_OID, 2.0, swap_policy),
        Mutator("roa.ee.certificate_policies.qualifiers", INJECT_RAW, 2.0, extra_qualifiers),
        Mutator("roa.ee.extensions", INJECT_RAW, 3.0, inject_ext),
        Mutator("roa.ee.ip_resources", INJECT_RAW, 3.0, noncanonical_ip),
        Mutator("roa", BREAK_ENCODING, 1.0, break_encoding),
    ]


def _cert_mutators() -> List[Mutator]:
    def extra_name(effect, draws):
        _merge_ee(effect, "child_kwargs",
                  {"subject_extra": ((oids.AT_ORGANIZATION_NAME, "Example Org"),)})

    def swap_policy(effect, draws):
        _merge_ee(effect, "child_kwargs", {"policies": ((oids.CP_IPADDR_ASNUMBER_V2, ()),)})

    def inject_ext(effect, draws):
        _merge_ee(effect, "child_kwargs", {"extra_extensions": _ext_variants(draws)})

    def dup_ext(effect, draws):
        null = asn1.der_encode(asn1.null())
        _merge_ee(effect, "child_kwargs",
                  {"extra_extensions": [(_PRIVATE_OID, False, null)] * 2})

    def extreme_serial(effect, draws):
        raw = draws.choice([b"\xff", b"\x00\xff\xff\xff\xff\xff\xff\xff\xff"])
        _merge_ee(effect, "child_kwargs", {"serial": RawInteger(raw)})

    def noncanonical_ip(effect, draws):
        raw, prefix = _noncanonical_ip(draws)
        _merge_ee(effect, "child_kwargs", {"raw_ip_resources": raw, "ip_entries": ()})
        effect["marker_prefix_override"] = prefix

    def break_encoding(effect, draws):
        effect["cert_transform"] = lambda data: _corrupt(data, draws)

    return [
        Mutator("cert.subject", INJECT_RAW, 3.0, extra_name),
        Mutator("cert.certificate_policies", SWAP_OID, 2.0, swap_policy),
        Mutator("cert.extensions", INJECT_RAW, 3.0, inject_ext),
        Mutator("cert.extensions", DUPLICATE_FIELD, 2.0, dup_ext),
        Mutator("cert.serial", SET_EXTREME_INTEGER, 1.0, extreme_serial),
        Mutator("cert.ip_resources", INJECT_RAW, 3.0, noncanonical_ip),
        Mutator("cert", BREAK_ENCODING, 1.0, break_encoding),
    ]


def _mft_mutators() -> List[Mutator]:
    def extreme_number(effect, draws):
        raw = draws.choice([b"\x7f" * 12, b"\x01"])
        effect.setdefault("mft_commit", {})["manifest_number"] = RawInteger(raw)

    def empty_list(effect, draws):
        effect.setdefault("mft_commit", {})["manifest_entries"] = []
        effect["mft_expect_empty"] = True

    def weird_name(effect, draws):
        effect["mft_weird_name"] = True

    def inject_ext(effect, draws):
        effect.setdefault("mft_commit", {})["mft_ee_kwargs"] = {
            "extra_extensions": _ext_variants(draws)}

    def break_encoding(effect, draws):
        effect.setdefault("mft_commit", {})["transform_mft"] = \
            lambda data: _corrupt(data, draws)

    return [
        Mutator("mft.manifest_number", SET_EXTREME_INTEGER, 1.0, extreme_number),
        Mutator("mft.file_list", DROP_FIELD, 1.0, empty_list),
        Mutator("mft.file_list[0].file", INJECT_RAW, 1.0, weird_name),
        Mutator("mft.ee.extensions", INJECT_RAW, 3.0, inject_ext),
        Mutator("mft", BREAK_ENCODING, 1.0, break_encoding),
    ]


def _crl_mutators() -> List[Mutator]:
    def dup_serial(effect, draws):
        effect["crl_duplicate_serial"] = True

    def extreme_number(effect, draws):
        effect.setdefault("mft_commit", {})["crl_number"] = RawInteger(b"\x7f" * 12)

    def break_encoding(effect, draws):
        effect.setdefault("mft_commit", {})["transform_crl"] = \
            lambda data: _corrupt(data, draws)

    return [
        Mutator("crl.revoked_serials", DUPLICATE_FIELD, 1.0, dup_serial),
        Mutator("crl.crl_number", SET_EXTREME_INTEGER, 1.0, extreme_number),
        Mutator("crl", BREAK_ENCODING, 1.0, break_encoding),
    ]


def _gbr_mutators() -> List[Mutator]:
    def drop_fn(effect, draws):
        effect["gbr_props"] = (("EMAIL", "noc@example.net"),)

    def inject_ext(effect, draws):
        effect["gbr_ee"] = {"extra_extensions": _ext_variants(draws)}

    def break_encoding(effect, draws):
        effect["gbr_transform"] = lambda data: _corrupt(data, draws)

    return [
        Mutator("gbr.vcard.fn", DROP_FIELD, 1.0, drop_fn),
        Mutator("gbr.ee.extensions", INJECT_RAW, 3.0, inject_ext),
        Mutator("gbr", BREAK_ENCODING, 1.0, break_encoding),
    ]


def default_grammar(object_type: str) -> MutationGrammar:
    builders = {
        "roa": _roa_mutators,
        "cert": _cert_mutators,
        "mft": _mft_mutators,
        "crl": _crl_mutators,
        "gbr": _gbr_mutators,
    }
    return MutationGrammar(object_type, tuple(builders[object_type]()))


def default_grammars() -> Dict[str, MutationGrammar]:
    return {t: default_grammar(t) for t in OBJECT_TYPES}


# ---------------------------------------------------------------------------
# Input construction
# ---------------------------------------------------------------------------

@dataclass
class BuiltInput:
    fixture: Fixture
    tal: Tal
    mutated_uri: str
    attribution: Tuple[str, ...]   # URI prefixes owning the mutation's effects
    marker_prefix: RoaPrefix


def build_input_repo(object_type: str, effect: dict, marker_asn: int,
                     marker_prefix: RoaPrefix, base_time: int) -> BuiltInput:
    fixture = Fixture(seed=0, base_time=base_time)
    ta = fixture.add_ta()
    child_kwargs = dict(effect.get("child_kwargs", {}))
    child = ta.add_child("alpha", **child_kwargs)
    mutated_uri = f"{ta.ca_repository}/alpha.cer" if object_type == "cert" else ""

    marker = effect.get("marker_prefix_override", marker_prefix)
    if object_type == "roa":
        prefix = effect.get("roa_prefix_override", marker)
        maxlen = effect.get("roa_prefix_maxlen", "absent")
        roa_prefix = RoaPrefix(prefix.family, prefix.addr, prefix.length,
                               None if maxlen in ("absent", None) else maxlen)
        prefixes = [roa_prefix] * (2 if effect.get("roa_duplicate_prefix") else 1)
        asn_value = effect.get("roa_asn", marker_asn)
        ee_kwargs = effect.get("roa_ee", {})
        try:
            mutated_uri = child.add_roa("marker", asn_value, prefixes, ee_kwargs=ee_kwargs)
        except ValueError:
            # maxLength outside builder bounds: encode it anyway so the
            # validator, not the builder, makes the call.
            mutated_uri = child.add_object(
                "marker.roa", _rebuild_roa_with_maxlen(child, asn_value, prefixes, ee_kwargs))
        if "roa_transform" in effect:
            child.objects["marker.roa"] = effect["roa_transform"](child.objects["marker.roa"])
    else:
        child.add_roa("marker", marker_asn, [marker])

    if object_type == "gbr":
        props = effect.get("gbr_props", (("FN", "Example NOC"), ("EMAIL", "noc@example.net")))
        if any(p.upper() == "FN" for p, _ in props):
            mutated_uri = child.add_gbr("contact", props, ee_kwargs=effect.get("gbr_ee"))
        else:
            # FN-less vCards violate the builder contract; sign one directly
            # so the decode-permissive path is what gets exercised.
            from . import cms as _cms
            lines = ["BEGIN:VCARD", "VERSION:4.0"]
            lines.extend(f"{p}:{v}" for p, v in props)
            lines.append("END:VCARD")
            content = ("\r\n".join(lines) + "\r\n").encode("utf-8")
            uri = child.uri_for("contact.gbr")
            ee_cert, key = child.issue_ee("contact", uri, **(effect.get("gbr_ee") or {}))
            signed = _cms.build_signed_object(oids.CT_GHOSTBUSTERS, content, ee_cert, key)
            mutated_uri = child.add_object("contact.gbr", signed.der)
        if "gbr_transform" in effect:
            child.objects["contact.gbr"] = effect["gbr_transform"](child.objects["contact.gbr"])

    if object_type == "crl" and effect.get("crl_duplicate_serial"):
        # The builder refuses duplicate serials, so splice the duplicate in
        # at the ASN.1 layer and re-sign (decode must preserve it).
        child.revoked.append(RawInteger(b"\x7e"))
        effect.setdefault("mft_commit", {})["transform_crl"] = _duplicate_crl_entry(child.key)

    if object_type == "cert" and "cert_transform" in effect:
        ta.objects["alpha.cer"] = effect["cert_transform"](ta.objects["alpha.cer"])

    mft_commit = dict(effect.get("mft_commit", {}))
    if effect.get("mft_weird_name"):
        weird = b"caf\xbf.roa".decode("utf-8", "surrogateescape")
        data = child.objects.pop("marker.roa")
        child.objects[weird] = data
        mutated_uri = child.uri_for(weird)

    ta.commit()
    child.commit(**mft_commit)

    if object_type == "mft":
        mutated_uri = child.manifest_uri
    elif object_type == "crl":
        mutated_uri = child.crl_uri

    attribution = (child.ca_repository, f"{ta.ca_repository}/alpha.cer")
    return BuiltInput(fixture=fixture, tal=fixture.tal_for(ta), mutated_uri=mutated_uri,
                      attribution=attribution, marker_prefix=marker)


def _duplicate_crl_entry(signing_key):
    def transform(der: bytes) -> bytes:
        from . import keys as _keys
        tree = asn1.der_decode(der, asn1.EncodingRuleset.BER_TOLERANT)
        tbs, alg, _ = tree.children
        rebuilt = []
        for child_item in tbs.children:
            if (child_item.is_universal(asn1.TAG_SEQUENCE) and child_item.children
                    and child_item.children[0].is_universal(asn1.TAG_SEQUENCE)):
                entries = list(child_item.children) + [child_item.children[0]]
                child_item = asn1.constructed(asn1.UNIVERSAL, asn1.TAG_SEQUENCE, entries)
            rebuilt.append(child_item)
        new_tbs = asn1.constructed(asn1.UNIVERSAL, asn1.TAG_SEQUENCE, rebuilt)
        signature = _keys.sign(signing_key, asn1.der_encode(new_tbs))
        return asn1.der_encode(asn1.sequence(new_tbs, alg, asn1.bit_string(signature)))
    return transform


def _rebuild_roa_with_maxlen(child, asn_value, prefixes, ee_kwargs):
    """Re-sign a ROA whose maxLength violates builder bounds: encode the
    content by hand, then wrap it with the normal CMS template."""
    from . import cms as _cms
    from . import rpkiobjects as _ro
    from .iputil import IpPrefix

    raw_as = asn_value if isinstance(asn_value, RawInteger) else RawInteger.from_int(asn_value)
    fam_groups: Dict[int, list] = {}
    order: List[int] = []
    for p in prefixes:
        fam_groups.setdefault(p.family, []).append(p)
        if p.family not in order:
            order.append(p.family)
    blocks = []
    for fam in order:
        afi = b"\x00\x01" if fam == 4 else b"\x00\x02"
        addresses = []
        for p in fam_groups[fam]:
            parts = [_ro._roa_prefix_bits(RoaPrefix(p.family, p.addr, p.length, None))]
            if p.max_length is not None:
                parts.append(asn1.integer(p.max_length))
            addresses.append(asn1.sequence(*parts))
        blocks.append(asn1.sequence(asn1.octet_string(afi), asn1.sequence(*addresses)))
    econtent = asn1.der_encode(asn1.sequence(asn1.integer(raw_as), asn1.sequence(*blocks)))

    uri = child.uri_for("marker.roa")
    ee_cfg = dict(ee_kwargs or {})
    if "ip_entries" not in ee_cfg and "raw_ip_resources" not in ee_cfg:
        entries = sorted({(p.family, p.addr, p.length) for p in prefixes})
        ee_cfg["ip_entries"] = [IpPrefix(f, a, l) for f, a, l in entries]
    ee_cert, key = child.issue_ee("marker", uri, **ee_cfg)
    signed = _cms.build_signed_object(oids.CT_ROA, econtent, ee_cert, key)
    return signed.der


# ---------------------------------------------------------------------------
# Differential execution
# ---------------------------------------------------------------------------

def mutate(object_type: str, grammar: MutationGrammar, rng, *, iteration: int = 0,
           base_time: Optional[int] = None) -> Tuple[TestInput, BuiltInput]:
    """Pick one weighted mutator, apply it, and build the embedding repo."""
    base_time = base_time if base_time is not None else int(time.time()) - 3600
    draws = Draws(rng=rng)
    mutator = grammar.pick(draws)
    effect: dict = {}
    mutator.apply(effect, draws)
    marker_asn = 65001 + iteration
    marker_prefix = RoaPrefix(4, (10 << 24) | (200 << 16) | (iteration % 65536) << 8, 24)
    built = build_input_repo(object_type, effect, marker_asn, marker_prefix, base_time)
    test_input = TestInput(
        seed_id=f"{object_type}-seed0",
        object_type=object_type,
        mutation_trace=((mutator.kind, mutator.target_field_path, tuple(draws.trace)),),
        fingerprint_asn=marker_asn,
        fingerprint_prefix=str(marker_prefix.ip_prefix()),
        base_time=base_time,
    )
    return test_input, built


def rebuild_input(test_input: TestInput, grammar: MutationGrammar) -> BuiltInput:
    """Replay the recorded trace; regenerates byte-identical objects."""
    effect: dict = {}
    for kind, path, trace in test_input.mutation_trace:
        mutator = grammar.find(path, kind)
        draws = Draws(trace=list(trace))
        draws.int(0, 10_000_000)  # discard the selection draw
        mutator.apply(effect, draws)
    iteration = test_input.fingerprint_asn - 65001
    marker_prefix = RoaPrefix(4, (10 << 24) | (200 << 16) | (iteration % 65536) << 8, 24)
    return build_input_repo(test_input.object_type, effect, test_input.fingerprint_asn,
                            marker_prefix, test_input.base_time)


def _accepted(report: ValidationReport, built: BuiltInput, object_type: str) -> bool:
    if object_type in ("roa", "cert", "mft", "crl"):
        want = built.marker_prefix
        marker_present = any(
            v.family == want.family and v.addr == want.addr and v.length == want.length
            for v in report.vrps)
        if not marker_present:
            return False
    if built.mutated_uri and any(e.object_uri == built.mutated_uri for e in report.errors):
        return False
    return True


def _attributed_errors(report: ValidationReport, built: BuiltInput) -> Tuple[str, ...]:
    codes = {
        e.code.value
        for e in report.errors
        if any(e.object_uri.startswith(prefix) for prefix in built.attribution)
        or e.object_uri == built.mutated_uri
    }
    return tuple(sorted(codes))


def run_differential(built: BuiltInput, profile_names: Sequence[str] = PROFILE_ORDER, *,
                     object_type: str, time_budget: Optional[float] = None,
                     ) -> Tuple[Dict[str, ValidationReport], bool, int]:
    """Validate the input repo under each profile.

    Returns (per-profile reports, divergence flag, timeout count).
    Divergence means the mutated object's fate or the marker-attributable
    VRP payloads differ across profiles.
    """
    transport = built.fixture.mem_transport()
    reports: Dict[str, ValidationReport] = {}
    timeouts = 0
    for name in profile_names:
        profile = BUILTIN_PROFILES[name]
        started = time.monotonic()
        report, _ = engine.validate_tree([built.tal], transport, profile)
        if time_budget is not None and time.monotonic() - started > time_budget:
            timeouts += 1
        reports[name] = report

    accepts = [_accepted(reports[name], built, object_type) for name in profile_names]
    marker_vrps = set()
    first = True
    divergence = len(set(accepts)) > 1
    if not divergence:
        for name in profile_names:
            payloads = frozenset(
                v.payload() for v in reports[name].vrps
                if (v.family, v.addr, v.length) == (built.marker_prefix.family,
                                                    built.marker_prefix.addr,
                                                    built.marker_prefix.length))
            if first:
                marker_vrps, first = payloads, False
            elif payloads != marker_vrps:
                divergence = True
                break
    return reports, divergence, timeouts


def fingerprint(test_input: TestInput, built: BuiltInput,
                reports: Dict[str, ValidationReport],
                profile_names: Sequence[str] = PROFILE_ORDER) -> InconsistencyFingerprint:
    accepts = tuple(_accepted(reports[name], built, test_input.object_type)
                    for name in profile_names)
    code_sets = tuple(
        _attributed_errors(reports[name], built)
        for i, name in enumerate(profile_names) if not accepts[i]
    )
    return InconsistencyFingerprint(
        object_type=test_input.object_type,
        accept_pattern=accepts,
        error_code_sets=code_sets,
    )


def dedupe(stream) -> List[Finding]:
    """Collapse (input, fingerprint) pairs into one finding per fingerprint."""
    findings: Dict[InconsistencyFingerprint, Finding] = {}
    for ordinal, (test_input, fp) in enumerate(stream):
        existing = findings.get(fp)
        if existing is None:
            findings[fp] = Finding(fingerprint=fp, first_input=test_input,
                                   occurrence_count=1, first_seen=ordinal)
        else:
            existing.occurrence_count += 1
    return list(findings.values())


@dataclass
class CampaignReport:
    findings: List[Finding]
    iterations: int
    divergent_inputs: int
    duplicate_ratio: float
    coverage: Tuple[str, ...]
    elapsed_seconds: float
    timeouts: int
    per_type_iterations: Dict[str, int]

    def to_dict(self) -> dict:
        return {
            "findings": [f.to_dict() for f in self.findings],
            "iterations": self.iterations,
            "divergent_inputs": self.divergent_inputs,
            "duplicate_ratio": round(self.duplicate_ratio, 4),
            "coverage": list(self.coverage),
            "elapsed_seconds": round(self.elapsed_seconds, 3),
            "timeouts": self.timeouts,
            "per_type_iterations": dict(self.per_type_iterations),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def fuzz_campaign(object_types: Sequence[str] = OBJECT_TYPES,
                  grammars: Optional[Dict[str, MutationGrammar]] = None,
                  profile_names: Sequence[str] = PROFILE_ORDER, *,
                  duration_seconds: Optional[float] = None,
                  iterations: Optional[int] = None,
                  rng_seed: int = 0,
                  time_budget_per_run: Optional[float] = None) -> CampaignReport:
    """Mutate, run differentially, fingerprint, de-duplicate, repeat.

    Wall-clock campaigns stop after ``duration_seconds``; reproducible
    campaigns run exactly ``iterations`` inputs.
    """
    import random as _random

    if duration_seconds is None and iterations is None:
        raise ValueError("either duration_seconds or iterations is required")
    grammars = grammars or default_grammars()
    rng = _random.Random(rng_seed)
    base_time = int(time.time()) - 3600

    started = time.monotonic()
    findings: Dict[InconsistencyFingerprint, Finding] = {}
    coverage: set = set()
    divergent = 0
    timeouts = 0
    count = 0
    per_type: Dict[str, int] = {t: 0 for t in object_types}

    while True:
        if iterations is not None and count >= iterations:
            break
        if duration_seconds is not None and time.monotonic() - started >= duration_seconds:
            break
        object_type = object_types[count % len(object_types)]
        test_input, built = mutate(object_type, grammars[object_type], rng,
                                   iteration=count, base_time=base_time)
        reports, diverged, run_timeouts = run_differential(
            built, profile_names, object_type=object_type,
            time_budget=time_budget_per_run)
        timeouts += run_timeouts
        for report in reports.values():
            coverage.update(report.stats.knob_events)
            coverage.update(report.error_codes())
        if diverged:
            divergent += 1
            fp = fingerprint(test_input, built, reports, profile_names)
            existing = findings.get(fp)
            if existing is None:
                findings[fp] = Finding(fingerprint=fp, first_input=test_input,
                                       occurrence_count=1, first_seen=count)
            else:
                existing.occurrence_count += 1
        per_type[object_type] = per_type.get(object_type, 0) + 1
        count += 1

    unique = len(findings)
    ratio = (divergent - unique) / divergent if divergent else 0.0
    return CampaignReport(
        findings=sorted(findings.values(), key=lambda f: -f.occurrence_count),
        iterations=count,
        divergent_inputs=divergent,
        duplicate_ratio=ratio,
        coverage=tuple(sorted(coverage)),
        elapsed_seconds=time.monotonic() - started,
        timeouts=timeouts,
        per_type_iterations=per_type,
    )
