"""Resource certificate builder and parser (RFC 6487 profile shape).

Building goes through the local DER encoder so fixtures can carry
deliberate rule violations (duplicate extensions, extra name attributes,
raw integer payloads); parsing is deliberately permissive and preserves
everything it sees, leaving accept/reject decisions to validator policy.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from . import asn1, iputil, keys, oids
from .asn1 import Asn1Item, EncodingRuleset, RawInteger


class ObjectParseError(ValueError):
    """Input does not have the structural shape of the object type."""


AFI_V4 = b"\x00\x01"
AFI_V6 = b"\x00\x02"


@dataclass(frozen=True)
class Extension:
    oid: str
    critical: bool
    raw_value: bytes
    decoded: object = None
    decode_failed: bool = False


@dataclass(frozen=True)
class ResourceCertificate:
    der: bytes
    tbs_der: bytes
    serial: RawInteger
    issuer: Tuple[Tuple[str, str], ...]
    subject: Tuple[Tuple[str, str], ...]
    not_before: int
    not_after: int
    public_key_alg: str
    spki: bytes
    extensions: Tuple[Extension, ...]
    signature_alg: str
    signature: bytes
    flags: Tuple[str, ...] = ()

    # -- extension access ---------------------------------------------------

    def ext(self, oid: str) -> Optional[Extension]:
        for e in self.extensions:
            if e.oid == oid:
                return e
        return None

    def exts(self, oid: str) -> Tuple[Extension, ...]:
        return tuple(e for e in self.extensions if e.oid == oid)

    @property
    def basic_constraints_ca(self) -> bool:
        e = self.ext(oids.BASIC_CONSTRAINTS)
        return bool(e and e.decoded)

    @property
    def ip_resources(self) -> Tuple[iputil.IpEntry, ...]:
        e = self.ext(oids.IP_ADDR_BLOCKS)
        return e.decoded if e and e.decoded is not None else ()

    @property
    def as_resources(self) -> Tuple[iputil.AsEntry, ...]:
        e = self.ext(oids.AS_IDENTIFIERS)
        return e.decoded if e and e.decoded is not None else ()

    @property
    def certificate_policies(self) -> Tuple[Tuple[str, Tuple[Tuple[str, bytes], ...]], ...]:
        e = self.ext(oids.CERTIFICATE_POLICIES)
        return e.decoded if e and e.decoded is not None else ()

    @property
    def sia_uris(self) -> Tuple[Tuple[str, str], ...]:
        e = self.ext(oids.SUBJECT_INFO_ACCESS)
        return e.decoded if e and e.decoded is not None else ()

    @property
    def aia_uri(self) -> Optional[str]:
        e = self.ext(oids.AUTHORITY_INFO_ACCESS)
        if e and e.decoded:
            return e.decoded[0][1]
        return None

    @property
    def crl_distribution_point(self) -> Optional[str]:
        e = self.ext(oids.CRL_DISTRIBUTION_POINTS)
        return e.decoded if e and e.decoded else None

    def sia_uri(self, method_oid: str) -> Optional[str]:
        for method, uri in self.sia_uris:
            if method == method_oid:
                return uri
        return None

    def sia_all(self, method_oid: str) -> Tuple[str, ...]:
        return tuple(uri for method, uri in self.sia_uris if method == method_oid)

    def name_str(self, which: str = "subject") -> str:
        attrs = self.subject if which == "subject" else self.issuer
        return ",".join(f"{o}={v}" for o, v in attrs)


# ---------------------------------------------------------------------------
# Name, time, and extension encoding
# ---------------------------------------------------------------------------

def cn(value: str, extra: Sequence[Tuple[str, str]] = ()) -> Tuple[Tuple[str, str], ...]:
    """Distinguished name with a CommonName plus optional extra attributes."""
    return ((oids.AT_COMMON_NAME, value),) + tuple(extra)


def encode_name(attrs: Sequence[Tuple[str, str]]) -> Asn1Item:
    rdns = []
    for attr_oid, value in attrs:
        rdns.append(asn1.set_of(asn1.sequence(asn1.oid(attr_oid), asn1.printable_string(value))))
    return asn1.sequence(*rdns)


def decode_name(item: Asn1Item) -> Tuple[Tuple[str, str], ...]:
    attrs = []
    for rdn in item.children:
        for atv in rdn.children:
            attr_oid = atv.children[0].as_oid()
            value = atv.children[1].content.decode("utf-8", "surrogateescape")
            attrs.append((attr_oid, value))
    return tuple(attrs)


def _prefix_bitstring(entry: iputil.IpPrefix) -> Asn1Item:
    nbytes = (entry.length + 7) // 8
    unused = nbytes * 8 - entry.length
    bits = iputil.family_bits(entry.family)
    payload = (entry.addr >> (bits - nbytes * 8)).to_bytes(nbytes, "big") if nbytes else b""
    return asn1.bit_string(payload, unused)


def _min_bitstring(family: int, value: int) -> Asn1Item:
    # Range minimum: trailing zero bits are trimmed.
    bits = iputil.family_bits(family)
    length = bits
    while length > 0 and (value >> (bits - length)) & 1 == 0:
        length -= 1
    nbytes = (length + 7) // 8
    unused = nbytes * 8 - length
    payload = (value >> (bits - nbytes * 8)).to_bytes(nbytes, "big") if nbytes else b""
    return asn1.bit_string(payload, unused)


def _max_bitstring(family: int, value: int) -> Asn1Item:
    bits = iputil.family_bits(family)
    length = bits
    while length > 0 and (value >> (bits - length)) & 1 == 1:
        length -= 1
    nbytes = (length + 7) // 8
    unused = nbytes * 8 - length
    payload = value >> (bits - nbytes * 8) if nbytes else 0
    if unused:
        payload &= ~((1 << unused) - 1) & ((1 << (nbytes * 8)) - 1)
    raw = payload.to_bytes(nbytes, "big") if nbytes else b""
    return asn1.bit_string(raw, unused)


def _decode_addr_bits(item: Asn1Item, family: int, fill_ones: bool) -> Tuple[int, int]:
    """Returns (address int, encoded bit count)."""
    bits = iputil.family_bits(family)
    unused = item.bit_string_unused()
    payload = item.bit_string_bytes()
    if unused > 7 or (not payload and unused):
        raise ObjectParseError("invalid unused-bits count in address")
    length = len(payload) * 8 - unused
    if length > bits:
        raise ObjectParseError("address longer than family width")
    top = int.from_bytes(payload, "big") >> unused if payload else 0
    value = top << (bits - length)
    if fill_ones and length < bits:
        value |= (1 << (bits - length)) - 1
    return value, length


def encode_ip_resources(entries: Sequence[iputil.IpEntry]) -> bytes:
    families: dict = {}
    order: List[int] = []
    for entry in entries:
        fam = entry.family
        if fam not in families:
            families[fam] = []
            order.append(fam)
        families[fam].append(entry)
    blocks = []
    for fam in order:
        afi = AFI_V4 if fam == iputil.V4 else AFI_V6
        members = families[fam]
        if any(isinstance(e, iputil.IpInherit) for e in members):
            choice = asn1.null()
        else:
            items = []
            for e in members:
                if isinstance(e, iputil.IpPrefix):
                    items.append(_prefix_bitstring(e))
                else:
                    items.append(asn1.sequence(_min_bitstring(fam, e.min), _max_bitstring(fam, e.max)))
            choice = asn1.sequence(*items)
        blocks.append(asn1.sequence(asn1.octet_string(afi), choice))
    return asn1.der_encode(asn1.sequence(*blocks))


def decode_ip_resources(raw: bytes) -> Tuple[iputil.IpEntry, ...]:
    tree = asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
    entries: List[iputil.IpEntry] = []
    for block in tree.children:
        afi = block.children[0].content[:2]
        fam = iputil.V4 if afi == AFI_V4 else iputil.V6
        choice = block.children[1]
        if choice.is_universal(asn1.TAG_NULL):
            entries.append(iputil.IpInherit(fam))
            continue
        for member in choice.children:
            if member.is_universal(asn1.TAG_BIT_STRING):
                addr, length = _decode_addr_bits(member, fam, fill_ones=False)
                entries.append(iputil.IpPrefix(fam, addr, length))
            else:
                lo, _ = _decode_addr_bits(member.children[0], fam, fill_ones=False)
                hi, _ = _decode_addr_bits(member.children[1], fam, fill_ones=True)
                entries.append(iputil.IpRange(fam, lo, hi))
    return tuple(entries)


def encode_as_resources(entries: Sequence[iputil.AsEntry]) -> bytes:
    if any(isinstance(e, iputil.AsInherit) for e in entries):
        choice = asn1.null()
    else:
        items = []
        for e in entries:
            if e.min == e.max:
                items.append(asn1.integer(e.min))
            else:
                items.append(asn1.sequence(asn1.integer(e.min), asn1.integer(e.max)))
        choice = asn1.sequence(*items)
    return asn1.der_encode(asn1.sequence(asn1.context_explicit(0, choice)))


def decode_as_resources(raw: bytes) -> Tuple[iputil.AsEntry, ...]:
    tree = asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
    entries: List[iputil.AsEntry] = []
    for tagged in tree.children:
        if not tagged.is_context(0):
            continue  # rdi is outside the RPKI profile; preserve-and-ignore
        choice = tagged.children[0]
        if choice.is_universal(asn1.TAG_NULL):
            entries.append(iputil.AsInherit())
            continue
        for member in choice.children:
            if member.is_universal(asn1.TAG_INTEGER):
                value = member.as_int(asn1.IntegerInterpretation.UNSIGNED)
                entries.append(iputil.AsRange(value, value))
            else:
                lo = member.children[0].as_int(asn1.IntegerInterpretation.UNSIGNED)
                hi = member.children[1].as_int(asn1.IntegerInterpretation.UNSIGNED)
                entries.append(iputil.AsRange(lo, hi))
    return tuple(entries)


def encode_policies(policies: Sequence[Tuple[str, Sequence[Tuple[str, str]]]]) -> bytes:
    infos = []
    for policy_oid, qualifiers in policies:
        parts = [asn1.oid(policy_oid)]
        if qualifiers:
            quals = [
                asn1.sequence(asn1.oid(qoid), asn1.ia5_string(text))
                for qoid, text in qualifiers
            ]
            parts.append(asn1.sequence(*quals))
        infos.append(asn1.sequence(*parts))
    return asn1.der_encode(asn1.sequence(*infos))


def decode_policies(raw: bytes) -> Tuple[Tuple[str, Tuple[Tuple[str, bytes], ...]], ...]:
    tree = asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
    out = []
    for info in tree.children:
        policy_oid = info.children[0].as_oid()
        quals: List[Tuple[str, bytes]] = []
        if len(info.children) > 1:
            for qual in info.children[1].children:
                quals.append((qual.children[0].as_oid(), qual.children[1].content))
        out.append((policy_oid, tuple(quals)))
    return tuple(out)


def _access_descriptions(pairs: Sequence[Tuple[str, str]]) -> bytes:
    descs = [
        asn1.sequence(asn1.oid(method), asn1.context_primitive(6, uri.encode("ascii")))
        for method, uri in pairs
    ]
    return asn1.der_encode(asn1.sequence(*descs))


def _decode_access_descriptions(raw: bytes) -> Tuple[Tuple[str, str], ...]:
    tree = asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
    out = []
    for desc in tree.children:
        method = desc.children[0].as_oid()
        uri = desc.children[1].content.decode("ascii", "replace")
        out.append((method, uri))
    return tuple(out)


def _crl_dp_value(uri: str) -> bytes:
    general_name = asn1.context_primitive(6, uri.encode("ascii"))
    dp_name = asn1.context_constructed(0, [asn1.context_constructed(0, [general_name])])
    return asn1.der_encode(asn1.sequence(asn1.sequence(dp_name)))


def _decode_crl_dp(raw: bytes) -> Optional[str]:
    tree = asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
    for dp in tree.children:
        for child in dp.children:
            if child.is_context(0):
                inner = child.children[0]
                for name in inner.children:
                    if name.is_context(6):
                        return name.content.decode("ascii", "replace")
    return None


def _decode_basic_constraints(raw: bytes) -> bool:
    tree = asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
    return bool(tree.children and tree.children[0].as_bool())


_KNOWN_DECODERS = {
    oids.BASIC_CONSTRAINTS: _decode_basic_constraints,
    oids.IP_ADDR_BLOCKS: decode_ip_resources,
    oids.AS_IDENTIFIERS: decode_as_resources,
    oids.CERTIFICATE_POLICIES: decode_policies,
    oids.SUBJECT_INFO_ACCESS: _decode_access_descriptions,
    oids.AUTHORITY_INFO_ACCESS: _decode_access_descriptions,
    oids.CRL_DISTRIBUTION_POINTS: _decode_crl_dp,
    oids.SUBJECT_KEY_IDENTIFIER: lambda raw: asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT).content,
    oids.KEY_USAGE: lambda raw: asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT).bit_string_bytes(),
}


def _decode_extension(oid: str, critical: bool, raw: bytes) -> Extension:
    decoder = _KNOWN_DECODERS.get(oid)
    try:
        if decoder is not None:
            return Extension(oid, critical, raw, decoded=decoder(raw))
        asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
        return Extension(oid, critical, raw)
    except (asn1.Asn1Error, ObjectParseError, ValueError, IndexError):
        return Extension(oid, critical, raw, decode_failed=True)


def encode_extension(oid: str, critical: bool, value: bytes) -> Asn1Item:
    parts = [asn1.oid(oid)]
    if critical:
        parts.append(asn1.boolean(True))
    parts.append(asn1.octet_string(value))
    return asn1.sequence(*parts)


# ---------------------------------------------------------------------------
# Certificate builder
# ---------------------------------------------------------------------------

def _algorithm_identifier(alg: keys.SignatureAlgorithm) -> Asn1Item:
    if alg is keys.SignatureAlgorithm.RSA_SHA256:
        return asn1.sequence(asn1.oid(oids.SHA256_WITH_RSA), asn1.null())
    return asn1.sequence(asn1.oid(oids.ECDSA_WITH_SHA256))


def build_certificate(
    *,
    serial: Union[int, RawInteger],
    issuer: Sequence[Tuple[str, str]],
    subject: Sequence[Tuple[str, str]],
    not_before: int,
    not_after: int,
    public_key,
    signing_key,
    is_ca: bool,
    ip_entries: Sequence[iputil.IpEntry] = (),
    as_entries: Sequence[iputil.AsEntry] = (),
    policies: Sequence[Tuple[str, Sequence[Tuple[str, str]]]] = ((oids.CP_IPADDR_ASNUMBER, ()),),
    crl_dp: Optional[str] = None,
    aia: Optional[str] = None,
    sia: Sequence[Tuple[str, str]] = (),
    extra_extensions: Sequence[Tuple[str, bool, bytes]] = (),
    omit_extensions: Sequence[str] = (),
    raw_ip_resources: Optional[bytes] = None,
    signature_algorithm: Optional[keys.SignatureAlgorithm] = None,
) -> ResourceCertificate:
    """Assemble and sign a resource certificate.

    ``extra_extensions`` are appended verbatim (tools inject duplicates
    and unknown OIDs through it); ``omit_extensions`` drops listed
    standard extensions; ``raw_ip_resources`` overrides the encoded IP
    delegation extension byte-for-byte.
    """
    spki = keys.spki_der(public_key)
    alg = signature_algorithm or keys.algorithm_for_key(signing_key)
    omit = set(omit_extensions)

    extensions: List[Asn1Item] = []

    def add(oid: str, critical: bool, value: bytes):
        if oid not in omit:
            extensions.append(encode_extension(oid, critical, value))

    if is_ca:
        add(oids.BASIC_CONSTRAINTS, True, asn1.der_encode(asn1.sequence(asn1.boolean(True))))
    add(oids.SUBJECT_KEY_IDENTIFIER, False,
        asn1.der_encode(asn1.octet_string(keys.key_identifier(spki))))
    add(oids.AUTHORITY_KEY_IDENTIFIER, False, asn1.der_encode(asn1.sequence(
        asn1.context_primitive(0, keys.key_identifier(keys.spki_der(signing_key))))))
    if is_ca:
        add(oids.KEY_USAGE, True, asn1.der_encode(asn1.bit_string(b"\x06", 1)))
    else:
        add(oids.KEY_USAGE, True, asn1.der_encode(asn1.bit_string(b"\x80", 7)))
    if crl_dp:
        add(oids.CRL_DISTRIBUTION_POINTS, False, _crl_dp_value(crl_dp))
    if aia:
        add(oids.AUTHORITY_INFO_ACCESS, False, _access_descriptions([(oids.AD_CA_ISSUERS, aia)]))
    if sia:
        add(oids.SUBJECT_INFO_ACCESS, False, _access_descriptions(list(sia)))
    if policies:
        add(oids.CERTIFICATE_POLICIES, True, encode_policies(policies))
    if raw_ip_resources is not None:
        add(oids.IP_ADDR_BLOCKS, True, raw_ip_resources)
    elif ip_entries:
        add(oids.IP_ADDR_BLOCKS, True, encode_ip_resources(ip_entries))
    if as_entries:
        add(oids.AS_IDENTIFIERS, True, encode_as_resources(as_entries))
    for ext_oid, critical, value in extra_extensions:
        extensions.append(encode_extension(ext_oid, critical, value))

    serial_raw = serial if isinstance(serial, RawInteger) else RawInteger.from_int(serial)
    spki_item = asn1.der_decode(spki, EncodingRuleset.BER_TOLERANT)
    tbs = asn1.sequence(
        asn1.context_explicit(0, asn1.integer(2)),
        asn1.integer(serial_raw),
        _algorithm_identifier(alg),
        encode_name(issuer),
        asn1.sequence(asn1.time_item(not_before), asn1.time_item(not_after)),
        encode_name(subject),
        spki_item,
        asn1.context_explicit(3, asn1.sequence(*extensions)),
    )
    tbs_der = asn1.der_encode(tbs)
    signature = keys.sign(signing_key, tbs_der)
    cert = asn1.sequence(tbs, _algorithm_identifier(alg), asn1.bit_string(signature))
    return parse_certificate(asn1.der_encode(cert), EncodingRuleset.BER_TOLERANT)


def parse_certificate(der: bytes, ruleset: EncodingRuleset = EncodingRuleset.BER_TOLERANT) -> ResourceCertificate:
    try:
        tree = asn1.der_decode(der, ruleset)
        tbs, alg_item, sig_item = tree.children
        tbs_children = list(tbs.children)
        idx = 0
        if tbs_children and tbs_children[0].is_context(0):
            idx = 1  # explicit version
        serial = tbs_children[idx].raw_integer()
        issuer = decode_name(tbs_children[idx + 2])
        validity = tbs_children[idx + 3]
        not_before = validity.children[0].as_time()
        not_after = validity.children[1].as_time()
        subject = decode_name(tbs_children[idx + 4])
        spki_item = tbs_children[idx + 5]
        spki = asn1.der_encode(spki_item)
        public_key_alg = spki_item.children[0].children[0].as_oid()

        extensions: List[Extension] = []
        for child in tbs_children[idx + 6:]:
            if child.is_context(3):
                for ext in child.children[0].children:
                    parts = list(ext.children)
                    ext_oid = parts[0].as_oid()
                    critical = False
                    value_item = parts[-1]
                    if len(parts) == 3:
                        critical = parts[1].as_bool()
                    extensions.append(_decode_extension(ext_oid, critical, value_item.content))

        return ResourceCertificate(
            der=der,
            tbs_der=asn1.der_encode(tbs),
            serial=serial,
            issuer=issuer,
            subject=subject,
            not_before=not_before,
            not_after=not_after,
            public_key_alg=public_key_alg,
            spki=spki,
            extensions=tuple(extensions),
            signature_alg=alg_item.children[0].as_oid(),
            signature=sig_item.bit_string_bytes(),
            flags=tree.all_flags(),
        )
    except asn1.NonCanonicalEncoding:
        raise
    except (asn1.Asn1Error, ObjectParseError):
        raise
    except (IndexError, ValueError, AttributeError) as exc:
        raise ObjectParseError(f"not a certificate: {exc}") from exc


def verify_certificate_signature(cert: ResourceCertificate, issuer_spki: bytes) -> bool:
    return keys.verify_with_spki(issuer_spki, cert.signature, cert.tbs_der)
