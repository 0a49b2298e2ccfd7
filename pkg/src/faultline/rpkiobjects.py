"""ROA, manifest, CRL, Ghostbuster record, and TAL codecs.

Content codecs preserve what the wire carries: ROA AS ids stay raw
octets so both integer readings remain possible, manifest file names
stay raw bytes even when they are not valid UTF-8, and CRL serial
duplicates survive decoding. Builders, by contrast, enforce the
well-formedness the profiles expect.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from . import asn1, iputil, keys, oids
from .asn1 import Asn1Item, EncodingRuleset, IntegerInterpretation, RawInteger
from .cms import SignedObject, build_signed_object, parse_signed_object
from .x509build import (
    ObjectParseError,
    ResourceCertificate,
    decode_name,
    encode_name,
    parse_certificate,
)


# ---------------------------------------------------------------------------
# ROA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoaPrefix:
    family: int
    addr: int
    length: int
    max_length: Optional[int] = None

    @classmethod
    def parse(cls, text: str, max_length: Optional[int] = None) -> "RoaPrefix":
        p = iputil.IpPrefix.parse(text)
        return cls(p.family, p.addr, p.length, max_length)

    def ip_prefix(self) -> iputil.IpPrefix:
        return iputil.IpPrefix(self.family, self.addr, self.length)

    def __str__(self):
        suffix = f"-{self.max_length}" if self.max_length is not None else ""
        return f"{self.ip_prefix()}{suffix}"


@dataclass(frozen=True)
class Roa:
    signed: SignedObject
    as_id: RawInteger
    prefixes: Tuple[RoaPrefix, ...]

    @property
    def der(self) -> bytes:
        return self.signed.der

    @property
    def ee_certificate(self) -> ResourceCertificate:
        return self.signed.ee_certificate

    @property
    def signed_object_uri(self) -> Optional[str]:
        return self.signed.signed_object_uri


def encode_roa_content(as_id: Union[int, RawInteger], prefixes: Sequence[RoaPrefix]) -> bytes:
    """ROA eContent. ``max_length`` bounds are the builder's to enforce;
    raw AS octets pass through untouched."""
    raw_as = as_id if isinstance(as_id, RawInteger) else RawInteger.from_int(as_id)
    families: dict = {}
    order: List[int] = []
    for p in prefixes:
        if p.max_length is not None and not p.length <= p.max_length <= iputil.family_bits(p.family):
            raise ValueError(f"maxLength {p.max_length} out of range for {p}")
        if p.family not in families:
            families[p.family] = []
            order.append(p.family)
        families[p.family].append(p)
    blocks = []
    for fam in order:
        afi = b"\x00\x01" if fam == iputil.V4 else b"\x00\x02"
        addresses = []
        for p in families[fam]:
            parts = [_roa_prefix_bits(p)]
            if p.max_length is not None:
                parts.append(asn1.integer(p.max_length))
            addresses.append(asn1.sequence(*parts))
        blocks.append(asn1.sequence(asn1.octet_string(afi), asn1.sequence(*addresses)))
    content = asn1.sequence(asn1.integer(raw_as), asn1.sequence(*blocks))
    return asn1.der_encode(content)


def _roa_prefix_bits(p: RoaPrefix) -> Asn1Item:
    nbytes = (p.length + 7) // 8
    unused = nbytes * 8 - p.length
    bits = iputil.family_bits(p.family)
    payload = (p.addr >> (bits - nbytes * 8)).to_bytes(nbytes, "big") if nbytes else b""
    return asn1.bit_string(payload, unused)


def decode_roa_content(raw: bytes) -> Tuple[RawInteger, Tuple[RoaPrefix, ...]]:
    tree = asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
    children = list(tree.children)
    if children and children[0].is_context(0):
        children = children[1:]  # explicit version
    as_id = children[0].raw_integer()
    prefixes: List[RoaPrefix] = []
    for block in children[1].children:
        afi = block.children[0].content[:2]
        fam = iputil.V4 if afi == b"\x00\x01" else iputil.V6
        bits = iputil.family_bits(fam)
        for addr_item in block.children[1].children:
            bit_item = addr_item.children[0]
            unused = bit_item.bit_string_unused()
            payload = bit_item.bit_string_bytes()
            length = len(payload) * 8 - unused
            if length > bits:
                raise ObjectParseError("ROA prefix longer than family width")
            top = int.from_bytes(payload, "big") >> unused if payload else 0
            addr = top << (bits - length)
            max_length = None
            if len(addr_item.children) > 1:
                max_length = addr_item.children[1].as_int(IntegerInterpretation.TWOS_COMPLEMENT)
            prefixes.append(RoaPrefix(fam, addr, length, max_length))
    return as_id, tuple(prefixes)


def build_roa(
    as_id: Union[int, RawInteger],
    prefixes: Sequence[RoaPrefix],
    ee_certificate: ResourceCertificate,
    signing_key,
) -> Roa:
    content = encode_roa_content(as_id, prefixes)
    signed = build_signed_object(oids.CT_ROA, content, ee_certificate, signing_key)
    return parse_roa(signed.der)


def parse_roa(der: bytes, ruleset: EncodingRuleset = EncodingRuleset.BER_TOLERANT) -> Roa:
    signed = parse_signed_object(der, ruleset)
    as_id, prefixes = decode_roa_content(signed.econtent)
    return Roa(signed=signed, as_id=as_id, prefixes=prefixes)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Manifest:
    signed: SignedObject
    manifest_number: RawInteger
    this_update: int
    next_update: int
    file_list: Tuple[Tuple[bytes, bytes], ...]  # (name bytes, sha256)

    @property
    def der(self) -> bytes:
        return self.signed.der

    @property
    def ee_certificate(self) -> ResourceCertificate:
        return self.signed.ee_certificate

    def number(self) -> int:
        return asn1.decode_integer(self.manifest_number, IntegerInterpretation.UNSIGNED)


def encode_manifest_content(
    manifest_number: Union[int, RawInteger],
    this_update: int,
    next_update: int,
    file_list: Sequence[Tuple[bytes, bytes]],
) -> bytes:
    raw_num = manifest_number if isinstance(manifest_number, RawInteger) else RawInteger.from_int(manifest_number)
    entries = []
    for name, digest in file_list:
        if len(digest) != 32:
            raise ValueError("manifest hashes are 32-byte SHA-256 values")
        entries.append(asn1.sequence(asn1.ia5_string(name), asn1.bit_string(digest)))
    content = asn1.sequence(
        asn1.integer(raw_num),
        asn1.generalized_time(this_update),
        asn1.generalized_time(next_update),
        asn1.oid(oids.SHA256),
        asn1.sequence(*entries),
    )
    return asn1.der_encode(content)


def decode_manifest_content(raw: bytes) -> Tuple[RawInteger, int, int, Tuple[Tuple[bytes, bytes], ...]]:
    tree = asn1.der_decode(raw, EncodingRuleset.BER_TOLERANT)
    children = list(tree.children)
    if children and children[0].is_context(0):
        children = children[1:]
    number = children[0].raw_integer()
    this_update = children[1].as_time()
    next_update = children[2].as_time()
    files: List[Tuple[bytes, bytes]] = []
    for entry in children[4].children:
        name = entry.children[0].content
        digest = entry.children[1].bit_string_bytes()
        files.append((name, digest))
    return number, this_update, next_update, tuple(files)


def build_manifest(
    manifest_number: Union[int, RawInteger],
    this_update: int,
    next_update: int,
    file_list: Sequence[Tuple[bytes, bytes]],
    ee_certificate: ResourceCertificate,
    signing_key,
) -> Manifest:
    content = encode_manifest_content(manifest_number, this_update, next_update, file_list)
    signed = build_signed_object(oids.CT_MANIFEST, content, ee_certificate, signing_key)
    return parse_manifest(signed.der)


def parse_manifest(der: bytes, ruleset: EncodingRuleset = EncodingRuleset.BER_TOLERANT) -> Manifest:
    signed = parse_signed_object(der, ruleset)
    number, this_update, next_update, files = decode_manifest_content(signed.econtent)
    return Manifest(signed=signed, manifest_number=number, this_update=this_update,
                    next_update=next_update, file_list=files)


# ---------------------------------------------------------------------------
# CRL
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Crl:
    der: bytes
    tbs_der: bytes
    issuer: Tuple[Tuple[str, str], ...]
    crl_number: RawInteger
    this_update: int
    next_update: int
    revoked_serials: Tuple[RawInteger, ...]
    signature: bytes
    signature_alg: str
    flags: Tuple[str, ...] = ()

    def is_revoked(self, serial: RawInteger) -> bool:
        return any(s.bytes == serial.bytes for s in self.revoked_serials)


def build_crl(
    issuer: Sequence[Tuple[str, str]],
    crl_number: Union[int, RawInteger],
    this_update: int,
    next_update: int,
    revoked_serials: Sequence[Union[int, RawInteger]],
    signing_key,
    revocation_time: Optional[int] = None,
) -> Crl:
    raw_serials = [
        s if isinstance(s, RawInteger) else RawInteger.from_int(s) for s in revoked_serials
    ]
    seen = set()
    for s in raw_serials:
        if s.bytes in seen:
            raise ValueError("duplicate serial in built CRL")
        seen.add(s.bytes)
    raw_number = crl_number if isinstance(crl_number, RawInteger) else RawInteger.from_int(crl_number)
    alg = keys.algorithm_for_key(signing_key)
    alg_item = (
        asn1.sequence(asn1.oid(oids.SHA256_WITH_RSA), asn1.null())
        if alg is keys.SignatureAlgorithm.RSA_SHA256
        else asn1.sequence(asn1.oid(oids.ECDSA_WITH_SHA256))
    )
    parts: List[Asn1Item] = [
        asn1.integer(1),
        alg_item,
        encode_name(issuer),
        asn1.time_item(this_update),
        asn1.time_item(next_update),
    ]
    if raw_serials:
        when = revocation_time if revocation_time is not None else this_update
        parts.append(asn1.sequence(*[
            asn1.sequence(asn1.integer(s), asn1.time_item(when)) for s in raw_serials
        ]))
    aki = asn1.der_encode(asn1.sequence(
        asn1.context_primitive(0, keys.key_identifier(keys.spki_der(signing_key)))))
    crl_num_ext = asn1.der_encode(asn1.integer(raw_number))
    extensions = asn1.sequence(
        asn1.sequence(asn1.oid(oids.AUTHORITY_KEY_IDENTIFIER), asn1.octet_string(aki)),
        asn1.sequence(asn1.oid(oids.CRL_NUMBER), asn1.octet_string(crl_num_ext)),
    )
    parts.append(asn1.context_explicit(0, extensions))
    tbs = asn1.sequence(*parts)
    tbs_der = asn1.der_encode(tbs)
    signature = keys.sign(signing_key, tbs_der)
    crl = asn1.sequence(tbs, alg_item, asn1.bit_string(signature))
    return parse_crl(asn1.der_encode(crl))


def parse_crl(der: bytes, ruleset: EncodingRuleset = EncodingRuleset.BER_TOLERANT) -> Crl:
    try:
        tree = asn1.der_decode(der, ruleset)
        tbs, alg_item, sig_item = tree.children
        children = list(tbs.children)
        idx = 0
        if children[idx].is_universal(asn1.TAG_INTEGER):
            idx += 1  # version
        idx += 1  # signature algorithm
        issuer = decode_name(children[idx]); idx += 1
        this_update = children[idx].as_time(); idx += 1
        next_update = children[idx].as_time(); idx += 1
        revoked: List[RawInteger] = []
        crl_number = RawInteger(b"\x00")
        for child in children[idx:]:
            if child.is_universal(asn1.TAG_SEQUENCE):
                for entry in child.children:
                    revoked.append(entry.children[0].raw_integer())
            elif child.is_context(0):
                for ext in child.children[0].children:
                    ext_oid = ext.children[0].as_oid()
                    if ext_oid == oids.CRL_NUMBER:
                        inner = asn1.der_decode(ext.children[-1].content, EncodingRuleset.BER_TOLERANT)
                        crl_number = inner.raw_integer()
        return Crl(
            der=der,
            tbs_der=asn1.der_encode(tbs),
            issuer=issuer,
            crl_number=crl_number,
            this_update=this_update,
            next_update=next_update,
            revoked_serials=tuple(revoked),
            signature=sig_item.bit_string_bytes(),
            signature_alg=alg_item.children[0].as_oid(),
            flags=tree.all_flags(),
        )
    except asn1.NonCanonicalEncoding:
        raise
    except (asn1.Asn1Error, IndexError, ValueError, AttributeError) as exc:
        raise ObjectParseError(f"not a CRL: {exc}") from exc


def verify_crl_signature(crl: Crl, issuer_spki: bytes) -> bool:
    return keys.verify_with_spki(issuer_spki, crl.signature, crl.tbs_der)


# ---------------------------------------------------------------------------
# Ghostbusters record
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gbr:
    signed: SignedObject
    vcard: Tuple[Tuple[str, str], ...]

    @property
    def der(self) -> bytes:
        return self.signed.der

    @property
    def ee_certificate(self) -> ResourceCertificate:
        return self.signed.ee_certificate


def encode_vcard(properties: Sequence[Tuple[str, str]]) -> bytes:
    if not any(p.upper() == "FN" for p, _ in properties):
        raise ValueError("vCard requires an FN property")
    lines = ["BEGIN:VCARD", "VERSION:4.0"]
    lines.extend(f"{prop}:{value}" for prop, value in properties)
    lines.append("END:VCARD")
    return ("\r\n".join(lines) + "\r\n").encode("utf-8")


def decode_vcard(raw: bytes) -> Tuple[Tuple[str, str], ...]:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ObjectParseError(f"vCard is not UTF-8: {exc}") from exc
    props: List[Tuple[str, str]] = []
    for line in text.splitlines():
        if not line or line.upper() in ("BEGIN:VCARD", "END:VCARD") or line.upper().startswith("VERSION:"):
            continue
        if ":" not in line:
            raise ObjectParseError(f"malformed vCard line {line!r}")
        prop, value = line.split(":", 1)
        props.append((prop, value))
    return tuple(props)


def build_gbr(properties: Sequence[Tuple[str, str]], ee_certificate: ResourceCertificate, signing_key) -> Gbr:
    content = encode_vcard(properties)
    signed = build_signed_object(oids.CT_GHOSTBUSTERS, content, ee_certificate, signing_key)
    return parse_gbr(signed.der)


def parse_gbr(der: bytes, ruleset: EncodingRuleset = EncodingRuleset.BER_TOLERANT) -> Gbr:
    signed = parse_signed_object(der, ruleset)
    return Gbr(signed=signed, vcard=decode_vcard(signed.econtent))


# ---------------------------------------------------------------------------
# TAL
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tal:
    uris: Tuple[str, ...]
    spki: bytes
    name: str = "trust-anchor"

    def __post_init__(self):
        if not self.uris:
            raise ValueError("TAL requires at least one URI")
        for uri in self.uris:
            scheme = uri.split("://", 1)[0].lower()
            if scheme not in ("https", "rsync"):
                raise ValueError(f"TAL URI scheme must be https or rsync: {uri}")

    def to_text(self) -> str:
        b64 = base64.b64encode(self.spki).decode("ascii")
        wrapped = "\n".join(b64[i:i + 64] for i in range(0, len(b64), 64))
        return "\n".join(self.uris) + "\n\n" + wrapped + "\n"

    @classmethod
    def from_text(cls, text: str, name: str = "trust-anchor") -> "Tal":
        lines = [ln.strip() for ln in text.splitlines()]
        uris: List[str] = []
        i = 0
        while i < len(lines) and lines[i]:
            if not lines[i].startswith("#"):
                uris.append(lines[i])
            i += 1
        b64 = "".join(lines[i:])
        try:
            spki = base64.b64decode(b64, validate=True)
        except binascii.Error as exc:
            raise ObjectParseError(f"TAL key is not valid base64: {exc}") from exc
        return cls(uris=tuple(uris), spki=spki, name=name)
