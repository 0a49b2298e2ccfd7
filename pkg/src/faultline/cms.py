"""CMS SignedData profile for RPKI signed objects.

Deliberately narrow: SignedData v3, exactly one SignerInfo identified by
subject key identifier, exactly one embedded EE certificate, and signed
attributes limited to content-type and message-digest. That is all the
signed-object template requires, and the restriction keeps divergence
experiments focused on validation policy rather than CMS generality.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Tuple

from . import asn1, keys, oids
from .asn1 import Asn1Item, EncodingRuleset
from .x509build import ObjectParseError, ResourceCertificate, parse_certificate


class KeyMismatch(ValueError):
    """Signing key does not match the EE certificate's public key."""


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_object(data: bytes) -> bytes:
    """SHA-256 as used for manifest entries and RRDP hash attributes."""
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class SignedObject:
    der: bytes
    content_type: str
    econtent: bytes
    ee_certificate: ResourceCertificate
    signed_attr_content_type: Optional[str]
    message_digest: Optional[bytes]
    signed_attrs_der: bytes
    signature_algorithm_oid: str
    signature: bytes
    signer_key_id: Optional[bytes]
    flags: Tuple[str, ...] = ()

    @property
    def signature_algorithm(self) -> keys.SignatureAlgorithm:
        if self.signature_algorithm_oid in (oids.RSA_ENCRYPTION, oids.SHA256_WITH_RSA):
            return keys.SignatureAlgorithm.RSA_SHA256
        return keys.SignatureAlgorithm.ECDSA_P256_SHA256

    @property
    def signed_object_uri(self) -> Optional[str]:
        return self.ee_certificate.sia_uri(oids.AD_SIGNED_OBJECT)


def _digest_alg() -> Asn1Item:
    return asn1.sequence(asn1.oid(oids.SHA256))


def _signature_alg_item(alg: keys.SignatureAlgorithm) -> Asn1Item:
    if alg is keys.SignatureAlgorithm.RSA_SHA256:
        return asn1.sequence(asn1.oid(oids.RSA_ENCRYPTION), asn1.null())
    return asn1.sequence(asn1.oid(oids.ECDSA_WITH_SHA256))


def _attribute(attr_oid: str, value: Asn1Item) -> Asn1Item:
    return asn1.sequence(asn1.oid(attr_oid), asn1.set_of(value))


def build_signed_object(
    content_type_oid: str,
    econtent: bytes,
    ee_certificate: ResourceCertificate,
    signing_key,
    *,
    message_digest_override: Optional[bytes] = None,
) -> SignedObject:
    """Sign ``econtent`` under the EE certificate.

    ``message_digest_override`` plants a wrong digest attribute for
    negative tests; everything else follows the template.
    """
    if keys.spki_der(signing_key) != ee_certificate.spki:
        raise KeyMismatch("signing key does not match EE certificate")
    alg = keys.algorithm_for_key(signing_key)
    digest = message_digest_override or sha256(econtent)

    signed_attrs = asn1.set_of(
        _attribute(oids.CMS_ATTR_CONTENT_TYPE, asn1.oid(content_type_oid)),
        _attribute(oids.CMS_ATTR_MESSAGE_DIGEST, asn1.octet_string(digest)),
    )
    signed_attrs_der = asn1.der_encode(signed_attrs)
    signature = keys.sign(signing_key, signed_attrs_der)

    key_id = keys.key_identifier(ee_certificate.spki)
    signer_info = asn1.sequence(
        asn1.integer(3),
        asn1.context_primitive(0, key_id),
        _digest_alg(),
        asn1.context_constructed(0, signed_attrs.children),
        _signature_alg_item(alg),
        asn1.octet_string(signature),
    )
    cert_item = asn1.der_decode(ee_certificate.der, EncodingRuleset.BER_TOLERANT)
    signed_data = asn1.sequence(
        asn1.integer(3),
        asn1.set_of(_digest_alg()),
        asn1.sequence(
            asn1.oid(content_type_oid),
            asn1.context_explicit(0, asn1.octet_string(econtent)),
        ),
        asn1.context_constructed(0, [cert_item]),
        asn1.set_of(signer_info),
    )
    content_info = asn1.sequence(
        asn1.oid(oids.CMS_SIGNED_DATA),
        asn1.context_explicit(0, signed_data),
    )
    return parse_signed_object(asn1.der_encode(content_info), EncodingRuleset.BER_TOLERANT)


def parse_signed_object(der: bytes, ruleset: EncodingRuleset = EncodingRuleset.BER_TOLERANT) -> SignedObject:
    try:
        tree = asn1.der_decode(der, ruleset)
        if tree.children[0].as_oid() != oids.CMS_SIGNED_DATA:
            raise ObjectParseError("not a CMS signed-data object")
        signed_data = tree.children[1].children[0]
        _, _, encap, certs, signer_infos = signed_data.children[:5]

        content_type = encap.children[0].as_oid()
        econtent = b""
        if len(encap.children) > 1:
            econtent_item = encap.children[1].children[0]
            if econtent_item.constructed:
                # BER constructed OCTET STRING: concatenate the segments.
                econtent = b"".join(seg.content for seg in econtent_item.children)
            else:
                econtent = econtent_item.content

        if not certs.is_context(0) or len(certs.children) != 1:
            raise ObjectParseError("expected exactly one embedded certificate")
        ee_cert = parse_certificate(asn1.der_encode(certs.children[0]), EncodingRuleset.BER_TOLERANT)

        if len(signer_infos.children) != 1:
            raise ObjectParseError("expected exactly one signer")
        signer = signer_infos.children[0]
        sid = signer.children[1]
        signer_key_id = sid.content if sid.is_context(0) else None

        signed_attrs_item = None
        idx = 3
        if signer.children[idx].is_context(0):
            signed_attrs_item = signer.children[idx]
            idx += 1
        sig_alg = signer.children[idx].children[0].as_oid()
        signature = signer.children[idx + 1].content

        attr_content_type = None
        message_digest = None
        signed_attrs_der = b""
        if signed_attrs_item is not None:
            as_set = asn1.constructed(asn1.UNIVERSAL, asn1.TAG_SET, signed_attrs_item.children)
            signed_attrs_der = asn1.der_encode(as_set)
            for attr in signed_attrs_item.children:
                attr_oid = attr.children[0].as_oid()
                values = attr.children[1].children
                if attr_oid == oids.CMS_ATTR_CONTENT_TYPE and values:
                    attr_content_type = values[0].as_oid()
                elif attr_oid == oids.CMS_ATTR_MESSAGE_DIGEST and values:
                    message_digest = values[0].content

        return SignedObject(
            der=der,
            content_type=content_type,
            econtent=econtent,
            ee_certificate=ee_cert,
            signed_attr_content_type=attr_content_type,
            message_digest=message_digest,
            signed_attrs_der=signed_attrs_der,
            signature_algorithm_oid=sig_alg,
            signature=signature,
            signer_key_id=signer_key_id,
            flags=tree.all_flags(),
        )
    except asn1.NonCanonicalEncoding:
        raise
    except ObjectParseError:
        raise
    except (asn1.Asn1Error, IndexError, ValueError, AttributeError) as exc:
        raise ObjectParseError(f"not a signed object: {exc}") from exc


def verify_signed_object(obj: SignedObject) -> Tuple[bool, List[str]]:
    """Template-level verification; certificate chain checks live in the
    validator. Returns (verified, failure reasons)."""
    reasons: List[str] = []
    if obj.signed_attr_content_type != obj.content_type:
        reasons.append("content-type attribute mismatch")
    if obj.message_digest != sha256(obj.econtent):
        reasons.append("message digest mismatch")
    if not obj.signed_attrs_der:
        reasons.append("missing signed attributes")
    elif not keys.verify_with_spki(obj.ee_certificate.spki, obj.signature, obj.signed_attrs_der):
        reasons.append("signature does not verify")
    return (not reasons, reasons)
