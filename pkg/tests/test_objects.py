import hashlib
import random
import shutil
import subprocess

import pytest
from hypothesis import given, settings, strategies as st

from faultline import asn1, cms, iputil, keys, oids, rpkiobjects, x509build
from faultline.asn1 import EncodingRuleset, RawInteger
from faultline.cms import KeyMismatch, build_signed_object, hash_object, verify_signed_object
from faultline.iputil import AsInherit, AsRange, IpInherit, IpPrefix
from faultline.rpkiobjects import (
    Gbr,
    RoaPrefix,
    Tal,
    build_crl,
    build_gbr,
    build_manifest,
    build_roa,
    parse_crl,
    parse_gbr,
    parse_manifest,
    parse_roa,
)
from faultline.x509build import build_certificate, cn, parse_certificate

KEY = keys.pool_rsa_key(0)
EE_KEY = keys.pool_rsa_key(1)
NOT_BEFORE = 1735689600
NOT_AFTER = 2051222400


def _ca_cert(**kwargs):
    defaults = dict(
        serial=1,
        issuer=cn("ta"),
        subject=cn("ta"),
        not_before=NOT_BEFORE,
        not_after=NOT_AFTER,
        public_key=KEY,
        signing_key=KEY,
        is_ca=True,
        ip_entries=[IpPrefix.parse("10.0.0.0/8")],
        as_entries=[AsRange(64496, 65534)],
        sia=[(oids.AD_CA_REPOSITORY, "rsync://ta.test/repo/"),
             (oids.AD_RPKI_MANIFEST, "rsync://ta.test/repo/ta.mft")],
    )
    defaults.update(kwargs)
    return build_certificate(**defaults)


def _ee_cert(uri="rsync://ta.test/repo/obj.roa", **kwargs):
    defaults = dict(
        serial=7,
        issuer=cn("ta"),
        subject=cn("obj-ee"),
        not_before=NOT_BEFORE,
        not_after=NOT_AFTER,
        public_key=EE_KEY,
        signing_key=KEY,
        is_ca=False,
        ip_entries=[IpInherit(4), IpInherit(6)],
        as_entries=[AsInherit()],
        crl_dp="rsync://ta.test/repo/ta.crl",
        aia="rsync://ta.test/ta.cer",
        sia=[(oids.AD_SIGNED_OBJECT, uri)],
    )
    defaults.update(kwargs)
    return build_certificate(**defaults)


class TestHashObject:
    def test_empty(self):
        assert hash_object(b"").hex() == (
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")

    def test_abc(self):
        assert hash_object(b"abc").hex() == (
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")

    @pytest.mark.skipif(shutil.which("sha256sum") is None, reason="no external digest tool")
    def test_against_external_tool(self):
        data = _ca_cert().der
        out = subprocess.run(["sha256sum"], input=data, capture_output=True, check=True)
        assert out.stdout.split()[0].decode() == hash_object(data).hex()


class TestCertificate:
    def test_round_trip_fields(self):
        cert = _ca_cert()
        again = parse_certificate(cert.der, EncodingRuleset.DER_STRICT)
        assert again.serial == cert.serial
        assert again.issuer == cert.issuer == cn("ta")
        assert again.subject == cert.subject
        assert again.not_before == NOT_BEFORE and again.not_after == NOT_AFTER
        assert again.basic_constraints_ca
        assert again.ip_resources == (IpPrefix.parse("10.0.0.0/8"),)
        assert again.as_resources == (AsRange(64496, 65534),)
        assert again.certificate_policies == ((oids.CP_IPADDR_ASNUMBER, ()),)

    def test_strict_reencode_is_identity(self):
        cert = _ca_cert()
        tree = asn1.der_decode(cert.der, EncodingRuleset.DER_STRICT)
        assert asn1.der_encode(tree) == cert.der

    def test_signature_verifies(self):
        cert = _ca_cert()
        assert x509build.verify_certificate_signature(cert, cert.spki)

    def test_duplicate_extensions_preserved(self):
        null = asn1.der_encode(asn1.null())
        cert = _ca_cert(extra_extensions=[("1.2.3.4", False, null)] * 2)
        assert len(cert.exts("1.2.3.4")) == 2

    def test_undecodable_known_extension_flagged(self):
        cert = _ca_cert(extra_extensions=[(oids.IP_ADDR_BLOCKS, True, b"\xff\x01")],
                        omit_extensions=[oids.IP_ADDR_BLOCKS])
        ext = cert.ext(oids.IP_ADDR_BLOCKS)
        assert ext is not None and ext.decode_failed

    def test_ip_range_encoding_round_trip(self):
        entries = [iputil.IpRange(4, 0x0A000001, 0x0A0000FE)]
        cert = _ca_cert(ip_entries=entries)
        assert cert.ip_resources == tuple(entries)

    def test_v6_prefix_round_trip(self):
        entries = [IpPrefix.parse("2001:db8::/32")]
        cert = _ca_cert(ip_entries=entries)
        assert cert.ip_resources == tuple(entries)

    def test_inherit_round_trip(self):
        cert = _ee_cert()
        assert cert.ip_resources == (IpInherit(4), IpInherit(6))
        assert isinstance(cert.as_resources[0], type(AsInherit()))

    def test_raw_serial_preserved(self):
        cert = _ca_cert(serial=RawInteger(b"\xff"))
        assert cert.serial.bytes == b"\xff"

    def test_not_a_certificate(self):
        with pytest.raises(x509build.ObjectParseError):
            parse_certificate(asn1.der_encode(asn1.integer(5)))


class TestSignedObjects:
    def test_build_verify_roundtrip(self):
        ee = _ee_cert()
        signed = build_signed_object(oids.CT_ROA, b"payload", ee, EE_KEY)
        ok, reasons = verify_signed_object(signed)
        assert ok, reasons
        assert signed.message_digest == hashlib.sha256(b"payload").digest()
        assert signed.signed_object_uri == "rsync://ta.test/repo/obj.roa"

    def test_flipped_econtent_fails(self):
        ee = _ee_cert()
        signed = build_signed_object(oids.CT_ROA, b"payload", ee, EE_KEY)
        tampered = signed.der.replace(b"payload", b"pAyload")
        reparsed = cms.parse_signed_object(tampered)
        ok, reasons = verify_signed_object(reparsed)
        assert not ok and any("digest" in r for r in reasons)

    def test_key_mismatch(self):
        ee = _ee_cert()
        with pytest.raises(KeyMismatch):
            build_signed_object(oids.CT_ROA, b"x", ee, keys.pool_rsa_key(2))

    def test_wrong_digest_attribute(self):
        ee = _ee_cert()
        signed = build_signed_object(oids.CT_ROA, b"x", ee, EE_KEY,
                                     message_digest_override=b"\x00" * 32)
        ok, reasons = verify_signed_object(signed)
        assert not ok

    def test_ecdsa_signed_object(self):
        ec_key = keys.pool_ec_key(0)
        ee = _ee_cert(public_key=ec_key)
        signed = build_signed_object(oids.CT_ROA, b"x", ee, ec_key)
        assert signed.signature_algorithm is keys.SignatureAlgorithm.ECDSA_P256_SHA256
        ok, reasons = verify_signed_object(signed)
        assert ok, reasons


class TestRoa:
    def test_round_trip(self):
        ee = _ee_cert(ip_entries=[IpPrefix.parse("10.0.0.0/24")])
        roa = build_roa(64500, [RoaPrefix.parse("10.0.0.0/24", 28)], ee, EE_KEY)
        again = parse_roa(roa.der)
        assert again.as_id == roa.as_id
        assert again.prefixes == (RoaPrefix.parse("10.0.0.0/24", 28),)

    def test_raw_asid_preserved(self):
        ee = _ee_cert(ip_entries=[IpPrefix.parse("10.0.0.0/24")])
        roa = build_roa(RawInteger(b"\xff"), [RoaPrefix.parse("10.0.0.0/24")], ee, EE_KEY)
        assert parse_roa(roa.der).as_id.bytes == b"\xff"

    def test_builder_rejects_bad_maxlength(self):
        ee = _ee_cert()
        with pytest.raises(ValueError):
            rpkiobjects.encode_roa_content(1, [RoaPrefix.parse("10.0.0.0/24", 12)])

    def test_decode_preserves_bad_maxlength(self):
        # Hand-encode maxLength 40 (out of range for v4).
        bits = rpkiobjects._roa_prefix_bits(RoaPrefix.parse("10.0.0.0/24"))
        body = asn1.sequence(
            asn1.integer(64500),
            asn1.sequence(asn1.sequence(
                asn1.octet_string(b"\x00\x01"),
                asn1.sequence(asn1.sequence(bits, asn1.integer(40))),
            )),
        )
        as_id, prefixes = rpkiobjects.decode_roa_content(asn1.der_encode(body))
        assert prefixes[0].max_length == 40


class TestManifest:
    def test_round_trip(self):
        ee = _ee_cert(uri="rsync://ta.test/repo/ta.mft")
        files = [(b"a.roa", hash_object(b"A")), (b"ta.crl", hash_object(b"C"))]
        mft = build_manifest(5, NOT_BEFORE, NOT_BEFORE + 86400, files, ee, EE_KEY)
        again = parse_manifest(mft.der)
        assert again.number() == 5
        assert again.file_list == tuple(files)

    def test_empty_file_list(self):
        ee = _ee_cert(uri="rsync://ta.test/repo/ta.mft")
        mft = build_manifest(1, NOT_BEFORE, NOT_BEFORE + 86400, [], ee, EE_KEY)
        assert parse_manifest(mft.der).file_list == ()

    @settings(max_examples=200, deadline=None)
    @given(st.binary(min_size=1, max_size=40))
    def test_filename_bytes_roundtrip(self, name):
        ee = _ee_cert(uri="rsync://ta.test/repo/ta.mft")
        mft = build_manifest(1, NOT_BEFORE, NOT_BEFORE + 1, [(name, hash_object(name))],
                             ee, EE_KEY)
        assert parse_manifest(mft.der).file_list[0][0] == name

    def test_lone_continuation_byte_name(self):
        ee = _ee_cert(uri="rsync://ta.test/repo/ta.mft")
        mft = build_manifest(1, NOT_BEFORE, NOT_BEFORE + 1, [(b"\xbf", hash_object(b""))],
                             ee, EE_KEY)
        assert parse_manifest(mft.der).file_list[0][0] == b"\xbf"


class TestCrl:
    def test_round_trip(self):
        crl = build_crl(cn("ta"), 3, NOT_BEFORE, NOT_BEFORE + 86400, [5, 9], KEY)
        again = parse_crl(crl.der)
        assert again.crl_number.interpret(asn1.IntegerInterpretation.UNSIGNED) == 3
        assert [s.bytes for s in again.revoked_serials] == [b"\x05", b"\x09"]
        assert again.is_revoked(RawInteger(b"\x05"))
        assert rpkiobjects.verify_crl_signature(again, keys.spki_der(KEY))

    def test_builder_rejects_duplicates(self):
        with pytest.raises(ValueError):
            build_crl(cn("ta"), 1, NOT_BEFORE, NOT_BEFORE + 1, [5, 5], KEY)

    def test_decode_preserves_duplicates(self):
        crl = build_crl(cn("ta"), 1, NOT_BEFORE, NOT_BEFORE + 1, [5], KEY)
        from faultline.fuzzing import _duplicate_crl_entry
        spliced = _duplicate_crl_entry(KEY)(crl.der)
        again = parse_crl(spliced)
        assert [s.bytes for s in again.revoked_serials] == [b"\x05", b"\x05"]
        assert rpkiobjects.verify_crl_signature(again, keys.spki_der(KEY))


class TestGbr:
    def test_round_trip(self):
        ee = _ee_cert(uri="rsync://ta.test/repo/noc.gbr")
        gbr = build_gbr([("FN", "Net Ops"), ("EMAIL", "noc@example.net")], ee, EE_KEY)
        again = parse_gbr(gbr.der)
        assert ("FN", "Net Ops") in again.vcard

    def test_builder_requires_fn(self):
        with pytest.raises(ValueError):
            rpkiobjects.encode_vcard([("EMAIL", "x@example.net")])


class TestTal:
    def test_text_round_trip(self):
        tal = Tal(uris=("https://ta.test/ta.cer", "rsync://ta.test/repo/ta.cer"),
                  spki=keys.spki_der(KEY))
        again = Tal.from_text(tal.to_text())
        assert again.uris == tal.uris
        assert again.spki == tal.spki

    def test_requires_uri(self):
        with pytest.raises(ValueError):
            Tal(uris=(), spki=b"x")

    def test_scheme_restriction(self):
        with pytest.raises(ValueError):
            Tal(uris=("ftp://ta.test/ta.cer",), spki=b"x")

    def test_comment_lines_skipped(self):
        text = "# example anchor\nhttps://ta.test/ta.cer\n\nAAECAw==\n"
        tal = Tal.from_text(text)
        assert tal.uris == ("https://ta.test/ta.cer",)
        assert tal.spki == bytes([0, 1, 2, 3])


class TestSeedCorpusRoundTrip:
    def test_all_objects_strict_reencode_identity(self):
        """Every object our builders emit is strict-DER; decoding then
        re-encoding the item tree must reproduce the bytes."""
        from faultline import cabuild
        fixture, ta, child = cabuild.simple_tree(roas=2)
        child.add_gbr("noc", [("FN", "Ops")])
        child.commit()
        seen = 0
        for mount in fixture.mounts.values():
            for _, data in mount.state.objects:
                tree = asn1.der_decode(data, EncodingRuleset.DER_STRICT)
                assert asn1.der_encode(tree) == data
                seen += 1
        assert seen >= 8
