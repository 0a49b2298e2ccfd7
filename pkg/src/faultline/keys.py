"""Signing keys and signature primitives.

Test keypairs are pre-generated and shipped with the package so fixture
builders are deterministic and never pay keygen cost; distinct CAs may
share a pool key. RSA PKCS#1 v1.5 with SHA-256 is the profile default;
ECDSA P-256 exists for the non-standard-feature experiments.
"""

from __future__ import annotations

import hashlib
from enum import Enum
from importlib import resources
from typing import List, Optional, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, padding, rsa

from . import oids

PrivateKey = Union[rsa.RSAPrivateKey, ec.EllipticCurvePrivateKey]
PublicKey = Union[rsa.RSAPublicKey, ec.EllipticCurvePublicKey]


class SignatureAlgorithm(Enum):
    RSA_SHA256 = "rsa_sha256"
    ECDSA_P256_SHA256 = "ecdsa_p256_sha256"

    @property
    def oid(self) -> str:
        if self is SignatureAlgorithm.RSA_SHA256:
            return oids.SHA256_WITH_RSA
        return oids.ECDSA_WITH_SHA256


_RSA_POOL: List[rsa.RSAPrivateKey] = []
_EC_POOL: List[ec.EllipticCurvePrivateKey] = []


def _load_pool():
    if _RSA_POOL:
        return
    pkg = resources.files("faultline") / "_testkeys"
    for entry in sorted(p.name for p in pkg.iterdir()):
        pem = (pkg / entry).read_bytes()
        key = serialization.load_pem_private_key(pem, password=None)
        if entry.startswith("rsa"):
            _RSA_POOL.append(key)
        else:
            _EC_POOL.append(key)


def pool_rsa_key(index: int) -> rsa.RSAPrivateKey:
    _load_pool()
    return _RSA_POOL[index % len(_RSA_POOL)]


def pool_ec_key(index: int) -> ec.EllipticCurvePrivateKey:
    _load_pool()
    return _EC_POOL[index % len(_EC_POOL)]


class KeyProvider:
    """Deterministic key hand-out: round-robin over the cached pool."""

    def __init__(self):
        self._rsa_next = 0
        self._ec_next = 0

    def next_rsa(self) -> rsa.RSAPrivateKey:
        key = pool_rsa_key(self._rsa_next)
        self._rsa_next += 1
        return key

    def next_ec(self) -> ec.EllipticCurvePrivateKey:
        key = pool_ec_key(self._ec_next)
        self._ec_next += 1
        return key


def spki_der(key: Union[PrivateKey, PublicKey]) -> bytes:
    public = key.public_key() if hasattr(key, "public_key") else key
    return public.public_bytes(
        serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
    )


def load_spki(der: bytes) -> PublicKey:
    return serialization.load_der_public_key(der)


def key_identifier(spki: bytes) -> bytes:
    """RFC 6487 key identifier: SHA-1 over the subjectPublicKey bits."""
    from . import asn1

    item = asn1.der_decode(spki, asn1.EncodingRuleset.BER_TOLERANT)
    bits = item.children[1].bit_string_bytes()
    return hashlib.sha1(bits).digest()


def algorithm_for_key(key: Union[PrivateKey, PublicKey]) -> SignatureAlgorithm:
    if isinstance(key, (rsa.RSAPrivateKey, rsa.RSAPublicKey)):
        return SignatureAlgorithm.RSA_SHA256
    return SignatureAlgorithm.ECDSA_P256_SHA256


def sign(key: PrivateKey, data: bytes) -> bytes:
    if isinstance(key, rsa.RSAPrivateKey):
        return key.sign(data, padding.PKCS1v15(), hashes.SHA256())
    return key.sign(data, ec.ECDSA(hashes.SHA256()))


def verify(public: PublicKey, signature: bytes, data: bytes) -> bool:
    try:
        if isinstance(public, rsa.RSAPublicKey):
            public.verify(signature, data, padding.PKCS1v15(), hashes.SHA256())
        else:
            public.verify(signature, data, ec.ECDSA(hashes.SHA256()))
        return True
    except (InvalidSignature, ValueError):
        return False


def verify_with_spki(spki: bytes, signature: bytes, data: bytes) -> bool:
    try:
        public = load_spki(spki)
    except (ValueError, TypeError):
        return False
    return verify(public, signature, data)


def same_public_key(a: bytes, b: bytes) -> bool:
    return a == b
