"""ASN.1 BER/DER codec with configurable canonicality enforcement.

The decoder runs in one of two rulesets: DER_STRICT rejects every
encoding DER forbids (indefinite lengths, non-minimal length octets,
non-canonical booleans, unsorted SETs, constructed strings), while
BER_TOLERANT accepts them and records a per-item non-canonicality flag.
The encoder always emits canonical DER.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Union


class Asn1Error(ValueError):
    """Base class for codec failures."""


class MalformedEncoding(Asn1Error):
    """Structurally broken input: truncation, bad tag, bad length."""


class NonCanonicalEncoding(Asn1Error):
    """BER construct encountered while decoding under DER_STRICT."""


class EncodingRuleset(Enum):
    DER_STRICT = "der_strict"
    BER_TOLERANT = "ber_tolerant"


class IntegerInterpretation(Enum):
    TWOS_COMPLEMENT = "twos_complement"
    UNSIGNED = "unsigned"


# Tag classes.
UNIVERSAL = 0
APPLICATION = 1
CONTEXT = 2
PRIVATE = 3

# Universal tag numbers used by the RPKI profiles.
TAG_BOOLEAN = 0x01
TAG_INTEGER = 0x02
TAG_BIT_STRING = 0x03
TAG_OCTET_STRING = 0x04
TAG_NULL = 0x05
TAG_OID = 0x06
TAG_UTF8_STRING = 0x0C
TAG_SEQUENCE = 0x10
TAG_SET = 0x11
TAG_PRINTABLE_STRING = 0x13
TAG_IA5_STRING = 0x16
TAG_UTC_TIME = 0x17
TAG_GENERALIZED_TIME = 0x18

# String-like universal tags that DER forbids in constructed form.
_STRING_TAGS = frozenset({0x03, 0x04, 0x0C, 0x12, 0x13, 0x14, 0x15, 0x16, 0x1A, 0x1B, 0x1C, 0x1E})

# Non-canonicality flags recorded under BER_TOLERANT.
FLAG_INDEFINITE_LENGTH = "indefinite_length"
FLAG_NONMINIMAL_LENGTH = "nonminimal_length"
FLAG_CONSTRUCTED_STRING = "constructed_string"
FLAG_NONCANONICAL_BOOLEAN = "noncanonical_boolean"
FLAG_UNSORTED_SET = "unsorted_set"


@dataclass(frozen=True)
class RawInteger:
    """An INTEGER's content octets, kept verbatim so that both the
    two's-complement and the unsigned reading stay available."""

    bytes: bytes

    def __post_init__(self):
        if not self.bytes:
            raise ValueError("RawInteger requires at least one octet")

    @classmethod
    def from_int(cls, value: int) -> "RawInteger":
        if value < 0:
            length = max(1, (value.bit_length() + 8) // 8)
            return cls(value.to_bytes(length, "big", signed=True))
        length = max(1, (value.bit_length() + 7) // 8)
        raw = value.to_bytes(length, "big")
        if raw[0] & 0x80:
            raw = b"\x00" + raw
        return cls(raw)

    def interpret(self, interpretation: IntegerInterpretation) -> int:
        return decode_integer(self, interpretation)


def decode_integer(raw: RawInteger, interpretation: IntegerInterpretation) -> int:
    """Read INTEGER content octets under the given sign convention."""
    signed = interpretation is IntegerInterpretation.TWOS_COMPLEMENT
    return int.from_bytes(raw.bytes, "big", signed=signed)


@dataclass(frozen=True, eq=False)
class Asn1Item:
    """One node of a decoded or hand-built ASN.1 tree.

    Equality and hashing are structural over (tag, constructed,
    content/children); decode metadata (flags, encoded_length) is
    excluded so that a round-tripped item compares equal to its source.
    """

    tag_class: int
    number: int
    constructed: bool
    content: bytes = b""
    children: tuple = ()
    flags: tuple = field(default=())
    encoded_length: Optional[int] = field(default=None)

    def __post_init__(self):
        if self.constructed and self.content:
            raise ValueError("constructed item carries children, not raw content")
        if not self.constructed and self.children:
            raise ValueError("primitive item has no children")

    def _key(self):
        return (self.tag_class, self.number, self.constructed, self.content, self.children)

    def __eq__(self, other):
        if not isinstance(other, Asn1Item):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        kind = "cons" if self.constructed else "prim"
        body = f"{len(self.children)} children" if self.constructed else self.content.hex()
        return f"Asn1Item({self.tag_class}/{self.number} {kind} {body})"

    # -- inspection helpers -------------------------------------------------

    def is_universal(self, number: int) -> bool:
        return self.tag_class == UNIVERSAL and self.number == number

    def is_context(self, number: int) -> bool:
        return self.tag_class == CONTEXT and self.number == number

    def all_flags(self) -> tuple:
        """This item's flags plus every descendant's, de-duplicated."""
        seen = list(self.flags)
        for child in self.children:
            for f in child.all_flags():
                if f not in seen:
                    seen.append(f)
        return tuple(seen)

    def expect(self, tag_class: int, number: int, constructed: Optional[bool] = None) -> "Asn1Item":
        if self.tag_class != tag_class or self.number != number or (
            constructed is not None and self.constructed != constructed
        ):
            raise MalformedEncoding(
                f"expected tag {tag_class}/{number}, found {self.tag_class}/{self.number}"
            )
        return self

    def raw_integer(self) -> RawInteger:
        self.expect(UNIVERSAL, TAG_INTEGER)
        return RawInteger(self.content)

    def as_int(self, interpretation: IntegerInterpretation = IntegerInterpretation.TWOS_COMPLEMENT) -> int:
        return decode_integer(self.raw_integer(), interpretation)

    def as_oid(self) -> str:
        self.expect(UNIVERSAL, TAG_OID)
        return decode_oid(self.content)

    def as_bool(self) -> bool:
        self.expect(UNIVERSAL, TAG_BOOLEAN)
        return self.content != b"\x00"

    def bit_string_bytes(self) -> bytes:
        """BIT STRING payload with the unused-bits octet stripped."""
        self.expect(UNIVERSAL, TAG_BIT_STRING)
        if not self.content:
            raise MalformedEncoding("empty BIT STRING content")
        return self.content[1:]

    def bit_string_unused(self) -> int:
        self.expect(UNIVERSAL, TAG_BIT_STRING)
        if not self.content:
            raise MalformedEncoding("empty BIT STRING content")
        return self.content[0]

    def as_time(self) -> int:
        """UTCTime/GeneralizedTime content as POSIX seconds (UTC)."""
        text = self.content.decode("ascii", "strict")
        if self.number == TAG_UTC_TIME:
            dt = datetime.datetime.strptime(text, "%y%m%d%H%M%SZ")
            if dt.year >= 2050:
                dt = dt.replace(year=dt.year - 100)
        elif self.number == TAG_GENERALIZED_TIME:
            dt = datetime.datetime.strptime(text, "%Y%m%d%H%M%SZ")
        else:
            raise MalformedEncoding(f"not a time tag: {self.number}")
        return int(dt.replace(tzinfo=datetime.timezone.utc).timestamp())


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def primitive(tag_class: int, number: int, content: bytes) -> Asn1Item:
    return Asn1Item(tag_class, number, False, content=bytes(content))

def constructed(tag_class: int, number: int, children: Iterable[Asn1Item]) -> Asn1Item:
    return Asn1Item(tag_class, number, True, children=tuple(children))

def boolean(value: bool) -> Asn1Item:
    return primitive(UNIVERSAL, TAG_BOOLEAN, b"\xff" if value else b"\x00")

def integer(value: Union[int, RawInteger]) -> Asn1Item:
    raw = value if isinstance(value, RawInteger) else RawInteger.from_int(value)
    return primitive(UNIVERSAL, TAG_INTEGER, raw.bytes)

def bit_string(payload: bytes, unused_bits: int = 0) -> Asn1Item:
    return primitive(UNIVERSAL, TAG_BIT_STRING, bytes([unused_bits]) + payload)

def octet_string(payload: bytes) -> Asn1Item:
    return primitive(UNIVERSAL, TAG_OCTET_STRING, payload)

def null() -> Asn1Item:
    return primitive(UNIVERSAL, TAG_NULL, b"")

def oid(dotted: str) -> Asn1Item:
    return primitive(UNIVERSAL, TAG_OID, encode_oid(dotted))

def utf8_string(text: str) -> Asn1Item:
    return primitive(UNIVERSAL, TAG_UTF8_STRING, text.encode("utf-8"))

def printable_string(text: str) -> Asn1Item:
    return primitive(UNIVERSAL, TAG_PRINTABLE_STRING, text.encode("ascii"))

def ia5_string(payload: Union[str, bytes]) -> Asn1Item:
    if isinstance(payload, str):
        payload = payload.encode("ascii")
    return primitive(UNIVERSAL, TAG_IA5_STRING, payload)

def sequence(*children: Asn1Item) -> Asn1Item:
    return constructed(UNIVERSAL, TAG_SEQUENCE, children)

def set_of(*children: Asn1Item) -> Asn1Item:
    return constructed(UNIVERSAL, TAG_SET, children)

def context_explicit(number: int, child: Asn1Item) -> Asn1Item:
    return constructed(CONTEXT, number, (child,))

def context_primitive(number: int, content: bytes) -> Asn1Item:
    return primitive(CONTEXT, number, content)

def context_constructed(number: int, children: Iterable[Asn1Item]) -> Asn1Item:
    return constructed(CONTEXT, number, children)

def time_item(epoch_seconds: int) -> Asn1Item:
    """UTCTime before 2050, GeneralizedTime from 2050 on."""
    dt = datetime.datetime.fromtimestamp(epoch_seconds, datetime.timezone.utc)
    if dt.year < 2050:
        return primitive(UNIVERSAL, TAG_UTC_TIME, dt.strftime("%y%m%d%H%M%SZ").encode("ascii"))
    return primitive(UNIVERSAL, TAG_GENERALIZED_TIME, dt.strftime("%Y%m%d%H%M%SZ").encode("ascii"))

def generalized_time(epoch_seconds: int) -> Asn1Item:
    dt = datetime.datetime.fromtimestamp(epoch_seconds, datetime.timezone.utc)
    return primitive(UNIVERSAL, TAG_GENERALIZED_TIME, dt.strftime("%Y%m%d%H%M%SZ").encode("ascii"))


# ---------------------------------------------------------------------------
# OID content codec
# ---------------------------------------------------------------------------

def encode_oid(dotted: str) -> bytes:
    arcs = [int(part) for part in dotted.split(".")]
    if len(arcs) < 2 or arcs[0] > 2 or (arcs[0] < 2 and arcs[1] > 39):
        raise ValueError(f"invalid OID {dotted!r}")
    out = bytearray()
    for arc in [arcs[0] * 40 + arcs[1]] + arcs[2:]:
        chunk = [arc & 0x7F]
        arc >>= 7
        while arc:
            chunk.append(0x80 | (arc & 0x7F))
            arc >>= 7
        out.extend(reversed(chunk))
    return bytes(out)


def decode_oid(content: bytes) -> str:
    if not content:
        raise MalformedEncoding("empty OID content")
    arcs = []
    value = 0
    for i, b in enumerate(content):
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            arcs.append(value)
            value = 0
        elif i == len(content) - 1:
            raise MalformedEncoding("truncated OID arc")
    first = arcs[0]
    if first < 40:
        head = [0, first]
    elif first < 80:
        head = [1, first - 40]
    else:
        head = [2, first - 80]
    return ".".join(str(a) for a in head + arcs[1:])


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

def _encode_length(length: int) -> bytes:
    if length < 0x80:
        return bytes([length])
    octets = length.to_bytes((length.bit_length() + 7) // 8, "big")
    return bytes([0x80 | len(octets)]) + octets


def _encode_tag(item: Asn1Item) -> bytes:
    first = (item.tag_class << 6) | (0x20 if item.constructed else 0)
    if item.number < 0x1F:
        return bytes([first | item.number])
    out = [first | 0x1F]
    chunk = [item.number & 0x7F]
    rest = item.number >> 7
    while rest:
        chunk.append(0x80 | (rest & 0x7F))
        rest >>= 7
    return bytes(out) + bytes(reversed(chunk))


def der_encode(item: Asn1Item) -> bytes:
    """Deterministic DER serialization; SET children are emitted in
    canonical (bytewise ascending) order regardless of input order."""
    if item.constructed:
        encoded_children = [der_encode(child) for child in item.children]
        if item.tag_class == UNIVERSAL and item.number == TAG_SET:
            encoded_children.sort()
        body = b"".join(encoded_children)
    else:
        body = item.content
    return _encode_tag(item) + _encode_length(len(body)) + body


# ---------------------------------------------------------------------------
# Decoder
# ---------------------------------------------------------------------------

class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def byte(self) -> int:
        if self.pos >= len(self.data):
            raise MalformedEncoding("unexpected end of input")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedEncoding("content runs past end of input")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def peek2(self) -> bytes:
        return self.data[self.pos:self.pos + 2]


def _decode_item(reader: _Reader, strict: bool, depth: int) -> Asn1Item:
    if depth > 64:
        raise MalformedEncoding("nesting depth exceeds limit")
    start = reader.pos
    first = reader.byte()
    tag_class = first >> 6
    is_constructed = bool(first & 0x20)
    number = first & 0x1F
    if number == 0x1F:
        number = 0
        while True:
            b = reader.byte()
            if number == 0 and b == 0x80:
                raise MalformedEncoding("non-minimal high tag number")
            number = (number << 7) | (b & 0x7F)
            if number > 0xFFFFFF:
                raise MalformedEncoding("tag number out of range")
            if not b & 0x80:
                break

    flags = []
    length_octet = reader.byte()
    if length_octet == 0x80:
        # Indefinite length: BER only, constructed only.
        if not is_constructed:
            raise MalformedEncoding("indefinite length on primitive item")
        if strict:
            raise NonCanonicalEncoding("indefinite length is not DER")
        flags.append(FLAG_INDEFINITE_LENGTH)
        length = None
    elif length_octet & 0x80:
        n = length_octet & 0x7F
        if n > 8:
            raise MalformedEncoding("length octets out of range")
        octets = reader.take(n)
        length = int.from_bytes(octets, "big")
        if octets[0] == 0 or length < 0x80 or n > (length.bit_length() + 7) // 8:
            if strict:
                raise NonCanonicalEncoding("non-minimal length octets")
            if FLAG_NONMINIMAL_LENGTH not in flags:
                flags.append(FLAG_NONMINIMAL_LENGTH)
    else:
        length = length_octet

    if is_constructed:
        children = []
        if length is None:
            while True:
                if reader.peek2() == b"\x00\x00":
                    reader.take(2)
                    break
                children.append(_decode_item(reader, strict, depth + 1))
        else:
            end = reader.pos + length
            if end > len(reader.data):
                raise MalformedEncoding("constructed content truncated")
            while reader.pos < end:
                children.append(_decode_item(reader, strict, depth + 1))
            if reader.pos != end:
                raise MalformedEncoding("child encoding overruns parent")
        if tag_class == UNIVERSAL and number in _STRING_TAGS:
            if strict:
                raise NonCanonicalEncoding("constructed string encoding is not DER")
            flags.append(FLAG_CONSTRUCTED_STRING)
        if tag_class == UNIVERSAL and number == TAG_SET:
            encodings = [der_encode(c) for c in children]
            if encodings != sorted(encodings):
                if strict:
                    raise NonCanonicalEncoding("SET children not in canonical order")
                flags.append(FLAG_UNSORTED_SET)
        return Asn1Item(
            tag_class, number, True, children=tuple(children),
            flags=tuple(flags), encoded_length=reader.pos - start,
        )

    if length is None:
        raise MalformedEncoding("indefinite length on primitive item")
    content = reader.take(length)
    if tag_class == UNIVERSAL and number == TAG_BOOLEAN:
        if length != 1:
            raise MalformedEncoding("BOOLEAN content must be one octet")
        if content not in (b"\x00", b"\xff"):
            if strict:
                raise NonCanonicalEncoding("BOOLEAN value not canonical")
            flags.append(FLAG_NONCANONICAL_BOOLEAN)
    if tag_class == UNIVERSAL and number == TAG_INTEGER and length == 0:
        raise MalformedEncoding("INTEGER with empty content")
    return Asn1Item(
        tag_class, number, False, content=content,
        flags=tuple(flags), encoded_length=reader.pos - start,
    )


def der_decode(data: bytes, ruleset: EncodingRuleset = EncodingRuleset.DER_STRICT) -> Asn1Item:
    """Parse exactly one item covering the whole input."""
    if not data:
        raise MalformedEncoding("empty input")
    reader = _Reader(data)
    item = _decode_item(reader, ruleset is EncodingRuleset.DER_STRICT, 0)
    if reader.pos != len(data):
        raise MalformedEncoding(f"{len(data) - reader.pos} trailing bytes after item")
    return item


def der_decode_prefix(data: bytes, ruleset: EncodingRuleset = EncodingRuleset.DER_STRICT):
    """Parse one item from the front of ``data``; returns (item, rest)."""
    if not data:
        raise MalformedEncoding("empty input")
    reader = _Reader(data)
    item = _decode_item(reader, ruleset is EncodingRuleset.DER_STRICT, 0)
    return item, data[reader.pos:]


def encode_indefinite(item: Asn1Item) -> bytes:
    """BER serialization using indefinite lengths on every constructed
    node; child order is preserved (no SET re-sorting). Primitive content
    is byte-identical to DER, so signatures over inner DER still verify."""
    if item.constructed:
        body = b"".join(encode_indefinite(child) for child in item.children)
        return _encode_tag(item) + b"\x80" + body + b"\x00\x00"
    return _encode_tag(item) + _encode_length(len(item.content)) + item.content


def to_ber_indefinite(der: bytes) -> bytes:
    """Re-encode a DER blob with indefinite-length constructed nodes."""
    return encode_indefinite(der_decode(der, EncodingRuleset.BER_TOLERANT))
