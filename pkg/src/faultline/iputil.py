"""IP/AS resource entries, canonical-form analysis, and set arithmetic.

Resource extensions carry prefixes, ranges, or an inherit marker per
address family. Canonicalization follows the delegation-extension rules:
entries sorted by family then address, maximally merged, every range
that covers exactly a prefix written as a prefix. The analysis half
reports each way an input deviates from that form, because validator
profiles disagree on which deviations are fatal.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

V4 = 4
V6 = 6

# Non-canonicality findings.
MERGEABLE_ADJACENT_PREFIXES = "MERGEABLE_ADJACENT_PREFIXES"
RANGE_EXPRESSIBLE_AS_PREFIX = "RANGE_EXPRESSIBLE_AS_PREFIX"
UNSORTED = "UNSORTED"
OVERLAP = "OVERLAP"

_FINDING_ORDER = (UNSORTED, OVERLAP, MERGEABLE_ADJACENT_PREFIXES, RANGE_EXPRESSIBLE_AS_PREFIX)


class OverlapConflict(ValueError):
    """Entries overlap in a way that has no single canonical merge."""


def family_bits(family: int) -> int:
    if family == V4:
        return 32
    if family == V6:
        return 128
    raise ValueError(f"unknown address family {family}")


@dataclass(frozen=True)
class IpPrefix:
    family: int
    addr: int
    length: int

    def __post_init__(self):
        bits = family_bits(self.family)
        if not 0 <= self.length <= bits:
            raise ValueError(f"prefix length {self.length} out of range for v{self.family}")
        if self.addr & ((1 << (bits - self.length)) - 1 if self.length < bits else 0):
            raise ValueError("host bits set below prefix length")

    @classmethod
    def parse(cls, text: str) -> "IpPrefix":
        net = ipaddress.ip_network(text, strict=True)
        return cls(net.version, int(net.network_address), net.prefixlen)

    def interval(self) -> Tuple[int, int]:
        span = (1 << (family_bits(self.family) - self.length)) - 1
        return self.addr, self.addr + span

    def __str__(self):
        base = ipaddress.IPv4Address(self.addr) if self.family == V4 else ipaddress.IPv6Address(self.addr)
        return f"{base}/{self.length}"


@dataclass(frozen=True)
class IpRange:
    family: int
    min: int
    max: int

    def __post_init__(self):
        if self.min > self.max:
            raise ValueError("range min exceeds max")

    def interval(self) -> Tuple[int, int]:
        return self.min, self.max

    def __str__(self):
        cast = ipaddress.IPv4Address if self.family == V4 else ipaddress.IPv6Address
        return f"{cast(self.min)}-{cast(self.max)}"


@dataclass(frozen=True)
class IpInherit:
    family: int


IpEntry = Union[IpPrefix, IpRange, IpInherit]


@dataclass(frozen=True)
class AsRange:
    min: int
    max: int

    def __post_init__(self):
        if self.min > self.max:
            raise ValueError("range min exceeds max")


class AsInherit:
    """Singleton marker: AS resources inherited from the issuer."""

    _instance: Optional["AsInherit"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "AsInherit()"


AsEntry = Union[AsRange, AsInherit]


def prefix_for_interval(family: int, lo: int, hi: int) -> Optional[IpPrefix]:
    """The prefix covering exactly [lo, hi], if one exists."""
    span = hi - lo + 1
    if span & (span - 1):
        return None
    bits = family_bits(family)
    length = bits - (span.bit_length() - 1)
    if lo & (span - 1):
        return None
    return IpPrefix(family, lo, length)


def canonicalize_ip_resources(entries: Sequence[IpEntry]) -> Tuple[List[IpEntry], List[str]]:
    """Return (canonical entries, findings describing input deviations).

    Inherit markers pass through untouched but may not share a family
    with concrete entries; that mix has no canonical merge and raises
    OverlapConflict.
    """
    findings: set = set()
    inherits: List[IpInherit] = []
    concrete: List[Tuple[int, int, int, IpEntry]] = []
    for entry in entries:
        if isinstance(entry, IpInherit):
            inherits.append(entry)
        else:
            lo, hi = entry.interval()
            concrete.append((entry.family, lo, hi, entry))

    inherit_families = {e.family for e in inherits}
    if inherit_families & {fam for fam, _, _, _ in concrete}:
        raise OverlapConflict("inherit marker combined with explicit entries of the same family")

    # Sortedness of the input: families ascending, addresses ascending within.
    keys = [(fam, lo, hi) for fam, lo, hi, _ in concrete]
    if keys != sorted(keys):
        findings.add(UNSORTED)

    for _, _, _, entry in concrete:
        if isinstance(entry, IpRange):
            if prefix_for_interval(entry.family, entry.min, entry.max) is not None:
                findings.add(RANGE_EXPRESSIBLE_AS_PREFIX)

    merged: List[Tuple[int, int, int, int]] = []  # (family, lo, hi, members)
    for fam, lo, hi in sorted(keys):
        if merged and merged[-1][0] == fam and lo <= merged[-1][2] + 1:
            prev_fam, prev_lo, prev_hi, members = merged[-1]
            if lo <= prev_hi:
                findings.add(OVERLAP)
            merged[-1] = (prev_fam, prev_lo, max(prev_hi, hi), members + 1)
        else:
            merged.append((fam, lo, hi, 1))
    if any(members > 1 for _, _, _, members in merged):
        findings.add(MERGEABLE_ADJACENT_PREFIXES)

    canonical: List[IpEntry] = sorted(inherits, key=lambda e: e.family)
    for fam, lo, hi, _ in merged:
        as_prefix = prefix_for_interval(fam, lo, hi)
        canonical.append(as_prefix if as_prefix is not None else IpRange(fam, lo, hi))

    ordered = [f for f in _FINDING_ORDER if f in findings]
    return canonical, ordered


# ---------------------------------------------------------------------------
# Resource coverage sets
# ---------------------------------------------------------------------------

def _merge_intervals(intervals: Iterable[Tuple[int, ...]]) -> Tuple[Tuple[int, ...], ...]:
    out: List[List[int]] = []
    for iv in sorted(intervals):
        lo, hi, prefix = iv[-2], iv[-1], iv[:-2]
        if out and tuple(out[-1][:-2]) == prefix and lo <= out[-1][-1] + 1:
            out[-1][-1] = max(out[-1][-1], hi)
        else:
            out.append(list(iv))
    return tuple(tuple(iv) for iv in out)


@dataclass(frozen=True)
class ResourceSet:
    """Merged coverage of IP space (per family) and AS numbers."""

    ip: Tuple[Tuple[int, int, int], ...] = ()   # (family, lo, hi)
    asn: Tuple[Tuple[int, int], ...] = ()       # (lo, hi)

    @classmethod
    def build(cls, ip_entries: Sequence[IpEntry] = (), as_entries: Sequence[AsEntry] = (),
              parent: Optional["ResourceSet"] = None) -> "ResourceSet":
        """Resolve entries (including inherit markers) against ``parent``."""
        ip: List[Tuple[int, int, int]] = []
        for entry in ip_entries:
            if isinstance(entry, IpInherit):
                if parent is None:
                    raise ValueError("inherit without a parent resource set")
                ip.extend(iv for iv in parent.ip if iv[0] == entry.family)
            else:
                lo, hi = entry.interval()
                ip.append((entry.family, lo, hi))
        asn: List[Tuple[int, int]] = []
        for entry in as_entries:
            if isinstance(entry, AsInherit):
                if parent is None:
                    raise ValueError("inherit without a parent resource set")
                asn.extend(parent.asn)
            else:
                asn.append((entry.min, entry.max))
        return cls(_merge_intervals(ip), _merge_intervals(asn))

    def is_empty(self) -> bool:
        return not self.ip and not self.asn

    def _covers(self, haystack, needle) -> bool:
        for iv in needle:
            if not any(h[:-2] == iv[:-2] and h[-2] <= iv[-2] and iv[-1] <= h[-1] for h in haystack):
                return False
        return True

    def contains(self, other: "ResourceSet") -> bool:
        return self._covers(self.ip, other.ip) and self._covers(self.asn, other.asn)

    def contains_prefix(self, prefix: IpPrefix) -> bool:
        lo, hi = prefix.interval()
        return self._covers(self.ip, ((prefix.family, lo, hi),))

    def contains_asn(self, value: int) -> bool:
        return any(lo <= value <= hi for lo, hi in self.asn)

    def intersection(self, other: "ResourceSet") -> "ResourceSet":
        ip = []
        for fam, lo, hi in self.ip:
            for ofam, olo, ohi in other.ip:
                if fam == ofam and lo <= ohi and olo <= hi:
                    ip.append((fam, max(lo, olo), min(hi, ohi)))
        asn = []
        for lo, hi in self.asn:
            for olo, ohi in other.asn:
                if lo <= ohi and olo <= hi:
                    asn.append((max(lo, olo), min(hi, ohi)))
        return ResourceSet(_merge_intervals(ip), _merge_intervals(asn))
