import ipaddress

import pytest
from hypothesis import given, settings, strategies as st

from faultline import iputil
from faultline.iputil import (
    AsInherit,
    AsRange,
    IpInherit,
    IpPrefix,
    IpRange,
    OverlapConflict,
    ResourceSet,
    canonicalize_ip_resources,
)

P = IpPrefix.parse


def _r(lo: str, hi: str) -> IpRange:
    return IpRange(4, int(ipaddress.IPv4Address(lo)), int(ipaddress.IPv4Address(hi)))


class TestCanonicalize:
    def test_already_canonical(self):
        entries, findings = canonicalize_ip_resources([P("10.0.0.0/8")])
        assert entries == [P("10.0.0.0/8")]
        assert findings == []

    def test_mergeable_adjacent_prefixes(self):
        entries, findings = canonicalize_ip_resources([P("10.0.0.0/25"), P("10.0.0.128/25")])
        assert entries == [P("10.0.0.0/24")]
        assert findings == [iputil.MERGEABLE_ADJACENT_PREFIXES]

    def test_range_expressible_as_prefix(self):
        entries, findings = canonicalize_ip_resources([_r("10.0.0.0", "10.0.0.255")])
        assert entries == [P("10.0.0.0/24")]
        assert findings == [iputil.RANGE_EXPRESSIBLE_AS_PREFIX]

    def test_adjacent_mergeable_into_range_only(self):
        entries, findings = canonicalize_ip_resources([P("10.0.0.0/25"), P("10.0.0.128/26")])
        assert entries == [_r("10.0.0.0", "10.0.0.191")]
        assert findings == [iputil.MERGEABLE_ADJACENT_PREFIXES]

    def test_unsorted(self):
        entries, findings = canonicalize_ip_resources([P("10.1.0.0/24"), P("10.0.0.0/24")])
        assert entries == [P("10.0.0.0/24"), P("10.1.0.0/24")]
        assert findings == [iputil.UNSORTED]

    def test_overlap(self):
        entries, findings = canonicalize_ip_resources([P("10.0.0.0/24"), P("10.0.0.0/25")])
        assert entries == [P("10.0.0.0/24")]
        assert iputil.OVERLAP in findings

    def test_families_sorted_v4_first(self):
        v6 = IpPrefix.parse("2001:db8::/32")
        entries, findings = canonicalize_ip_resources([v6, P("10.0.0.0/24")])
        assert entries == [P("10.0.0.0/24"), v6]
        assert findings == [iputil.UNSORTED]

    def test_inherit_conflict(self):
        with pytest.raises(OverlapConflict):
            canonicalize_ip_resources([IpInherit(4), P("10.0.0.0/24")])

    def test_inherit_other_family_ok(self):
        entries, findings = canonicalize_ip_resources([P("10.0.0.0/24"), IpInherit(6)])
        assert IpInherit(6) in entries
        assert findings == []


@st.composite
def _entry_lists(draw):
    entries = []
    for _ in range(draw(st.integers(min_value=1, max_value=6))):
        base = draw(st.integers(min_value=0, max_value=2**20 - 1)) << 12
        if draw(st.booleans()):
            length = draw(st.integers(min_value=12, max_value=28))
            mask = (1 << (32 - length)) - 1
            entries.append(IpPrefix(4, base & ~mask, length))
        else:
            span = draw(st.integers(min_value=0, max_value=4095))
            entries.append(IpRange(4, base, base + span))
    return entries


class TestCanonicalizeProperties:
    @settings(max_examples=300, deadline=None)
    @given(_entry_lists())
    def test_idempotent(self, entries):
        once, _ = canonicalize_ip_resources(entries)
        twice, findings = canonicalize_ip_resources(once)
        assert twice == once
        assert findings == []

    @settings(max_examples=300, deadline=None)
    @given(_entry_lists())
    def test_canonical_form_covers_same_addresses(self, entries):
        canonical, _ = canonicalize_ip_resources(entries)
        def cover(items):
            merged = set()
            for e in items:
                lo, hi = e.interval()
                merged.add((lo, hi))
            return ResourceSet.build(items)
        assert cover(entries).ip == cover(canonical).ip


def _independent_intersection(a, b):
    """Oracle: interval intersection via boundary sweeping, written
    independently of ResourceSet's implementation."""
    out = []
    for fam_a, lo_a, hi_a in a:
        for fam_b, lo_b, hi_b in b:
            if fam_a != fam_b:
                continue
            lo, hi = max(lo_a, lo_b), min(hi_a, hi_b)
            if lo <= hi:
                out.append((fam_a, lo, hi))
    merged = []
    for iv in sorted(out):
        if merged and merged[-1][0] == iv[0] and iv[1] <= merged[-1][2] + 1:
            merged[-1] = (iv[0], merged[-1][1], max(merged[-1][2], iv[2]))
        else:
            merged.append(iv)
    return tuple(merged)


class TestResourceSet:
    def test_containment(self):
        parent = ResourceSet.build([P("10.0.0.0/8")], [AsRange(64496, 64511)])
        child = ResourceSet.build([P("10.0.0.0/16")], [AsRange(64500, 64500)])
        assert parent.contains(child)
        assert not child.contains(parent)

    def test_inherit_resolution(self):
        parent = ResourceSet.build([P("10.0.0.0/8")], [AsRange(1, 10)])
        child = ResourceSet.build([IpInherit(4)], [AsInherit()], parent=parent)
        assert child == parent

    def test_contains_prefix_and_asn(self):
        rs = ResourceSet.build([P("10.0.0.0/8")], [AsRange(5, 10)])
        assert rs.contains_prefix(P("10.1.0.0/16"))
        assert not rs.contains_prefix(P("11.0.0.0/8"))
        assert rs.contains_asn(7)
        assert not rs.contains_asn(11)

    @settings(max_examples=200, deadline=None)
    @given(_entry_lists(), _entry_lists())
    def test_intersection_matches_oracle(self, left, right):
        a = ResourceSet.build(left)
        b = ResourceSet.build(right)
        assert a.intersection(b).ip == _independent_intersection(a.ip, b.ip)

    def test_adjacent_intervals_merge(self):
        rs = ResourceSet.build([P("10.0.0.0/25"), P("10.0.0.128/25")])
        assert rs.contains_prefix(P("10.0.0.0/24"))
