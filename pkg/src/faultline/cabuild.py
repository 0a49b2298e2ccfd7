"""Certification-authority fixture builder.

Builds whole delegation trees: every CA gets its own simulated
publication point, SIA-linked to its parent, with manifests and CRLs
regenerated per commit. Builders are deterministic for a fixed key pool,
rng seed, and base time. Scenario code leans on the override hooks
(raw integers, extra extensions, manifest overrides, withheld manifest
updates) to plant exactly one deviation per fixture.
"""

from __future__ import annotations

import random
import time
import urllib.parse
import uuid
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from . import cms, iputil, keys, oids, pubpoint, rpkiobjects, x509build
from .asn1 import RawInteger
from .fetch import MemTransport, Mount
from .iputil import AsInherit, AsRange, IpInherit, IpPrefix
from .pubpoint import PUBLISH, WITHDRAW, EMPTY_PLAN, FaultPlan, RepositoryState
from .rpkiobjects import Manifest, Roa, RoaPrefix, Tal
from .x509build import ResourceCertificate, cn

DAY = 86400


class ResourceExhausted(RuntimeError):
    """Chain shape exceeds the configured fixture cap."""


class Fixture:
    """Owns the key provider, clock, allocators, and all pubpoint mounts."""

    def __init__(self, seed: int = 0, base_time: Optional[int] = None,
                 notify_base: Optional[Callable[[str], str]] = None,
                 ta_cert_base: Optional[Callable[[str], str]] = None,
                 chain_cap: int = 2000):
        self.rng = random.Random(seed)
        self.keys = keys.KeyProvider()
        self.base_time = base_time if base_time is not None else int(time.time()) - 3600
        self.mounts: Dict[str, Mount] = {}
        self.cas: List["Ca"] = []
        self.chain_cap = chain_cap
        self._prefix_index = 0
        self._asn_index = 0
        self._notify_base = notify_base or (lambda host: f"https://{host}/notification.xml")
        self._ta_cert_base = ta_cert_base or (lambda host: f"https://{host}/ta.cer")

    # -- allocators -----------------------------------------------------------

    def next_prefix(self, length: int = 24) -> IpPrefix:
        addr = (10 << 24) + self._prefix_index * 256
        self._prefix_index += 1
        return IpPrefix(iputil.V4, addr, length)

    def next_asn(self) -> int:
        self._asn_index += 1
        return 64500 + self._asn_index

    def session_id(self) -> str:
        return str(uuid.UUID(int=self.rng.getrandbits(128), version=4))

    @property
    def not_before(self) -> int:
        return self.base_time - DAY

    @property
    def not_after(self) -> int:
        return self.base_time + 5 * 365 * DAY

    # -- tree construction -----------------------------------------------------

    def add_ta(self, name: str = "ta",
               ip_entries: Sequence[iputil.IpEntry] = (),
               as_entries: Sequence[iputil.AsEntry] = (),
               host: Optional[str] = None, **cert_kwargs) -> "Ca":
        host = host or f"{name}.pp.test"
        key = self.keys.next_rsa()
        ca = Ca(self, name=name, host=host, key=key, parent=None)
        if not ip_entries and not as_entries:
            ip_entries = [IpPrefix.parse("10.0.0.0/8"), IpPrefix.parse("2001:db8::/32")]
            as_entries = [AsRange(64496, 65534)]
        ca.cert = x509build.build_certificate(
            serial=1,
            issuer=cn(name),
            subject=cn(name),
            not_before=self.not_before,
            not_after=self.not_after,
            public_key=key,
            signing_key=key,
            is_ca=True,
            ip_entries=ip_entries,
            as_entries=as_entries,
            sia=ca.sia_entries(),
            **cert_kwargs,
        )
        self.mounts[host] = Mount(
            RepositoryState.fresh(host, self.session_id()),
            extra_files={"ta.cer": ca.cert.der},
        )
        self.cas.append(ca)
        return ca

    def tal_for(self, ta: "Ca") -> Tal:
        return Tal(uris=(self._ta_cert_base(ta.host),), spki=ta.cert.spki, name=ta.name)

    def mem_transport(self) -> MemTransport:
        transport = MemTransport()
        transport.mounts = self.mounts
        return transport

    def serve_all(self, server) -> None:
        """Mount every pubpoint on a running PubPointServer."""
        for mount in self.mounts.values():
            server.add_mount(mount)

    def build_chain(self, depth: int, breadth: int, ta: Optional["Ca"] = None,
                    roa_per_ca: bool = True) -> "Ca":
        """Delegation tree: ``breadth`` children under the trust anchor,
        the first of which continues as a chain until ``depth`` CA links.
        Every chain/breadth CA carries one marker ROA."""
        if depth < 1 or breadth < 1:
            raise ValueError("depth and breadth must be >= 1")
        if depth * breadth > self.chain_cap:
            raise ResourceExhausted(f"depth*breadth {depth * breadth} exceeds cap {self.chain_cap}")
        ta = ta or self.add_ta()
        chain_head: Optional[Ca] = None
        for i in range(breadth):
            child = ta.add_child(f"c{i:03d}")
            if roa_per_ca:
                child.add_roa(f"c{i:03d}", self.next_asn(), [self.next_prefix()])
            if i == 0:
                chain_head = child
        node = chain_head
        for level in range(2, depth + 1):
            node = node.add_child(f"d{level:03d}")
            if roa_per_ca:
                node.add_roa(f"d{level:03d}", self.next_asn(), [self.next_prefix()])
        for ca in self.cas:
            ca.commit()
        return ta

    def commit_all(self):
        for ca in self.cas:
            ca.commit()


class Ca:
    """One certification authority plus its publication point."""

    def __init__(self, fixture: Fixture, name: str, host: str, key, parent: Optional["Ca"]):
        self.fixture = fixture
        self.name = name
        self.host = host
        self.key = key
        self.parent = parent
        self.cert: Optional[ResourceCertificate] = None
        self.objects: Dict[str, bytes] = {}
        self.withdrawn: List[str] = []
        self.keep_in_manifest: List[str] = []
        self.revoked: List[RawInteger] = []
        self.manifest_number = 0
        self.ee_serial = 100
        self.ee_key = fixture.keys.next_rsa()

    # -- naming ----------------------------------------------------------------

    @property
    def ca_repository(self) -> str:
        return f"rsync://{self.host}/repo"

    @property
    def manifest_uri(self) -> str:
        return f"{self.ca_repository}/{self.name}.mft"

    @property
    def crl_uri(self) -> str:
        return f"{self.ca_repository}/{self.name}.crl"

    @property
    def crl_name(self) -> str:
        return f"{self.name}.crl"

    @property
    def notify_uri(self) -> str:
        return self.fixture._notify_base(self.host)

    @property
    def cert_uri(self) -> str:
        if self.parent is None:
            return self.fixture._ta_cert_base(self.host)
        return f"{self.parent.ca_repository}/{self.name}.cer"

    def uri_for(self, object_name: str) -> str:
        # surrogateescape round-trips raw bytes in names (manifest entries
        # may carry invalid UTF-8); the URI form is percent-encoded ASCII.
        raw = object_name.encode("utf-8", "surrogateescape")
        return f"{self.ca_repository}/{urllib.parse.quote(raw, safe='.-_~')}"

    def sia_entries(self) -> List[Tuple[str, str]]:
        return [
            (oids.AD_CA_REPOSITORY, self.ca_repository + "/"),
            (oids.AD_RPKI_MANIFEST, self.manifest_uri),
            (oids.AD_RPKI_NOTIFY, self.notify_uri),
        ]

    @property
    def mount(self) -> Mount:
        return self.fixture.mounts[self.host]

    @property
    def state(self) -> RepositoryState:
        return self.mount.state

    def next_serial(self) -> int:
        self.ee_serial += 1
        return self.ee_serial

    # -- issuance ---------------------------------------------------------------

    def add_child(self, name: str, ip_entries: Optional[Sequence[iputil.IpEntry]] = None,
                  as_entries: Optional[Sequence[iputil.AsEntry]] = None,
                  host: Optional[str] = None, subject_extra: Sequence[Tuple[str, str]] = (),
                  **cert_kwargs) -> "Ca":
        fixture = self.fixture
        host = host or f"{name}.pp.test"
        key = fixture.keys.next_rsa()
        child = Ca(fixture, name=name, host=host, key=key, parent=self)
        if ip_entries is None:
            ip_entries = [IpInherit(iputil.V4), IpInherit(iputil.V6)]
        if as_entries is None:
            as_entries = [AsInherit()]
        child.cert = x509build.build_certificate(
            serial=self.next_serial(),
            issuer=self.cert.subject,
            subject=cn(name, subject_extra),
            not_before=fixture.not_before,
            not_after=fixture.not_after,
            public_key=key,
            signing_key=self.key,
            is_ca=True,
            ip_entries=ip_entries,
            as_entries=as_entries,
            crl_dp=self.crl_uri,
            aia=self.cert_uri,
            sia=child.sia_entries(),
            **cert_kwargs,
        )
        fixture.mounts[host] = Mount(RepositoryState.fresh(host, fixture.session_id()))
        fixture.cas.append(child)
        self.objects[f"{name}.cer"] = child.cert.der
        return child

    def issue_ee(self, name: str, signed_object_uri: str,
                 ip_entries: Optional[Sequence[iputil.IpEntry]] = None,
                 as_entries: Optional[Sequence[iputil.AsEntry]] = None,
                 key=None, **cert_kwargs) -> Tuple[ResourceCertificate, object]:
        fixture = self.fixture
        key = key or self.ee_key
        if ip_entries is None:
            ip_entries = [IpInherit(iputil.V4), IpInherit(iputil.V6)]
        if as_entries is None:
            as_entries = [AsInherit()]
        sia = [(oids.AD_SIGNED_OBJECT, signed_object_uri)]
        sia.extend(cert_kwargs.pop("extra_sia", ()))
        label = name.encode("ascii", "backslashreplace").decode("ascii")
        cert = x509build.build_certificate(
            serial=self.next_serial(),
            issuer=self.cert.subject,
            subject=cn(f"{label}-ee-{self.ee_serial}"),
            not_before=fixture.not_before,
            not_after=fixture.not_after,
            public_key=key,
            signing_key=self.key,
            is_ca=False,
            ip_entries=ip_entries,
            as_entries=as_entries,
            crl_dp=self.crl_uri,
            aia=self.cert_uri,
            sia=sia,
            **cert_kwargs,
        )
        return cert, key

    def add_roa(self, name: str, asn: Union[int, RawInteger],
                prefixes: Sequence[Union[str, RoaPrefix]],
                ee_kwargs: Optional[dict] = None, ee_key=None) -> str:
        """Issue a ROA named ``{name}.roa``; returns its URI."""
        roa_prefixes = [
            p if isinstance(p, RoaPrefix) else RoaPrefix.parse(p) for p in prefixes
        ]
        object_name = f"{name}.roa"
        uri = self.uri_for(object_name)
        kwargs = dict(ee_kwargs or {})
        if "ip_entries" not in kwargs and "raw_ip_resources" not in kwargs:
            entries = sorted(
                {(p.family, p.addr, p.length) for p in roa_prefixes})
            kwargs["ip_entries"] = [IpPrefix(f, a, l) for f, a, l in entries]
            kwargs.setdefault("as_entries", [AsInherit()])
        ee_cert, key = self.issue_ee(name, uri, key=ee_key, **kwargs)
        roa = rpkiobjects.build_roa(asn, roa_prefixes, ee_cert, key)
        self.objects[object_name] = roa.der
        return uri

    def add_gbr(self, name: str, properties: Sequence[Tuple[str, str]],
                ee_kwargs: Optional[dict] = None) -> str:
        object_name = f"{name}.gbr"
        uri = self.uri_for(object_name)
        ee_cert, key = self.issue_ee(name, uri, **(ee_kwargs or {}))
        gbr = rpkiobjects.build_gbr(properties, ee_cert, key)
        self.objects[object_name] = gbr.der
        return uri

    def add_object(self, object_name: str, data: bytes) -> str:
        self.objects[object_name] = data
        return self.uri_for(object_name)

    def remove_object(self, object_name: str, keep_in_manifest: bool = False):
        self.objects.pop(object_name, None)
        self.withdrawn.append(object_name)
        if keep_in_manifest:
            self.keep_in_manifest.append(object_name)

    def revoke(self, serial: Union[int, RawInteger]):
        raw = serial if isinstance(serial, RawInteger) else RawInteger.from_int(serial)
        self.revoked.append(raw)

    # -- commit -------------------------------------------------------------------

    def commit(self, manifest_number: Optional[Union[int, RawInteger]] = None,
               manifest_entries: Optional[Sequence[Tuple[bytes, bytes]]] = None,
               mft_ee_kwargs: Optional[dict] = None,
               this_update: Optional[int] = None,
               next_update: Optional[int] = None,
               crl_number: Optional[Union[int, RawInteger]] = None,
               transform_crl: Optional[Callable[[bytes], bytes]] = None,
               transform_mft: Optional[Callable[[bytes], bytes]] = None) -> RepositoryState:
        """Regenerate CRL and manifest, publish the batch (one serial bump).

        The transform hooks corrupt the freshly built object before it is
        hashed into the manifest, so deliberate damage still hash-matches.
        """
        fixture = self.fixture
        this_update = this_update if this_update is not None else fixture.base_time
        next_update = next_update if next_update is not None else fixture.base_time + 30 * DAY

        crl_obj = rpkiobjects.build_crl(
            issuer=self.cert.subject,
            crl_number=crl_number if crl_number is not None else self.manifest_number + 1,
            this_update=this_update,
            next_update=next_update,
            revoked_serials=self.revoked,
            signing_key=self.key,
        )
        crl_der = transform_crl(crl_obj.der) if transform_crl else crl_obj.der

        if manifest_entries is None:
            entries: List[Tuple[bytes, bytes]] = [
                (name.encode("utf-8", "surrogateescape"), cms.hash_object(data))
                for name, data in self.objects.items()
            ]
            entries.append((self.crl_name.encode(), cms.hash_object(crl_der)))
            for name in self.keep_in_manifest:
                old = self.state.get(self.uri_for(name))
                if old is not None:
                    entries.append((name.encode("utf-8", "surrogateescape"), cms.hash_object(old)))
            entries.sort()
        else:
            entries = list(manifest_entries)

        if manifest_number is None:
            self.manifest_number += 1
            number: Union[int, RawInteger] = self.manifest_number
        else:
            number = manifest_number
            if isinstance(manifest_number, int):
                self.manifest_number = manifest_number

        ee_cert, key = self.issue_ee(
            f"{self.name}-mft", self.manifest_uri, **(mft_ee_kwargs or {}))
        mft = rpkiobjects.build_manifest(
            number, this_update, next_update, entries, ee_cert, key)
        mft_der = transform_mft(mft.der) if transform_mft else mft.der

        batch: List[Tuple[str, str, Optional[bytes]]] = []
        current = self.state.object_map()
        for object_name, data in sorted(self.objects.items()):
            uri = self.uri_for(object_name)
            if current.get(uri) != data:
                batch.append((PUBLISH, uri, data))
        if current.get(self.crl_uri) != crl_der:
            batch.append((PUBLISH, self.crl_uri, crl_der))
        if current.get(self.manifest_uri) != mft_der:
            batch.append((PUBLISH, self.manifest_uri, mft_der))
        for object_name in self.withdrawn:
            uri = self.uri_for(object_name)
            if uri in current:
                batch.append((WITHDRAW, uri, None))
        self.withdrawn = []

        if batch:
            self.mount.state = self.state.apply_batch(batch)
        return self.state


def simple_tree(seed: int = 0, base_time: Optional[int] = None,
                roas: int = 1, **fixture_kwargs) -> Tuple[Fixture, Ca, Ca]:
    """TA plus one child CA carrying ``roas`` marker ROAs, committed."""
    fixture = Fixture(seed=seed, base_time=base_time, **fixture_kwargs)
    ta = fixture.add_ta()
    child = ta.add_child("alpha")
    for i in range(roas):
        child.add_roa(f"alpha{i}", fixture.next_asn(), [str(fixture.next_prefix())])
    fixture.commit_all()
    return fixture, ta, child
