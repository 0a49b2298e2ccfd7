"""Reference relying-party validation: TALs to VRPs.

The walk is breadth-first and URI-sorted so single-worker runs are fully
deterministic; with more workers only repository fetching is parallel,
validation and report assembly stay sequential in sorted order. Every
failure lands in the report as a normalized error code; the operation
never raises for content reasons.
"""

from __future__ import annotations

import time as _time
import urllib.parse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import checks, cms, oids, profiles, rpkiobjects, rrdpclient
from .asn1 import Asn1Error, NonCanonicalEncoding
from .checks import CheckIssue
from .cms import SignedObject
from .iputil import ResourceSet
from .profiles import InterpretationProfile
from .reporting import CacheState, ErrorCode, Issue, Stats, ValidationReport, Vrp
from .rpkiobjects import Crl, Manifest, Roa, Tal
from .rrdpclient import RepoRef, RepoView, process_repository_update
from .x509build import ObjectParseError, ResourceCertificate, verify_certificate_signature


@dataclass
class ValidatedRoa:
    roa: Roa
    asn: int
    source_uri: str


def emit_vrps(validated: Sequence[ValidatedRoa], trust_anchor_name: str) -> frozenset:
    """One VRP per (asID, prefix); maxLength defaults to the prefix length."""
    out = set()
    for item in validated:
        for p in item.roa.prefixes:
            max_length = p.max_length if p.max_length is not None else p.length
            out.add(Vrp(asn=item.asn, family=p.family, addr=p.addr, length=p.length,
                        max_length=max_length, trust_anchor=trust_anchor_name,
                        source_uri=item.source_uri))
    return frozenset(out)


@dataclass
class _CaContext:
    cert: ResourceCertificate
    effective: ResourceSet
    policy_oid: Optional[str]
    depth: int
    cert_uri: str
    tal_name: str

    def sia(self, method: str) -> Optional[str]:
        return self.cert.sia_uri(method)


class _Run:
    def __init__(self, transport, profile: InterpretationProfile, cache: CacheState,
                 *, time_scale: float, now: int, workers: int):
        self.transport = transport
        self.profile = profile
        self.cache = cache
        self.time_scale = time_scale
        self.now = now
        self.workers = max(1, workers)
        self.issues: List[Issue] = []
        self.vrps: List[Vrp] = []
        self.stats = Stats()
        self._orphan_manifest_meta: Dict[str, Tuple[int, str]] = {}

    # -- small helpers --------------------------------------------------------

    def add(self, uri: str, found: Sequence[CheckIssue]):
        for code, path, message in found:
            self.issues.append(Issue(code, uri, field_path=path, message=message))

    def error(self, code: ErrorCode, uri: str, message: str = "", path: str = ""):
        self.issues.append(Issue(code, uri, field_path=path, message=message))

    def ruleset(self):
        from .asn1 import EncodingRuleset
        if self.profile.encoding_ruleset == profiles.DER_STRICT:
            return EncodingRuleset.DER_STRICT
        return EncodingRuleset.BER_TOLERANT

    # -- certificate validation ------------------------------------------------

    def validate_certificate(self, cert: ResourceCertificate, uri: str,
                             parent: Optional[_CaContext], *, is_ca: bool,
                             crl: Optional[Crl], is_ta: bool = False
                             ) -> Tuple[bool, ResourceSet, Optional[str]]:
        """Full profile check pile; returns (ok, effective resources, policy oid)."""
        found: List[CheckIssue] = []
        profile, stats = self.profile, self.stats

        if parent is not None and not verify_certificate_signature(cert, parent.cert.spki):
            found.append((ErrorCode.SIGNATURE_INVALID, "signature", "issuer signature invalid"))
        if is_ta and not verify_certificate_signature(cert, cert.spki):
            found.append((ErrorCode.SIGNATURE_INVALID, "signature", "self-signature invalid"))

        if cert.signature_alg == oids.ECDSA_WITH_SHA256 or cert.public_key_alg == oids.EC_PUBLIC_KEY:
            stats.note_knob("ecc_signatures", profile.ecc_signatures)
            if profile.ecc_signatures == profiles.REJECT:
                found.append((ErrorCode.UNSUPPORTED_SIGNATURE_ALG, "signature_algorithm",
                              "elliptic-curve keys are outside the supported algorithm set"))

        if cert.not_before > self.now:
            found.append((ErrorCode.CERT_NOT_YET_VALID, "validity", "notBefore in the future"))
        if cert.not_after < self.now:
            found.append((ErrorCode.CERT_EXPIRED, "validity", "notAfter in the past"))
        if crl is not None and crl.is_revoked(cert.serial):
            found.append((ErrorCode.CERT_REVOKED, "serial", "listed in issuer CRL"))
        if is_ca and not cert.basic_constraints_ca:
            found.append((ErrorCode.MALFORMED_OBJECT, "basic_constraints",
                          "CA certificate without CA flag"))

        found.extend(checks.check_extensions(cert, profile, is_ca=is_ca, is_ta=is_ta, stats=stats))
        # Policy-OID consistency is a product-vs-issuing-certificate check;
        # CA certificates may switch algorithms for their subtree.
        cp_parent = parent.policy_oid if (parent is not None and not is_ca) else None
        cp_issues, policy_oid = checks.check_cp(cert, profile, cp_parent, stats=stats)
        found.extend(cp_issues)
        found.extend(checks.check_issuer_subject(
            cert, parent.cert if parent else None, profile, stats=stats))
        found.extend(checks.check_ip_canonicality(cert, profile, stats=stats))
        effective, res_issues = checks.check_resources(
            cert, parent.effective if parent else None, profile, policy_oid, stats=stats)
        found.extend(res_issues)

        self.add(uri, found)
        return (not found, effective, policy_oid)

    def validate_signed_object(self, signed: SignedObject, uri: str, ctx: _CaContext,
                               expected_type: str, crl: Optional[Crl]
                               ) -> Tuple[bool, ResourceSet]:
        """CMS template checks plus full EE certificate validation."""
        ok = True
        profile, stats = self.profile, self.stats
        if signed.content_type != expected_type:
            self.error(ErrorCode.CMS_INVALID, uri, f"content type {signed.content_type}")
            ok = False
        verified, reasons = cms.verify_signed_object(signed)
        if not verified:
            self.error(ErrorCode.CMS_INVALID, uri, "; ".join(reasons))
            ok = False
        if signed.signature_algorithm_oid == oids.ECDSA_WITH_SHA256:
            stats.note_knob("ecc_signatures", profile.ecc_signatures)
            if profile.ecc_signatures == profiles.REJECT:
                self.error(ErrorCode.UNSUPPORTED_SIGNATURE_ALG, uri,
                           "ECDSA signature on signed object")
                ok = False

        ee = signed.ee_certificate
        cert_ok, effective, _ = self.validate_certificate(
            ee, uri, ctx, is_ca=False, crl=crl)
        ok = ok and cert_ok

        signed_uris = ee.sia_all(oids.AD_SIGNED_OBJECT)
        if len(signed_uris) > 1:
            stats.note_knob("extra_sia_signedobject_uris", profile.extra_sia_signedobject_uris)
            if profile.extra_sia_signedobject_uris == profiles.REJECT:
                self.error(ErrorCode.EXTRA_SIA_URI, uri,
                           f"{len(signed_uris)} signedObject URIs in SIA")
                ok = False
        stats.note_knob("signed_object_uri_match", profile.signed_object_uri_match)
        if profile.signed_object_uri_match == profiles.ENFORCE:
            if signed_uris and signed_uris[0] != uri:
                self.error(ErrorCode.SIGNED_OBJECT_URI_MISMATCH, uri,
                           f"SIA says {signed_uris[0]}")
                ok = False
        return ok, effective

    # -- repository-level processing --------------------------------------------

    def process_ca(self, ctx: _CaContext, view: RepoView) -> List[_CaContext]:
        self.stats.cas_visited += 1
        self.stats.max_depth_reached = max(self.stats.max_depth_reached, ctx.depth)

        repo_key = ctx.sia(oids.AD_RPKI_NOTIFY) or ctx.sia(oids.AD_CA_REPOSITORY) or ctx.cert_uri
        self.issues.extend(view.issues)
        for kind in view.fallbacks:
            self.stats.fallbacks_taken.append((repo_key, kind))
        if view.fetched_via == rrdpclient.VIA_NONE:
            return []
        self.stats.objects_fetched += len(view.objects)

        manifest_uri = ctx.sia(oids.AD_RPKI_MANIFEST)
        if not manifest_uri:
            self.error(ErrorCode.MISSING_MANIFEST, ctx.cert_uri, "no manifest URI in SIA")
            return []
        mft_bytes = view.objects.get(manifest_uri)
        if mft_bytes is None:
            self.error(ErrorCode.MISSING_MANIFEST, manifest_uri, "manifest not present")
            return []
        mft = self.parse_object(rpkiobjects.parse_manifest, mft_bytes, manifest_uri)
        if mft is None:
            return []

        crl = self.load_crl(mft, view, ctx)
        if crl is None:
            return []

        ok, _ = self.validate_signed_object(mft.signed, manifest_uri, ctx, oids.CT_MANIFEST, crl)
        if not ok:
            return []
        if not self.check_manifest_content(mft, manifest_uri, view):
            return []

        validated = self.collect_listed_files(mft, manifest_uri, ctx, view)
        if validated is None:
            return []
        return self.process_files(validated, ctx, crl)

    def parse_object(self, parser, data: bytes, uri: str):
        try:
            return parser(data, self.ruleset())
        except NonCanonicalEncoding as exc:
            self.stats.note_knob("encoding_ruleset", self.profile.encoding_ruleset)
            self.error(ErrorCode.NON_CANONICAL_ENCODING, uri, str(exc))
        except (ObjectParseError, Asn1Error) as exc:
            self.error(ErrorCode.MALFORMED_OBJECT, uri, str(exc))
        except Exception as exc:  # crash-freedom: report, never terminate
            self.error(ErrorCode.MALFORMED_OBJECT, uri, f"unexpected parse failure: {exc}")
        return None

    def load_crl(self, mft: Manifest, view: RepoView, ctx: _CaContext) -> Optional[Crl]:
        crl_uri = mft.ee_certificate.crl_distribution_point
        if not crl_uri:
            self.error(ErrorCode.MISSING_CRL, ctx.cert_uri, "manifest EE lacks CRL DP")
            return None
        crl_bytes = view.objects.get(crl_uri)
        if crl_bytes is None:
            self.error(ErrorCode.MISSING_CRL, crl_uri, "CRL not present in repository")
            return None
        crl = self.parse_object(rpkiobjects.parse_crl, crl_bytes, crl_uri)
        if crl is None:
            return None
        if not rpkiobjects.verify_crl_signature(crl, ctx.cert.spki):
            self.error(ErrorCode.SIGNATURE_INVALID, crl_uri, "CRL signature invalid")
            return None
        if crl.next_update < self.now:
            self.error(ErrorCode.STALE_CRL, crl_uri, "nextUpdate in the past")
            return None
        return crl

    def check_manifest_content(self, mft: Manifest, uri: str, view: RepoView) -> bool:
        if mft.this_update > self.now or mft.next_update < self.now:
            self.error(ErrorCode.STALE_MANIFEST, uri, "validity window excludes now")
            return False
        profile, stats = self.profile, self.stats
        previous = self._manifest_meta(uri)
        current_number = mft.number()
        current_hash = cms.hash_object(mft.der).hex()
        if view.fetched_via == rrdpclient.VIA_DELTA and previous is not None:
            prev_number, prev_hash = previous
            stats.note_knob("manifest_number_increment", profile.manifest_number_increment)
            if (profile.manifest_number_increment == profiles.ENFORCE_ON_DELTA
                    and current_hash != prev_hash and current_number <= prev_number):
                self.error(ErrorCode.MANIFEST_NUMBER_NOT_INCREMENTED, uri,
                           f"number {current_number} after {prev_number}")
                return False
        self._store_manifest_meta(uri, current_number, current_hash)
        return True

    def _meta_entry(self, mft_uri: str):
        for entry in self.cache.entries.values():
            if mft_uri in entry.manifest_numbers:
                return entry
        return None

    def _manifest_meta(self, mft_uri: str):
        entry = self._meta_entry(mft_uri)
        if entry is not None:
            return entry.manifest_numbers.get(mft_uri)
        return self._orphan_manifest_meta.get(mft_uri)

    def _store_manifest_meta(self, mft_uri: str, number: int, digest: str):
        stored = False
        for entry in self.cache.entries.values():
            if mft_uri in entry.objects or mft_uri in entry.manifest_numbers:
                entry.manifest_numbers[mft_uri] = (number, digest)
                stored = True
        if not stored:
            self._orphan_manifest_meta[mft_uri] = (number, digest)

    def collect_listed_files(self, mft: Manifest, mft_uri: str, ctx: _CaContext,
                             view: RepoView) -> Optional[List[Tuple[bytes, str, bytes]]]:
        """Resolve every fileList entry to bytes, honoring the withdraw
        conflict knob; any unresolvable listed file invalidates the CA."""
        profile, stats = self.profile, self.stats
        ca_repo = (ctx.sia(oids.AD_CA_REPOSITORY) or "").rstrip("/")
        by_name: Dict[bytes, Tuple[str, bytes]] = {}
        for uri, data in view.objects.items():
            if ca_repo and not uri.startswith(ca_repo + "/"):
                continue
            name = urllib.parse.unquote_to_bytes(uri.rsplit("/", 1)[-1])
            by_name[name] = (uri, data)
        tomb_by_name: Dict[bytes, Tuple[str, bytes]] = {}
        for uri, data in view.tombstones.items():
            name = urllib.parse.unquote_to_bytes(uri.rsplit("/", 1)[-1])
            tomb_by_name[name] = (uri, data)

        validated: List[Tuple[bytes, str, bytes]] = []
        fatal = False
        for name, want_hash in mft.file_list:
            hit = by_name.get(name)
            if hit is not None:
                uri, data = hit
                if cms.hash_object(data) != want_hash:
                    self.error(ErrorCode.HASH_MISMATCH, uri,
                               "content hash differs from manifest")
                    fatal = True
                else:
                    validated.append((name, uri, data))
                continue
            tomb = tomb_by_name.get(name)
            if tomb is not None:
                stats.note_knob("withdraw_vs_manifest", profile.withdraw_vs_manifest)
                uri, data = tomb
                if (profile.withdraw_vs_manifest == profiles.PRIORITIZE_MANIFEST
                        and cms.hash_object(data) == want_hash):
                    validated.append((name, uri, data))
                    continue
            display = name.decode("utf-8", "backslashreplace")
            self.error(ErrorCode.MISSING_LISTED_FILE, mft_uri,
                       message=f"listed file {display!r} not available", path="file_list")
            fatal = True
        if fatal:
            return None
        return validated

    def process_files(self, validated: List[Tuple[bytes, str, bytes]], ctx: _CaContext,
                      crl: Crl) -> List[_CaContext]:
        children: List[_CaContext] = []
        child_candidates = [item for item in validated if item[0].endswith(b".cer")]
        child_candidates.sort(key=lambda item: item[1])
        limit = self.profile.max_children_breadth
        if limit is not None and len(child_candidates) > limit:
            self.stats.note_knob("max_children_breadth", str(limit))
            self.error(ErrorCode.BREADTH_LIMIT_EXCEEDED, ctx.cert_uri,
                       f"{len(child_candidates)} children, limit {limit}")
            child_candidates = child_candidates[:limit]
        allowed_children = {uri for _, uri, _ in child_candidates}

        for name, uri, data in sorted(validated, key=lambda item: item[1]):
            if name.endswith(b".cer"):
                if uri not in allowed_children:
                    continue
                child_ctx = self.process_child_cert(uri, data, ctx, crl)
                if child_ctx is not None:
                    children.append(child_ctx)
            elif name.endswith(b".roa"):
                self.process_roa(uri, data, ctx, crl)
            elif name.endswith(b".gbr"):
                self.process_gbr(uri, data, ctx, crl)
            # .crl handled via the manifest EE's distribution point; other
            # suffixes are preserved but not interpreted.
        return children

    def process_child_cert(self, uri: str, data: bytes, ctx: _CaContext,
                           crl: Crl) -> Optional[_CaContext]:
        cert = self.parse_object(_parse_cert, data, uri)
        if cert is None:
            return None
        ok, effective, policy_oid = self.validate_certificate(
            cert, uri, ctx, is_ca=True, crl=crl)
        if not ok:
            return None
        self.stats.objects_accepted += 1
        depth = ctx.depth + 1
        if depth > self.profile.max_chain_depth:
            self.stats.note_knob("max_chain_depth", str(self.profile.max_chain_depth))
            self.error(ErrorCode.DEPTH_LIMIT_EXCEEDED, uri,
                       f"depth {depth} exceeds limit {self.profile.max_chain_depth}")
            return None
        return _CaContext(cert=cert, effective=effective, policy_oid=policy_oid,
                          depth=depth, cert_uri=uri, tal_name=ctx.tal_name)

    def process_roa(self, uri: str, data: bytes, ctx: _CaContext, crl: Crl):
        roa = self.parse_object(rpkiobjects.parse_roa, data, uri)
        if roa is None:
            return
        ok, ee_effective = self.validate_signed_object(roa.signed, uri, ctx, oids.CT_ROA, crl)
        if not ok:
            return
        asn, asn_issues = checks.decode_roa_asid(roa.as_id, self.profile, stats=self.stats)
        if asn_issues:
            self.add(uri, asn_issues)
            return
        reconsidered = (self.profile.rfc8360_oids == profiles.APPLY_RECONSIDERED
                        and ctx.policy_oid == oids.CP_IPADDR_ASNUMBER_V2)
        kept = []
        for p in roa.prefixes:
            from .iputil import family_bits
            if p.max_length is not None and not p.length <= p.max_length <= family_bits(p.family):
                self.error(ErrorCode.ROA_MAXLENGTH_INVALID, uri,
                           f"maxLength {p.max_length} invalid for /{p.length}")
                return
            if ee_effective.contains_prefix(p.ip_prefix()):
                kept.append(p)
            elif not reconsidered:
                self.error(ErrorCode.RESOURCE_OVERCLAIM, uri,
                           f"prefix {p.ip_prefix()} outside EE resources")
                return
        self.stats.objects_accepted += 1
        validated = ValidatedRoa(roa=Roa(roa.signed, roa.as_id, tuple(kept)),
                                 asn=asn, source_uri=uri)
        self.vrps.extend(emit_vrps([validated], ctx.tal_name))

    def process_gbr(self, uri: str, data: bytes, ctx: _CaContext, crl: Crl):
        gbr = self.parse_object(rpkiobjects.parse_gbr, data, uri)
        if gbr is None:
            return
        ok, _ = self.validate_signed_object(gbr.signed, uri, ctx, oids.CT_GHOSTBUSTERS, crl)
        if ok:
            self.stats.objects_accepted += 1


def _parse_cert(data: bytes, ruleset):
    from .x509build import parse_certificate
    return parse_certificate(data, ruleset)


def _is_dubious_host(uri: str) -> bool:
    netloc = urllib.parse.urlsplit(uri).netloc
    return ":" in netloc or "@" in netloc


def validate_tree(tals: Sequence[Tal], transport, profile: InterpretationProfile,
                  cache: Optional[CacheState] = None, *, time_scale: float = 1.0,
                  now: Optional[int] = None, workers: int = 1
                  ) -> Tuple[ValidationReport, CacheState]:
    """Walk every TAL to a VRP set under one interpretation profile.

    Always returns a report; failures become normalized errors. The cache
    argument is not mutated; the returned CacheState reflects this run.
    """
    cache = cache.clone() if cache is not None else CacheState()
    run = _Run(transport, profile, cache,
               time_scale=time_scale, now=now if now is not None else int(_time.time()),
               workers=workers)

    roots: List[_CaContext] = []
    for tal in tals:
        ctx = _load_trust_anchor(run, tal)
        if ctx is not None:
            roots.append(ctx)

    level = sorted(roots, key=lambda c: c.cert_uri)
    while level:
        views = _fetch_level(run, level)
        next_level: List[_CaContext] = []
        for ctx in level:
            view = views[id(ctx)]
            next_level.extend(run.process_ca(ctx, view))
        level = sorted(next_level, key=lambda c: c.cert_uri)

    report = ValidationReport(vrps=tuple(run.vrps), errors=tuple(run.issues),
                              stats=run.stats).finalized()
    return report, cache


def _repo_ref(ctx: _CaContext) -> RepoRef:
    return RepoRef(
        ca_repository=(ctx.sia(oids.AD_CA_REPOSITORY) or "").rstrip("/"),
        manifest_uri=ctx.sia(oids.AD_RPKI_MANIFEST) or "",
        notify_uri=ctx.sia(oids.AD_RPKI_NOTIFY),
    )


def _fetch_one(run: _Run, ctx: _CaContext) -> RepoView:
    ref = _repo_ref(ctx)
    if ref.ca_repository and _is_dubious_host(ref.ca_repository):
        run.stats.note_knob("dubious_host_uris", run.profile.dubious_host_uris)
        if run.profile.dubious_host_uris == profiles.REJECT:
            view = RepoView()
            view.issues.append(Issue(ErrorCode.DUBIOUS_HOST, ref.ca_repository,
                                     message="repository URI has unexpected structure"))
            return view
    started = _time.monotonic()
    view = process_repository_update(run.transport, ref, run.cache, run.profile,
                                     time_scale=run.time_scale, stats=run.stats)
    key = ref.notify_uri or ref.ca_repository
    run.stats.repo_elapsed[key] = run.stats.repo_elapsed.get(key, 0.0) + (
        _time.monotonic() - started)
    return view


def _fetch_level(run: _Run, level: List[_CaContext]) -> Dict[int, RepoView]:
    if run.workers == 1 or len(level) == 1:
        return {id(ctx): _fetch_one(run, ctx) for ctx in level}
    with ThreadPoolExecutor(max_workers=run.workers) as pool:
        futures = {id(ctx): pool.submit(_fetch_one, run, ctx) for ctx in level}
        return {key: future.result() for key, future in futures.items()}


def _load_trust_anchor(run: _Run, tal: Tal) -> Optional[_CaContext]:
    fetcher = rrdpclient.LimitedFetcher(run.transport, run.profile, run.time_scale,
                                  run.stats, run.issues)
    data = None
    used_uri = tal.uris[0]
    for uri in tal.uris:
        data = fetcher.get(uri)
        if data is not None:
            used_uri = uri
            break
    if data is None:
        run.error(ErrorCode.TAL_UNREACHABLE, tal.name, "no TAL URI reachable")
        return None
    cert = run.parse_object(_parse_cert, data, used_uri)
    if cert is None:
        return None
    if cert.spki != tal.spki:
        run.error(ErrorCode.TAL_KEY_MISMATCH, used_uri,
                  "subjectPublicKeyInfo differs from TAL key")
        return None
    ok, effective, policy_oid = run.validate_certificate(
        cert, used_uri, None, is_ca=True, crl=None, is_ta=True)
    if not ok:
        return None
    run.stats.objects_accepted += 1
    return _CaContext(cert=cert, effective=effective, policy_oid=policy_oid,
                      depth=0, cert_uri=used_uri, tal_name=tal.name)
