"""Fetch channels used by the validator and crawler.

Two transports share one interface: MemTransport synthesizes RRDP
responses straight from repository states (fast, no sockets), while
HttpTransport talks to a real endpoint and enforces the caller's timing
limits (total deadline, minimum transfer rate after a grace period)
while reading the body.

rsync is deliberately not implemented; an alternate "file tree" channel
with the same semantics (enumerate then fetch raw objects) stands in
for it.
"""

from __future__ import annotations

import http.client
import socket
import ssl
import time
import urllib.parse
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from . import pubpoint
from .pubpoint import FaultPlan, RepositoryState


class FetchError(Exception):
    pass


class FetchStatusError(FetchError):
    def __init__(self, status: int, uri: str):
        super().__init__(f"HTTP {status} for {uri}")
        self.status = status
        self.uri = uri


class FetchTimeout(FetchError):
    pass


class FetchTooSlow(FetchError):
    pass


class FetchUnavailable(FetchError):
    """Connection refused, unresolvable, or protocol failure."""


class TlsVerificationError(FetchError):
    pass


TLS_ENFORCE = "enforce"
TLS_IGNORE = "ignore"


@dataclass(frozen=True)
class FetchLimits:
    """Real-second limits (callers pre-apply the time-scale factor)."""

    timeout_seconds: Optional[float] = None
    min_rate_bytes_per_second: Optional[float] = None
    min_rate_grace_seconds: Optional[float] = None
    connect_timeout: float = 10.0


NO_LIMITS = FetchLimits()


@dataclass
class FetchResult:
    data: bytes
    tls_warning: bool = False
    elapsed: float = 0.0


class Mount:
    """One simulated publication point: current state plus fault plan."""

    def __init__(self, state: RepositoryState, plan: FaultPlan = pubpoint.EMPTY_PLAN,
                 extra_files: Optional[Dict[str, bytes]] = None):
        self.state = state
        self.plan = plan
        self.extra_files = dict(extra_files or {})

    def set_state(self, state: RepositoryState, plan: Optional[FaultPlan] = None):
        self.state = state
        if plan is not None:
            self.plan = plan


class MemTransport:
    """Serves mounted repository states without any sockets.

    URI conventions: RRDP lives under https://{host}/..., raw objects
    keep their rsync://{host}/... identities.
    """

    def __init__(self):
        self.mounts: Dict[str, Mount] = {}
        self.request_log: list = []

    def mount(self, mount: Mount) -> Mount:
        self.mounts[mount.state.host] = mount
        return mount

    def notification_uri(self, host: str) -> str:
        return f"https://{host}/notification.xml"

    def _mount_for(self, host: str) -> Mount:
        if host not in self.mounts:
            raise FetchUnavailable(f"unknown host {host}")
        return self.mounts[host]

    def get(self, uri: str, limits: FetchLimits = NO_LIMITS,
            tls_policy: str = TLS_ENFORCE) -> FetchResult:
        self.request_log.append((time.monotonic(), uri))
        parsed = urllib.parse.urlsplit(uri)
        if parsed.scheme == "rsync":
            host = parsed.netloc
            mount = self._mount_for(host)
            data = mount.state.get(uri)
            if data is None:
                raise FetchStatusError(404, uri)
            return FetchResult(data=data)

        host = parsed.netloc
        mount = self._mount_for(host)
        tls_warning = False
        tls = mount.plan.first(pubpoint.TLS_CERT)
        if parsed.scheme == "https" and tls is not None and tls.mode not in (
                pubpoint.TLS_VALID, pubpoint.TLS_NONE, None):
            if tls.mode == pubpoint.TLS_MALFORMED or tls_policy == TLS_ENFORCE:
                raise TlsVerificationError(f"TLS validation failed for {uri} ({tls.mode})")
            tls_warning = True

        path = parsed.path.lstrip("/")
        for fault in mount.plan.all(pubpoint.HTTP_STATUS):
            if fault.path_pattern and fault.path_pattern in path:
                raise FetchStatusError(fault.code or 500, uri)

        state, plan = mount.state, mount.plan
        if path == "notification.xml":
            data = pubpoint.notification_xml(state, plan, base_url=f"https://{host}")
        elif path == "filelist":
            data = pubpoint.filelist_text(state)
        elif path in mount.extra_files:
            data = mount.extra_files[path]
        else:
            parts = path.split("/")
            if len(parts) == 3 and parts[0] == state.session_id:
                try:
                    serial = int(parts[1])
                except ValueError:
                    raise FetchStatusError(404, uri) from None
                if parts[2] == "snapshot.xml" and serial == state.serial:
                    data = pubpoint.snapshot_xml(state, plan)
                elif parts[2] == "delta.xml":
                    try:
                        pubpoint_delta = pubpoint.delta_xml(state, serial, plan)
                    except pubpoint.SerialOutOfRange:
                        raise FetchStatusError(404, uri) from None
                    data = pubpoint_delta
                else:
                    raise FetchStatusError(404, uri)
            else:
                raise FetchStatusError(404, uri)
        return FetchResult(data=data, tls_warning=tls_warning)

    # Alternate channel -----------------------------------------------------

    def fetch_tree(self, ca_repository_uri: str, limits: FetchLimits = NO_LIMITS,
                   tls_policy: str = TLS_ENFORCE) -> Dict[str, bytes]:
        host = urllib.parse.urlsplit(ca_repository_uri).netloc
        mount = self._mount_for(host)
        prefix = ca_repository_uri.rstrip("/") + "/"
        return {uri: data for uri, data in mount.state.objects if uri.startswith(prefix)}


class HttpTransport:
    """Plain http/https client with deadline and transfer-rate guards.

    ``rsync_map`` rewrites rsync://{host}/... identities onto the raw
    object paths of the endpoint that serves that host.
    """

    def __init__(self, rsync_map: Optional[Dict[str, str]] = None,
                 trust_ca_pem: Optional[bytes] = None):
        self.rsync_map = dict(rsync_map or {})
        self.trust_ca_pem = trust_ca_pem

    def map_rsync(self, host: str, server_base: str):
        self.rsync_map[host] = server_base

    def _rewrite(self, uri: str) -> str:
        parsed = urllib.parse.urlsplit(uri)
        if parsed.scheme != "rsync":
            return uri
        base = self.rsync_map.get(parsed.netloc)
        if base is None:
            raise FetchUnavailable(f"no raw-object endpoint for rsync host {parsed.netloc}")
        return f"{base}/repo/{parsed.netloc}{parsed.path}"

    def _ssl_context(self, verify: bool) -> ssl.SSLContext:
        if verify:
            ctx = ssl.create_default_context()
            if self.trust_ca_pem:
                ctx.load_verify_locations(cadata=self.trust_ca_pem.decode("ascii"))
        else:
            ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
            ctx.check_hostname = False
            ctx.verify_mode = ssl.CERT_NONE
        return ctx

    def get(self, uri: str, limits: FetchLimits = NO_LIMITS,
            tls_policy: str = TLS_ENFORCE) -> FetchResult:
        target = self._rewrite(uri)
        parsed = urllib.parse.urlsplit(target)
        tls_warning = False
        if parsed.scheme == "https":
            try:
                return self._request(parsed, target, limits, verify_tls=True)
            except TlsVerificationError:
                if tls_policy == TLS_ENFORCE:
                    raise
                tls_warning = True
            result = self._request(parsed, target, limits, verify_tls=False)
            result.tls_warning = tls_warning
            return result
        return self._request(parsed, target, limits, verify_tls=False)

    def _request(self, parsed, uri: str, limits: FetchLimits, verify_tls: bool) -> FetchResult:
        start = time.monotonic()
        host, port = parsed.hostname, parsed.port
        try:
            if parsed.scheme == "https":
                conn = http.client.HTTPSConnection(
                    host, port, timeout=limits.connect_timeout,
                    context=self._ssl_context(verify_tls),
                )
            else:
                conn = http.client.HTTPConnection(host, port, timeout=limits.connect_timeout)
            path = parsed.path or "/"
            if parsed.query:
                path += "?" + parsed.query
            conn.request("GET", path)
            response = conn.getresponse()
        except ssl.SSLCertVerificationError as exc:
            raise TlsVerificationError(str(exc)) from exc
        except ssl.SSLError as exc:
            if verify_tls:
                raise TlsVerificationError(str(exc)) from exc
            raise FetchUnavailable(f"TLS failure for {uri}: {exc}") from exc
        except (ConnectionError, socket.gaierror, socket.timeout, OSError) as exc:
            raise FetchUnavailable(f"cannot reach {uri}: {exc}") from exc

        try:
            if response.status != 200:
                raise FetchStatusError(response.status, uri)
            data = self._read_body(response, conn, limits, start)
        finally:
            conn.close()
        return FetchResult(data=data, elapsed=time.monotonic() - start)

    def _read_body(self, response, conn, limits: FetchLimits, start: float) -> bytes:
        chunks = []
        received = 0
        if conn.sock is not None:
            conn.sock.settimeout(0.02)
        while True:
            elapsed = time.monotonic() - start
            # The rate guard outranks the total timeout when both horizons
            # coincide: a slow stream is reported as slow, not timed out.
            if (limits.min_rate_bytes_per_second is not None
                    and limits.min_rate_grace_seconds is not None
                    and elapsed >= limits.min_rate_grace_seconds
                    and received / max(elapsed, 1e-9) < limits.min_rate_bytes_per_second):
                raise FetchTooSlow(
                    f"{received} bytes in {elapsed:.3f}s below "
                    f"{limits.min_rate_bytes_per_second} B/s")
            if limits.timeout_seconds is not None and elapsed > limits.timeout_seconds:
                raise FetchTimeout(f"no completion within {limits.timeout_seconds:.3f}s")
            try:
                # read1: at most one raw socket read, so the timeout poll
                # never blocks past ~20ms and partial data is never lost.
                chunk = response.read1(8192)
            except (socket.timeout, ssl.SSLWantReadError):
                raw = getattr(response.fp, "raw", None)
                if raw is not None and getattr(raw, "_timeout_occurred", False):
                    raw._timeout_occurred = False
                continue
            except (http.client.IncompleteRead, ConnectionError, OSError) as exc:
                raise FetchUnavailable(f"body read failed: {exc}") from exc
            if not chunk:
                return b"".join(chunks)
            chunks.append(chunk)
            received += len(chunk)

    # Alternate channel -----------------------------------------------------

    def fetch_tree(self, ca_repository_uri: str, limits: FetchLimits = NO_LIMITS,
                   tls_policy: str = TLS_ENFORCE) -> Dict[str, bytes]:
        host = urllib.parse.urlsplit(ca_repository_uri).netloc
        base = self.rsync_map.get(host)
        if base is None:
            raise FetchUnavailable(f"no raw-object endpoint for rsync host {host}")
        listing = self.get(f"{base}/filelist/{host}", limits, tls_policy).data
        prefix = ca_repository_uri.rstrip("/") + "/"
        tree: Dict[str, bytes] = {}
        for line in listing.decode("ascii", "replace").splitlines():
            if not line.strip():
                continue
            uri = line.split()[0]
            if uri.startswith(prefix):
                tree[uri] = self.get(uri, limits, tls_policy).data
        return tree
