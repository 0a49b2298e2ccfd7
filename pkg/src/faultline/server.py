"""HTTP(S) endpoint serving simulated publication points.

One server can host many pubpoints (mounted by logical host label), so
chain fixtures with dozens of repositories need a single port. Faults
are applied per mount: status overrides, response-rate throttling, and
the server-wide TLS certificate mode.
"""

from __future__ import annotations

import datetime
import http.server
import ipaddress
import ssl
import tempfile
import threading
import time
import urllib.parse
from typing import Dict, Optional, Tuple

from . import pubpoint
from .fetch import Mount
from .pubpoint import EMPTY_PLAN, Fault, FaultPlan, RepositoryState


class BindFailure(OSError):
    pass


def mint_tls_material(mode: str, wildcard_dns: bool = False,
                      omit_common_name: bool = False):
    """Build (server chain PEM, key PEM, ca PEM) for the requested mode."""
    from cryptography import x509
    from cryptography.hazmat.primitives import hashes, serialization
    from cryptography.hazmat.primitives.asymmetric import rsa
    from cryptography.x509.oid import NameOID

    from . import keys as keypool

    now = datetime.datetime.now(datetime.timezone.utc)
    ca_key = keypool.pool_rsa_key(14)
    server_key = keypool.pool_rsa_key(15)

    ca_name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "faultline test CA")])
    ca_cert = (
        x509.CertificateBuilder()
        .subject_name(ca_name).issuer_name(ca_name)
        .public_key(ca_key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(days=2))
        .not_valid_after(now + datetime.timedelta(days=3650))
        .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True)
        .sign(ca_key, hashes.SHA256())
    )

    subject_attrs = []
    if not omit_common_name:
        subject_attrs.append(x509.NameAttribute(NameOID.COMMON_NAME, "127.0.0.1"))
    subject = x509.Name(subject_attrs)

    self_signed = mode == pubpoint.TLS_SELF_SIGNED
    builder = (
        x509.CertificateBuilder()
        .subject_name(subject)
        .issuer_name(subject if self_signed else ca_name)
        .public_key(server_key.public_key())
        .serial_number(x509.random_serial_number())
    )
    if mode == pubpoint.TLS_EXPIRED:
        builder = builder.not_valid_before(now - datetime.timedelta(days=30))
        builder = builder.not_valid_after(now - datetime.timedelta(days=1))
    else:
        builder = builder.not_valid_before(now - datetime.timedelta(days=1))
        builder = builder.not_valid_after(now + datetime.timedelta(days=365))
    if not self_signed:
        # Self-signed variant models the observed live certificate that
        # also lacks DNS-IDs, so only CA-signed certs get a SAN.
        san = [
            x509.DNSName("localhost"),
            x509.IPAddress(ipaddress.ip_address("127.0.0.1")),
        ]
        if wildcard_dns:
            san.append(x509.DNSName("*.wild.test"))
        builder = builder.add_extension(x509.SubjectAlternativeName(san), critical=False)
    cert = builder.sign(server_key if self_signed else ca_key, hashes.SHA256())

    chain_pem = cert.public_bytes(serialization.Encoding.PEM)
    key_pem = server_key.private_bytes(
        serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption())
    ca_pem = ca_cert.public_bytes(serialization.Encoding.PEM)
    return chain_pem, key_pem, ca_pem


class _Handler(http.server.BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "faultline-pp/0.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def do_GET(self):
        server: "PubPointServer" = self.server  # type: ignore[assignment]
        try:
            status, data, mount = server.resolve(self.path)
        except Exception:
            status, data, mount = 500, b"internal error", None
        server.request_log.append((time.monotonic(), self.path, status))
        try:
            self.send_response(status)
            self.send_header("Content-Type", "application/octet-stream")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            limit = mount.plan.first(pubpoint.RATE_LIMIT) if mount else None
            if limit is None or not limit.bytes_per_second:
                self.wfile.write(data)
                return
            rate = limit.bytes_per_second
            interval = 0.02
            chunk_size = max(1, int(rate * interval))
            sent = 0
            start = time.monotonic()
            while sent < len(data):
                chunk = data[sent:sent + chunk_size]
                self.wfile.write(chunk)
                self.wfile.flush()
                sent += len(chunk)
                # Pace to the configured byte rate.
                target = start + sent / rate
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
        except (BrokenPipeError, ConnectionResetError, ssl.SSLError):
            pass  # client gave up mid-response (expected under stall tests)


class PubPointServer(http.server.ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: Tuple[str, int], tls_fault: Optional[Fault] = None):
        try:
            super().__init__(address, _Handler)
        except OSError as exc:
            raise BindFailure(str(exc)) from exc
        self.mounts: Dict[str, Mount] = {}
        self.request_log: list = []
        self.tls_fault = tls_fault
        self.ca_pem: Optional[bytes] = None
        self._tmpdir: Optional[tempfile.TemporaryDirectory] = None
        self._scheme = "http"
        if tls_fault is not None and tls_fault.mode not in (None, pubpoint.TLS_NONE):
            self._scheme = "https"
            if tls_fault.mode != pubpoint.TLS_MALFORMED:
                self._enable_tls(tls_fault)
            # MALFORMED keeps speaking plain HTTP on the "https" port, which
            # breaks every client handshake in a protocol-level way.

    def _enable_tls(self, fault: Fault):
        chain, key, ca = mint_tls_material(
            fault.mode, wildcard_dns=fault.wildcard_dns,
            omit_common_name=fault.omit_common_name)
        self.ca_pem = ca
        self._tmpdir = tempfile.TemporaryDirectory(prefix="faultline-tls-")
        chain_path = f"{self._tmpdir.name}/chain.pem"
        key_path = f"{self._tmpdir.name}/key.pem"
        with open(chain_path, "wb") as fh:
            fh.write(chain)
        with open(key_path, "wb") as fh:
            fh.write(key)
        ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        ctx.load_cert_chain(chain_path, key_path)
        self.socket = ctx.wrap_socket(self.socket, server_side=True)

    def handle_error(self, request, client_address):
        # Aborted connections are routine under stall/TLS fault plans.
        pass

    # -- mounts -------------------------------------------------------------

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"{self._scheme}://{host}:{port}"

    def add_mount(self, mount: Mount) -> Mount:
        self.mounts[mount.state.host] = mount
        return mount

    def set_state(self, host: str, state: RepositoryState, plan: Optional[FaultPlan] = None):
        self.mounts[host].set_state(state, plan)

    def notification_uri(self, host: str) -> str:
        return f"{self.base_url}/{host}/notification.xml"

    def filelist_uri(self, host: str) -> str:
        return f"{self.base_url}/filelist/{host}"

    # -- request resolution ---------------------------------------------------

    def resolve(self, raw_path: str):
        path = urllib.parse.urlsplit(raw_path).path
        parts = [p for p in path.split("/") if p]
        if not parts:
            return 404, b"not found", None

        if parts[0] == "repo" and len(parts) >= 2:
            host = parts[1]
            mount = self.mounts.get(host)
            if mount is None:
                return 404, b"unknown repository", None
            rest = "/".join(parts[2:])
            uri = f"rsync://{host}/{rest}"
            status = self._status_fault(mount, rest)
            if status is not None:
                return status, b"fault", mount
            data = mount.state.get(uri)
            if data is None:
                return 404, b"no such object", mount
            return 200, data, mount

        if parts[0] == "filelist" and len(parts) == 2:
            mount = self.mounts.get(parts[1])
            if mount is None:
                return 404, b"unknown repository", None
            status = self._status_fault(mount, "filelist")
            if status is not None:
                return status, b"fault", mount
            return 200, pubpoint.filelist_text(mount.state), mount

        host = parts[0]
        mount = self.mounts.get(host)
        if mount is None:
            return 404, b"unknown repository", None
        local = "/".join(parts[1:])
        status = self._status_fault(mount, local)
        if status is not None:
            return status, b"fault", mount
        state, plan = mount.state, mount.plan
        if local == "notification.xml":
            base = f"{self.base_url}/{host}"
            return 200, pubpoint.notification_xml(state, plan, base_url=base), mount
        if local in mount.extra_files:
            return 200, mount.extra_files[local], mount
        sub = local.split("/")
        if len(sub) == 3 and sub[0] == state.session_id:
            try:
                serial = int(sub[1])
            except ValueError:
                return 404, b"bad serial", mount
            if sub[2] == "snapshot.xml" and serial == state.serial:
                return 200, pubpoint.snapshot_xml(state, plan), mount
            if sub[2] == "delta.xml":
                try:
                    return 200, pubpoint.delta_xml(state, serial, plan), mount
                except pubpoint.SerialOutOfRange:
                    return 404, b"serial out of range", mount
        return 404, b"not found", mount

    @staticmethod
    def _status_fault(mount: Mount, local_path: str) -> Optional[int]:
        for fault in mount.plan.all(pubpoint.HTTP_STATUS):
            if fault.path_pattern and fault.path_pattern in local_path:
                return fault.code or 500
        return None

    def shutdown_server(self):
        self.shutdown()
        self.server_close()
        if self._tmpdir is not None:
            self._tmpdir.cleanup()


def serve(state: Optional[RepositoryState] = None, plan: FaultPlan = EMPTY_PLAN,
          bind: Tuple[str, int] = ("127.0.0.1", 0)) -> PubPointServer:
    """Start an endpoint, optionally pre-mounting one state; the handle
    supports live state swap and graceful shutdown."""
    server = PubPointServer(bind, tls_fault=plan.first(pubpoint.TLS_CERT))
    if state is not None:
        server.add_mount(Mount(state, plan))
    thread = threading.Thread(target=server.serve_forever, name="faultline-pp", daemon=True)
    thread.start()
    return server
