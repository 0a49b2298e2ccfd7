import time

import pytest

from faultline import pubpoint, server as srv
from faultline.fetch import (
    FetchLimits,
    FetchStatusError,
    FetchTimeout,
    FetchTooSlow,
    FetchUnavailable,
    HttpTransport,
    MemTransport,
    Mount,
    TlsVerificationError,
)
from faultline.pubpoint import Fault, FaultPlan, RepositoryState


@pytest.fixture()
def state():
    s = RepositoryState.fresh("pp.test", "11111111-2222-3333-4444-555555555555")
    s = s.publish("rsync://pp.test/repo/a.roa", b"A" * 3000)
    return s.publish("rsync://pp.test/repo/b.roa", b"B" * 3000)


@pytest.fixture()
def served(state):
    handle = srv.serve(state)
    yield handle, state
    handle.shutdown_server()


class TestHttpServer:
    def test_notification_ok(self, served):
        handle, state = served
        transport = HttpTransport()
        data = transport.get(handle.notification_uri("pp.test")).data
        assert b"<notification" in data

    def test_snapshot_and_delta_paths(self, served):
        handle, state = served
        transport = HttpTransport()
        base = f"{handle.base_url}/pp.test/{state.session_id}"
        snap = transport.get(f"{base}/{state.serial}/snapshot.xml").data
        assert b"<snapshot" in snap
        delta = transport.get(f"{base}/1/delta.xml").data
        assert b"<delta" in delta
        with pytest.raises(FetchStatusError):
            transport.get(f"{base}/99/delta.xml")

    def test_raw_object_path(self, served):
        handle, _ = served
        transport = HttpTransport(rsync_map={"pp.test": handle.base_url})
        assert transport.get("rsync://pp.test/repo/a.roa").data == b"A" * 3000

    def test_status_fault(self, served):
        handle, state = served
        plan = FaultPlan((Fault(pubpoint.HTTP_STATUS, code=503, path_pattern="notification"),))
        handle.set_state("pp.test", state, plan)
        with pytest.raises(FetchStatusError) as exc:
            HttpTransport().get(handle.notification_uri("pp.test"))
        assert exc.value.status == 503

    def test_request_log_records_paths(self, served):
        handle, _ = served
        HttpTransport().get(handle.notification_uri("pp.test"))
        assert any("notification.xml" in path for _, path, _ in handle.request_log)

    def test_live_state_swap(self, served):
        handle, state = served
        updated = state.publish("rsync://pp.test/repo/c.roa", b"C")
        handle.set_state("pp.test", updated)
        data = HttpTransport().get(handle.notification_uri("pp.test")).data
        assert f'serial="{updated.serial}"'.encode() in data

    def test_unknown_mount_404(self, served):
        handle, _ = served
        with pytest.raises(FetchStatusError):
            HttpTransport().get(f"{handle.base_url}/ghost.test/notification.xml")


class TestTimingGuards:
    def test_rate_limited_stream_trips_min_rate(self, state):
        plan = FaultPlan((Fault(pubpoint.RATE_LIMIT, bytes_per_second=2000),))
        handle = srv.serve(state, plan)
        try:
            transport = HttpTransport()
            uri = f"{handle.base_url}/pp.test/{state.session_id}/{state.serial}/snapshot.xml"
            started = time.monotonic()
            with pytest.raises(FetchTooSlow):
                transport.get(uri, FetchLimits(min_rate_bytes_per_second=100000,
                                               min_rate_grace_seconds=0.3))
            elapsed = time.monotonic() - started
            assert 0.24 <= elapsed <= 0.45
        finally:
            handle.shutdown_server()

    def test_timeout_guard(self, state):
        plan = FaultPlan((Fault(pubpoint.RATE_LIMIT, bytes_per_second=2000),))
        handle = srv.serve(state, plan)
        try:
            uri = f"{handle.base_url}/pp.test/{state.session_id}/{state.serial}/snapshot.xml"
            started = time.monotonic()
            with pytest.raises(FetchTimeout):
                HttpTransport().get(uri, FetchLimits(timeout_seconds=0.4))
            assert 0.32 <= time.monotonic() - started <= 0.6
        finally:
            handle.shutdown_server()

    def test_unlimited_read_completes(self, state):
        plan = FaultPlan((Fault(pubpoint.RATE_LIMIT, bytes_per_second=200000),))
        handle = srv.serve(state, plan)
        try:
            uri = f"{handle.base_url}/pp.test/{state.session_id}/{state.serial}/snapshot.xml"
            data = HttpTransport().get(uri, FetchLimits(timeout_seconds=30)).data
            assert b"</snapshot>" in data
        finally:
            handle.shutdown_server()


class TestTlsModes:
    @pytest.mark.parametrize("mode,should_fail", [
        (pubpoint.TLS_VALID, False),
        (pubpoint.TLS_SELF_SIGNED, True),
        (pubpoint.TLS_EXPIRED, True),
    ])
    def test_enforce_vs_ignore(self, state, mode, should_fail):
        plan = FaultPlan((Fault(pubpoint.TLS_CERT, mode=mode),))
        handle = srv.serve(state, plan)
        try:
            transport = HttpTransport(trust_ca_pem=handle.ca_pem)
            uri = handle.notification_uri("pp.test")
            if should_fail:
                with pytest.raises(TlsVerificationError):
                    transport.get(uri, tls_policy="enforce")
                result = transport.get(uri, tls_policy="ignore")
                assert result.tls_warning and b"<notification" in result.data
            else:
                result = transport.get(uri, tls_policy="enforce")
                assert not result.tls_warning
        finally:
            handle.shutdown_server()

    def test_malformed_tls_unusable_either_way(self, state):
        plan = FaultPlan((Fault(pubpoint.TLS_CERT, mode=pubpoint.TLS_MALFORMED),))
        handle = srv.serve(state, plan)
        try:
            transport = HttpTransport()
            with pytest.raises((TlsVerificationError, FetchUnavailable)):
                transport.get(handle.notification_uri("pp.test"), tls_policy="enforce")
            with pytest.raises(FetchUnavailable):
                transport.get(handle.notification_uri("pp.test"), tls_policy="ignore")
        finally:
            handle.shutdown_server()


class TestFileTreeFetchers:
    def test_http_tree(self, served):
        handle, _ = served
        transport = HttpTransport(rsync_map={"pp.test": handle.base_url})
        tree = transport.fetch_tree("rsync://pp.test/repo")
        assert set(tree) == {"rsync://pp.test/repo/a.roa", "rsync://pp.test/repo/b.roa"}

    def test_http_tree_unmapped_host(self, served):
        with pytest.raises(FetchUnavailable):
            HttpTransport().fetch_tree("rsync://pp.test/repo")

    def test_mem_tree(self, state):
        transport = MemTransport()
        transport.mount(Mount(state))
        tree = transport.fetch_tree("rsync://pp.test/repo")
        assert len(tree) == 2


class TestMemTransport:
    def test_parity_with_http(self, state):
        mem = MemTransport()
        mem.mount(Mount(state))
        handle = srv.serve(state)
        try:
            http = HttpTransport()
            mem_notif = mem.get("https://pp.test/notification.xml").data
            http_notif = http.get(handle.notification_uri("pp.test")).data
            # Same content except the endpoint-specific URI prefixes.
            assert mem_notif.count(b"<delta ") == http_notif.count(b"<delta ")
            assert mem_notif.count(b"<snapshot ") == http_notif.count(b"<snapshot ")
        finally:
            handle.shutdown_server()

    def test_status_fault(self, state):
        mem = MemTransport()
        mem.mount(Mount(state, FaultPlan((
            Fault(pubpoint.HTTP_STATUS, code=404, path_pattern="notification"),))))
        with pytest.raises(FetchStatusError):
            mem.get("https://pp.test/notification.xml")

    def test_tls_fault_semantics(self, state):
        mem = MemTransport()
        mem.mount(Mount(state, FaultPlan((
            Fault(pubpoint.TLS_CERT, mode=pubpoint.TLS_SELF_SIGNED),))))
        with pytest.raises(TlsVerificationError):
            mem.get("https://pp.test/notification.xml", tls_policy="enforce")
        result = mem.get("https://pp.test/notification.xml", tls_policy="ignore")
        assert result.tls_warning
