import pytest
from hypothesis import given, settings, strategies as st

from faultline import pubpoint, rrdpclient
from faultline.pubpoint import (
    EMPTY_PLAN,
    Fault,
    FaultPlan,
    RepositoryState,
    SerialOutOfRange,
    UnknownUri,
    delta_xml,
    notification_xml,
    sha256_hex,
    snapshot_xml,
)

SESSION = "11111111-2222-3333-4444-555555555555"


def _state():
    return RepositoryState.fresh("pp.test", SESSION)


class TestStateMachine:
    def test_publish_to_empty(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A")
        assert state.serial == 1
        assert state.get("rsync://pp.test/repo/a") == b"A"
        assert len(state.delta_log) == 1
        assert state.delta_log[0].entries[0].kind == pubpoint.PUBLISH
        assert state.delta_log[0].entries[0].hash is None

    def test_replacement_carries_previous_hash(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A")
        state = state.publish("rsync://pp.test/repo/a", b"B")
        entry = state.delta_log[1].entries[0]
        assert entry.hash == sha256_hex(b"A")

    def test_withdraw(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A").withdraw("rsync://pp.test/repo/a")
        assert state.serial == 2
        assert state.objects == ()
        assert state.delta_log[1].entries[0].kind == pubpoint.WITHDRAW
        assert state.delta_log[1].entries[0].hash == sha256_hex(b"A")

    def test_withdraw_unknown(self):
        with pytest.raises(UnknownUri):
            _state().withdraw("rsync://pp.test/repo/nope")

    def test_serials_contiguous_over_500_publishes(self):
        state = _state()
        for i in range(500):
            state = state.publish(f"rsync://pp.test/repo/{i}", bytes([i % 256]))
        assert [r.serial for r in state.delta_log] == list(range(1, 501))

    def test_session_reset(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A")
        reset = state.reset_session("99999999-8888-7777-6666-555555555555")
        assert reset.serial == 1
        assert reset.delta_log == ()
        assert reset.get("rsync://pp.test/repo/a") == b"A"

    def test_delta_out_of_range(self):
        with pytest.raises(SerialOutOfRange):
            _state().publish("rsync://pp.test/repo/a", b"A").delta(7)


class TestXml:
    def test_fresh_notification_lists_one_snapshot_no_missing_deltas(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A")
        parsed = rrdpclient.parse_notification(notification_xml(state, EMPTY_PLAN))
        assert parsed.session_id == SESSION
        assert len(parsed.snapshots) == 1
        assert parsed.namespace == pubpoint.RRDP_NS
        assert parsed.version == "1"

    def test_hashes_match_served_files(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A" * 100)
        state = state.publish("rsync://pp.test/repo/b", b"B")
        parsed = rrdpclient.parse_notification(notification_xml(state))
        snap_uri, snap_hash = parsed.snapshots[0]
        assert sha256_hex(snapshot_xml(state)) == snap_hash
        for serial, _, digest in parsed.deltas:
            assert sha256_hex(delta_xml(state, serial)) == digest

    def test_broken_delta_hash_fault(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A")
        plan = FaultPlan((Fault(pubpoint.BROKEN_DELTA_HASH, serial=1),))
        parsed = rrdpclient.parse_notification(notification_xml(state, plan))
        digest = parsed.deltas[0][2]
        assert len(digest) == 64
        assert digest != sha256_hex(delta_xml(state, 1, plan))

    def test_multiple_snapshot_entries_fault(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A")
        plan = FaultPlan((Fault(pubpoint.MULTIPLE_SNAPSHOT_ENTRIES),))
        parsed = rrdpclient.parse_notification(notification_xml(state, plan))
        assert len(parsed.snapshots) == 2

    def test_wrong_namespace_fault_omits_namespace(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A")
        plan = FaultPlan((Fault(pubpoint.WRONG_XML_NAMESPACE),))
        parsed = rrdpclient.parse_notification(notification_xml(state, plan))
        assert parsed.namespace is None

    def test_duplicate_delta_entry_fault(self):
        state = _state().publish("rsync://pp.test/repo/a", b"A")
        plan = FaultPlan((Fault(pubpoint.DUPLICATE_DELTA_ENTRY, serial=1,
                                uri="rsync://pp.test/repo/a"),))
        _, _, entries = rrdpclient.parse_delta(delta_xml(state, 1, plan))
        assert len(entries) == 2
        assert entries[0] == entries[1]

    def test_xml_is_pure_ascii_by_default(self):
        state = _state().publish("rsync://pp.test/repo/a", bytes(range(256)))
        for data in (notification_xml(state), snapshot_xml(state), delta_xml(state, 1)):
            assert all(b <= 0x7F for b in data)


class TestSnapshotDeltaEquivalence:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.booleans(), st.binary(max_size=12)),
                    min_size=1, max_size=24))
    def test_replaying_deltas_equals_snapshot(self, ops):
        """Applying deltas 1..N to an empty cache reproduces snapshot N."""
        state = _state()
        for key, withdraw, data in ops:
            uri = f"rsync://pp.test/repo/{key}"
            if withdraw and state.get(uri) is not None:
                state = state.withdraw(uri)
            else:
                state = state.publish(uri, data)
        replay = {}
        for record in state.delta_log:
            _, _, entries = rrdpclient.parse_delta(delta_xml(state, record.serial))
            for entry in entries:
                if entry.kind == "publish":
                    replay[entry.uri] = entry.data
                else:
                    replay.pop(entry.uri, None)
        _, _, from_snapshot = rrdpclient.parse_snapshot(snapshot_xml(state))
        assert replay == from_snapshot


class TestFaultPlan:
    def test_json_round_trip(self):
        plan = FaultPlan((
            Fault(pubpoint.HTTP_STATUS, code=503, path_pattern="notification"),
            Fault(pubpoint.RATE_LIMIT, bytes_per_second=100),
            Fault(pubpoint.TLS_CERT, mode=pubpoint.TLS_EXPIRED, wildcard_dns=True),
        ))
        again = FaultPlan.from_json(plan.to_json())
        assert again == plan

    def test_at_most_one_rate_limit(self):
        with pytest.raises(ValueError):
            FaultPlan((Fault(pubpoint.RATE_LIMIT, bytes_per_second=1),
                       Fault(pubpoint.RATE_LIMIT, bytes_per_second=2)))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Fault("nonsense")
