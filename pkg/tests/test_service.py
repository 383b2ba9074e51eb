import json
import socket
import time
from dataclasses import replace

import numpy as np
import pytest

from rcmteleop.config import ConfigError, default_config
from rcmteleop.protocol import CommandMessage, encode
from rcmteleop.service import SessionCore, TeleopService, parse_endpoint, replay_log


def make_cfg(rate=250.0, decimation=1, debounce=0.02):
    cfg = default_config()
    return replace(
        cfg, rate=rate, telemetry_decimation=decimation, debounce_window=debounce
    )


def line(kind, seq, payload):
    return encode(CommandMessage(kind, seq, float(seq), payload))


class TestSessionCore:
    def test_motion_starts_only_after_debounce(self):
        cfg = make_cfg(rate=500.0, debounce=0.02)  # 10 ticks of debounce
        core = SessionCore(cfg)
        assert core.submit_line(line("pedal", 0, (True, True))) is None
        assert core.submit_line(line("twist", 1, (0.1, 0, 0, 0, 0, 0))) is None
        frames = [core.tick_once() for _ in range(30)]
        enabled_at = next(i for i, f in enumerate(frames) if f.enabled)
        assert enabled_at == 10
        for f in frames[:enabled_at]:
            assert f.gated_twist == (0.0,) * 6
        assert frames[-1].ee_pos[0] > 0.0
        assert frames[-1].last_seq_applied == 1

    def test_stale_seq_rejected_and_session_continues(self):
        core = SessionCore(make_cfg())
        assert core.submit_line(line("gripper", 5, 0.5)) is None
        reply = core.submit_line(line("gripper", 5, 0.9))
        assert json.loads(reply)["code"] == "sequence"
        reply = core.submit_line(line("gripper", 4, 0.9))
        assert json.loads(reply)["code"] == "sequence"
        frame = core.tick_once()
        assert frame.last_seq_applied == 5
        assert core.submit_line(line("gripper", 6, 1.0)) is None

    def test_malformed_line_reply(self):
        core = SessionCore(make_cfg())
        reply = core.submit_line(b"{broken\n")
        assert json.loads(reply)["code"] == "syntax"
        reply = core.submit_line(b'{"kind":"gripper","seq":0,"t_client":0,"payload":2}\n')
        assert json.loads(reply)["code"] == "range"
        assert core.tick_once().last_seq_applied == -1

    def test_safety_dominance_fuzz(self):
        rng = np.random.default_rng(70)
        core = SessionCore(make_cfg(rate=500.0))
        seq = 0
        for _ in range(3000):
            if rng.random() < 0.05:
                core.submit_line(
                    line("pedal", seq, (bool(rng.integers(2)), bool(rng.integers(2))))
                )
                seq += 1
            if rng.random() < 0.3:
                core.submit_line(
                    line("twist", seq, tuple(float(v) for v in rng.uniform(-0.2, 0.2, 6)))
                )
                seq += 1
            frame = core.tick_once()
            if not frame.enabled:
                assert frame.gated_twist == (0.0,) * 6

    def test_staleness_decay_stops_motion(self):
        cfg = make_cfg(rate=500.0, debounce=0.002)
        core = SessionCore(cfg)
        core.submit_line(line("pedal", 0, (True, True)))
        core.submit_line(line("twist", 1, (0.1, 0, 0, 0, 0, 0)))
        # staleness horizon 0.2 s = 100 ticks at 500 Hz
        frames = [core.tick_once() for _ in range(120)]
        moving = [np.linalg.norm(f.gated_twist[:3]) > 0 for f in frames]
        assert any(moving[:100])
        assert not any(moving[102:])

    def test_set_config_applies_on_tick(self):
        cfg = make_cfg(rate=500.0, debounce=0.0)
        core = SessionCore(cfg)
        core.submit_line(line("pedal", 0, (True, True)))
        core.submit_line(line("twist", 1, (0.0, 0.1, 0, 0, 0, 0)))
        f1 = core.tick_once()
        base = np.linalg.norm(np.asarray(f1.commanded_twist)[3:])
        core.submit_line(line("set_config", 2, {"alpha_t": cfg.controller.alpha_t * 2}))
        core.submit_line(line("twist", 3, (0.0, 0.1, 0, 0, 0, 0)))
        f2 = core.tick_once()
        doubled = np.linalg.norm(np.asarray(f2.commanded_twist)[3:])
        assert doubled == pytest.approx(2.0 * base, rel=1e-6)

    def test_set_rcm_repins_at_current_pose(self):
        cfg = make_cfg(rate=500.0, debounce=0.0)
        core = SessionCore(cfg)
        core.submit_line(line("pedal", 0, (True, True)))
        core.submit_line(line("twist", 1, (0.2, 0, 0, 0, 0, 0)))  # insert along x
        for _ in range(200):
            core.tick_once()
        core.submit_line(line("twist", 2, (0.0,) * 6))
        core.submit_line(line("set_rcm", 3, 0.10))
        frame = core.tick_once()
        assert frame.rcm_drift < 1e-9  # fresh pin sits on the shaft

    def test_set_rcm_beyond_shaft_rejected(self):
        core = SessionCore(make_cfg())
        reply = core.submit_line(line("set_rcm", 0, 0.5))
        assert json.loads(reply)["code"] == "range"

    def test_operator_slot(self):
        core = SessionCore(make_cfg())
        a, b = object(), object()
        assert core.acquire_operator(a)
        assert not core.acquire_operator(b)
        core.release_operator(a)
        assert core.acquire_operator(b)

    def test_operator_release_drops_pedals(self):
        cfg = make_cfg(rate=500.0, debounce=0.0)
        core = SessionCore(cfg)
        token = object()
        core.acquire_operator(token)
        core.submit_line(line("pedal", 0, (True, True)))
        core.submit_line(line("twist", 1, (0.1, 0, 0, 0, 0, 0)))
        assert core.tick_once().enabled
        core.release_operator(token)
        frame = core.tick_once()
        assert not frame.enabled
        assert frame.gated_twist == (0.0,) * 6


class TestRecordReplay:
    def run_scripted_session(self, cfg, log_path):
        core = SessionCore(cfg, log_path=str(log_path), record_trajectory=True)
        rng = np.random.default_rng(71)
        seq = 0
        schedule = {}
        for tick in range(0, 900, 30):
            msgs = []
            if tick == 0:
                msgs.append(line("pedal", seq, (True, True)))
                seq += 1
            msgs.append(
                line("twist", seq, tuple(float(v) for v in rng.uniform(-0.15, 0.15, 6)))
            )
            seq += 1
            if tick % 120 == 0:
                msgs.append(line("gripper", seq, float(rng.uniform(0, 1))))
                seq += 1
            schedule[tick] = msgs
        for tick in range(1000):
            for msg in schedule.get(tick, ()):
                assert core.submit_line(msg) is None
            core.tick_once()
        return core.close()

    def test_replay_matches_live_bit_for_bit(self, tmp_path):
        cfg = make_cfg(rate=500.0)
        log = tmp_path / "session.ndjson"
        live = self.run_scripted_session(cfg, log)
        live_csv = tmp_path / "live.csv"
        live.write_csv(live_csv)

        for name in ("r1.csv", "r2.csv"):
            replay_log(log, cfg).write_csv(tmp_path / name)
        r1 = (tmp_path / "r1.csv").read_bytes()
        r2 = (tmp_path / "r2.csv").read_bytes()
        assert r1 == r2
        assert r1 == live_csv.read_bytes()

    def test_replay_rejects_rate_mismatch(self, tmp_path):
        cfg = make_cfg(rate=500.0)
        log = tmp_path / "session.ndjson"
        self.run_scripted_session(cfg, log)
        with pytest.raises(ConfigError, match="Hz"):
            replay_log(log, make_cfg(rate=250.0))


def read_json_lines(fh, want, timeout=5.0, predicate=None):
    """Collect `want` parsed objects (matching predicate) from a socket file."""
    out = []
    deadline = time.time() + timeout
    while len(out) < want and time.time() < deadline:
        raw = fh.readline()
        if not raw:
            break
        obj = json.loads(raw)
        if predicate is None or predicate(obj):
            out.append(obj)
    return out


class TestLiveService:
    def test_tcp_session_end_to_end(self):
        cfg = make_cfg(rate=200.0, decimation=2, debounce=0.02)
        svc = TeleopService(cfg, host="127.0.0.1", port=0, ws_port=0)
        svc.start()
        try:
            host, port = svc.tcp_address
            with socket.create_connection((host, port), timeout=5) as sock:
                sock.settimeout(5.0)
                fh = sock.makefile("rwb")
                seq = 0

                def send(kind, payload):
                    nonlocal seq
                    fh.write(encode(CommandMessage(kind, seq, time.time() * 1e3, payload)))
                    fh.flush()
                    seq += 1

                send("pedal", (True, True))
                telem = lambda o: o["kind"] == "telemetry"
                for _ in range(8):  # ~0.8 s of motion, refreshing staleness
                    send("twist", (0.2, 0.0, 0.0, 0.0, 0.0, 0.0))
                    frames = read_json_lines(fh, 10, predicate=telem)
                    assert frames
                assert frames[-1]["enabled"]
                assert frames[-1]["ee_pos"][0] > 1e-4
                assert frames[-1]["last_seq_applied"] >= 1

                # malformed line: typed error reply, telemetry keeps flowing
                fh.write(b"this is not json\n")
                fh.flush()
                errors = read_json_lines(fh, 1, predicate=lambda o: o["kind"] == "error")
                assert errors and errors[0]["code"] == "syntax"

                # pedal release freezes motion within a tick
                send("pedal", (False, False))
                time.sleep(0.1)
                frames = read_json_lines(fh, 6, predicate=telem)
                tail = frames[-1]
                assert tail["enabled"] is False
                assert tail["gated_twist"] == [0.0] * 6
        finally:
            svc.stop()

    def test_second_operator_rejected_busy(self):
        cfg = make_cfg(rate=200.0)
        svc = TeleopService(cfg, host="127.0.0.1", port=0, ws_port=0)
        svc.start()
        try:
            host, port = svc.tcp_address
            with socket.create_connection((host, port), timeout=5) as first:
                first.settimeout(5.0)
                with socket.create_connection((host, port), timeout=5) as second:
                    second.settimeout(5.0)
                    fh = second.makefile("rb")
                    obj = json.loads(fh.readline())
                    assert obj["kind"] == "error"
                    assert obj["code"] == "busy"
            # first disconnected: the slot frees up
            time.sleep(0.2)
            with socket.create_connection((host, port), timeout=5) as third:
                third.settimeout(5.0)
                fh = third.makefile("rwb")
                fh.write(line("pedal", 0, (True, True)))
                fh.flush()
                frames = read_json_lines(fh, 3, predicate=lambda o: o["kind"] == "telemetry")
                assert frames
        finally:
            svc.stop()

    def test_websocket_session(self):
        from websockets.sync.client import connect

        cfg = make_cfg(rate=200.0, decimation=2, debounce=0.0)
        svc = TeleopService(cfg, host="127.0.0.1", port=0, ws_port=0)
        svc.start()
        try:
            host, port = svc.ws_address
            with connect(f"ws://{host}:{port}", open_timeout=5) as ws:
                ws.send(line("pedal", 0, (True, True)).decode())
                ws.send(line("twist", 1, (0.2, 0, 0, 0, 0, 0)).decode())
                frames = []
                while len(frames) < 10:
                    obj = json.loads(ws.recv(timeout=5))
                    if obj["kind"] == "telemetry":
                        frames.append(obj)
                assert frames[-1]["ee_pos"][0] > 0.0
                ws.send(line("pedal", 2, (False, True)).decode())
                for _ in range(6):
                    obj = json.loads(ws.recv(timeout=5))
                assert obj["kind"] == "telemetry" and obj["enabled"] is False
        finally:
            svc.stop()

    def test_loop_keeps_up_softly(self):
        cfg = make_cfg(rate=250.0, decimation=5)
        svc = TeleopService(cfg, host="127.0.0.1", port=0, ws_port=0)
        svc.start()
        try:
            time.sleep(2.0)
            ticks = svc.core._tick
            assert ticks > 250  # at least half the nominal 500
            assert svc.core.deadline_misses < 0.2 * ticks
        finally:
            svc.stop()


def test_parse_endpoint():
    assert parse_endpoint("127.0.0.1:8771") == ("127.0.0.1", 8771)
    assert parse_endpoint("[::1]:99") == ("[::1]", 99)
    with pytest.raises(ConfigError):
        parse_endpoint("no-port")
    with pytest.raises(ConfigError):
        parse_endpoint("host:notaport")
