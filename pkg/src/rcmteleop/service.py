"""Live operator session: fixed-rate control loop plus network framing.

One real-time control context (a dedicated thread) owns the simulator state
and ticks at the configured rate on a logical clock (tick index times dt);
wall time only paces the loop, so a recorded session replays bit-exactly.

Network I/O runs on an asyncio thread speaking two framings that carry the
same newline-delimited JSON payloads: a raw TCP stream and a WebSocket
endpoint for browsers.  Commands flow into the loop through a latest-wins
mailbox drained once per tick; telemetry fans out through bounded
subscriber queues that drop old frames rather than stall the loop.

A single operator session is accepted at a time; later connections are
rejected busy.  Disconnecting the operator releases the pedals, so the tool
freezes.
"""

from __future__ import annotations

import asyncio
import json
import os
import threading
import time
from dataclasses import replace

import numpy as np

from . import kernels, protocol, safety
from .config import ConfigError, SessionConfig
from .controller import MIN_PIVOT_ARM
from .protocol import BusyError, CommandHold, ProtocolError, RangeError, TelemetryFrame
from .simulator import ScenarioError, ToolState, Trajectory, derive_frames
from .spatial import RigidTransform

DEFAULT_ENDPOINT = "127.0.0.1:8771"
ENDPOINT_ENV_VAR = "RCMTELEOP_ENDPOINT"

LOG_VERSION = 1


def parse_endpoint(text):
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"endpoint must be host:port, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(f"endpoint port must be an integer, got {port!r}") from None


def default_endpoint():
    return os.environ.get(ENDPOINT_ENV_VAR, DEFAULT_ENDPOINT)


def _quat_wxyz(r):
    """Rotation matrix to wxyz unit quaternion (Shepperd), scalar part >= 0."""
    m00, m01, m02 = r[0, 0], r[0, 1], r[0, 2]
    m10, m11, m12 = r[1, 0], r[1, 1], r[1, 2]
    m20, m21, m22 = r[2, 0], r[2, 1], r[2, 2]
    tr = m00 + m11 + m22
    if tr > 0.0:
        s = 2.0 * np.sqrt(tr + 1.0)
        w, x, y, z = 0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s
    elif m00 > m11 and m00 > m22:
        s = 2.0 * np.sqrt(1.0 + m00 - m11 - m22)
        w, x, y, z = (m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s
    elif m11 > m22:
        s = 2.0 * np.sqrt(1.0 + m11 - m00 - m22)
        w, x, y, z = (m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s
    else:
        s = 2.0 * np.sqrt(1.0 + m22 - m00 - m11)
        w, x, y, z = (m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s
    if w < 0.0:
        return (-w, -x, -y, -z)
    return (w, x, y, z)


class SessionCore:
    """Owns the simulated tool and advances it one tick at a time.

    All mutation happens under one lock, either from tick_once (loop
    thread) or from submit_line (network threads).  Time is logical:
    now = tick * dt.
    """

    def __init__(self, cfg: SessionConfig, log_path=None, record_trajectory=False):
        self.cfg = cfg
        self.dt = 1.0 / cfg.rate
        self._ctl = cfg.controller
        self._geom = cfg.geometry
        self._lock = threading.RLock()

        state0 = ToolState()
        self._r_we = np.ascontiguousarray(state0.world_ee.rotation)
        self._p_we = np.ascontiguousarray(state0.world_ee.translation)
        self._jaw = 0.0
        self._tick = 0
        self._pin = np.ascontiguousarray(
            derive_frames(state0, self._geom).world_rcm.translation
        )

        self._interlock = safety.InterlockState(debounce_window=cfg.debounce_window)
        self._hold = CommandHold(staleness_horizon=cfg.staleness_horizon)
        self._inbox = []
        self._last_seq_received = None
        self._last_seq_applied = -1
        self.deadline_misses = 0
        self._subscribers = []
        self._operator = None

        self._log_fh = None
        if log_path is not None:
            from .config import config_to_dict

            self._log_fh = open(log_path, "w")
            self._log_fh.write(
                json.dumps(
                    {
                        "kind": "session_log",
                        "version": LOG_VERSION,
                        "rate": cfg.rate,
                        "config": config_to_dict(cfg),
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )
        self._record = record_trajectory
        self._rows = [] if record_trajectory else None

    # ----- operator & subscriptions -------------------------------------

    def acquire_operator(self, token):
        with self._lock:
            if self._operator is None:
                self._operator = token
                return True
            return False

    def release_operator(self, token):
        with self._lock:
            if self._operator is token:
                self._operator = None
                self._hold.release_all()

    def subscribe(self, push):
        with self._lock:
            self._subscribers.append(push)

    def unsubscribe(self, push):
        with self._lock:
            if push in self._subscribers:
                self._subscribers.remove(push)

    # ----- command intake ------------------------------------------------

    def submit_line(self, line):
        """Decode and enqueue one command line; returns error-reply bytes
        for malformed input, None when accepted."""
        with self._lock:
            try:
                msg = protocol.decode(line, last_seq=self._last_seq_received)
                self._validate_against_state(msg)
            except ProtocolError as exc:
                return protocol.encode_error(exc)
            self._last_seq_received = msg.seq
            self._inbox.append(msg)
            return None

    def _validate_against_state(self, msg):
        if msg.kind == "set_rcm" and msg.payload > self._geom.shaft_length:
            raise RangeError(
                f"set_rcm offset {msg.payload} exceeds shaft length "
                f"{self._geom.shaft_length}"
            )
        if msg.kind == "set_config" and "r_in_c" in msg.payload:
            try:
                replace(self._ctl, r_in_c=np.asarray(msg.payload["r_in_c"]))
            except ValueError as exc:
                raise RangeError(str(exc)) from None

    def inject(self, msg, check_seq=True):
        """Queue an already-decoded message (replay path)."""
        with self._lock:
            if check_seq and self._last_seq_received is not None:
                if msg.seq <= self._last_seq_received:
                    raise protocol.SequenceError(f"stale seq {msg.seq}")
            self._last_seq_received = msg.seq
            self._inbox.append(msg)

    # ----- control loop ---------------------------------------------------

    def _apply(self, msg, now):
        if msg.kind in ("twist", "gripper", "pedal"):
            self._hold.observe(msg, now)
        elif msg.kind == "set_rcm":
            geom = replace(self._geom, rcm_offset=float(msg.payload))
            state = ToolState(world_ee=RigidTransform(self._r_we, self._p_we))
            self._geom = geom
            self._pin = np.ascontiguousarray(
                derive_frames(state, geom).world_rcm.translation
            )
        elif msg.kind == "set_config":
            fields = dict(msg.payload)
            if "r_in_c" in fields:
                fields["r_in_c"] = np.asarray(fields["r_in_c"], dtype=np.float64)
            self._ctl = replace(self._ctl, **fields)
        self._last_seq_applied = msg.seq

    def tick_once(self) -> TelemetryFrame:
        with self._lock:
            now = self._tick * self.dt
            msgs = self._inbox
            self._inbox = []
            for msg in msgs:
                if self._log_fh is not None:
                    self._log_fh.write(
                        json.dumps(
                            {"tick": self._tick, "msg": msg.to_obj()},
                            separators=(",", ":"),
                        )
                        + "\n"
                    )
                self._apply(msg, now)

            pedals = safety.PedalState(
                left=self._hold.pedals[0], right=self._hold.pedals[1], last_change=now
            )
            self._interlock = safety.update(pedals, now, self._interlock)
            twist = np.asarray(self._hold.effective_twist(now), dtype=np.float64)

            cfg = self.cfg
            (
                r_new,
                p_new,
                jaw_new,
                tip,
                drift,
                clearance,
                cmd,
                gated,
                status,
            ) = kernels.sim_tick(
                self._r_we,
                self._p_we,
                self._pin,
                np.ascontiguousarray(twist[:3]),
                np.ascontiguousarray(twist[3:]),
                self._interlock.enabled,
                self._jaw,
                self._hold.gripper,
                self.dt,
                np.ascontiguousarray(self._geom.ee_to_tip.rotation),
                np.ascontiguousarray(self._geom.ee_to_tip.translation),
                np.ascontiguousarray(self._ctl.r_in_c),
                self._ctl.alpha_t,
                self._ctl.alpha_r,
                self._ctl.gain_k,
                self._ctl.v_max,
                self._ctl.omega_max,
                MIN_PIVOT_ARM,
                cfg.jaw.jaw_max,
                cfg.jaw.rate_limit,
                cfg.channel.point,
                cfg.channel.direction,
                cfg.channel.radius,
                cfg.channel.mouth_position,
                self._geom.shaft_length,
            )
            # On degenerate geometry the tick leaves the pose untouched and
            # commands zero; the session stays up rather than crashing.
            self._r_we = r_new
            self._p_we = p_new
            self._jaw = jaw_new
            self._tick += 1
            t = self._tick * self.dt

            if self._rows is not None:
                self._rows.append(
                    (
                        t,
                        p_new.copy(),
                        r_new.copy(),
                        tip.copy(),
                        drift,
                        jaw_new,
                        clearance,
                        self._interlock.enabled,
                        cmd.copy(),
                        gated.copy(),
                    )
                )

            frame = TelemetryFrame(
                t=t,
                tick=self._tick,
                ee_pos=tuple(p_new),
                ee_quat=_quat_wxyz(r_new),
                tip=tuple(tip),
                jaw=jaw_new,
                rcm_drift=drift,
                clearance=clearance,
                enabled=self._interlock.enabled,
                commanded_twist=tuple(cmd),
                gated_twist=tuple(gated),
                last_seq_applied=self._last_seq_applied,
            )
            if (self._tick % cfg.telemetry_decimation) == 0 and self._subscribers:
                data = protocol.encode_telemetry(frame)
                for push in list(self._subscribers):
                    push(data)
            return frame

    # ----- teardown --------------------------------------------------------

    def close(self) -> Trajectory | None:
        with self._lock:
            if self._log_fh is not None:
                self._log_fh.write(
                    json.dumps(
                        {"kind": "session_end", "ticks": self._tick},
                        separators=(",", ":"),
                    )
                    + "\n"
                )
                self._log_fh.close()
                self._log_fh = None
            if self._rows is None:
                return None
            return self._trajectory()

    def _trajectory(self) -> Trajectory:
        rows = self._rows
        n = len(rows)
        traj = Trajectory(
            rate=self.cfg.rate,
            t=np.array([r[0] for r in rows]),
            ee_pos=np.array([r[1] for r in rows]).reshape(n, 3),
            ee_rot=np.array([r[2] for r in rows]).reshape(n, 3, 3),
            tip=np.array([r[3] for r in rows]).reshape(n, 3),
            rcm_drift=np.array([r[4] for r in rows]),
            jaw=np.array([r[5] for r in rows]),
            clearance=np.array([r[6] for r in rows]),
            enabled=np.array([r[7] for r in rows], dtype=bool),
            cmd_twist=np.array([r[8] for r in rows]).reshape(n, 6),
            gated_twist=np.array([r[9] for r in rows]).reshape(n, 6),
            pin=self._pin.copy(),
        )
        return traj


def _parse_log(log_path):
    header = None
    entries = []
    end_tick = None
    with open(log_path) as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{log_path}:{lineno + 1}: invalid log line: {exc}")
            if obj.get("kind") == "session_log":
                header = obj
            elif obj.get("kind") == "session_end":
                end_tick = int(obj["ticks"])
            else:
                entries.append((int(obj["tick"]), obj["msg"]))
    if header is None:
        raise ScenarioError(f"{log_path} is not a session log (missing header)")
    return header, entries, end_tick


def read_log_config(log_path) -> SessionConfig | None:
    """Session config embedded in a command log, if any."""
    from .config import config_from_dict

    header, _, _ = _parse_log(log_path)
    if "config" not in header:
        return None
    return config_from_dict(header["config"])


def replay_log(log_path, cfg: SessionConfig | None = None) -> Trajectory:
    """Re-run a recorded command log through a fresh session.

    The log pins every message to the tick at which the live loop drained
    it, and the loop runs on a logical clock, so the result is bit-identical
    to the live session that produced it.  With cfg=None the config embedded
    in the log header is used; a supplied config must keep the recorded
    rate (ticks are rate-bound).
    """
    header, entries, end_tick = _parse_log(log_path)
    if cfg is None:
        cfg = read_log_config(log_path)
        if cfg is None:
            raise ScenarioError(f"{log_path} carries no embedded config; pass one")
    if header.get("rate") != cfg.rate:
        raise ConfigError(
            f"log was recorded at {header.get('rate')} Hz but config says {cfg.rate} Hz"
        )
    if end_tick is None:
        end_tick = max((t for t, _ in entries), default=-1) + 1

    core = SessionCore(cfg, record_trajectory=True)
    pending = sorted(entries, key=lambda e: e[0])
    idx = 0
    for tick in range(end_tick):
        while idx < len(pending) and pending[idx][0] == tick:
            msg = protocol.decode(json.dumps(pending[idx][1]))
            core.inject(msg, check_seq=False)
            idx += 1
        core.tick_once()
    traj = core.close()
    return traj


class TeleopService:
    """Runs the control loop thread plus TCP and WebSocket listeners.

    start() blocks until both listeners are bound (request port 0 to let the
    OS pick); stop() shuts everything down and returns the recorded
    trajectory when recording was enabled.
    """

    def __init__(
        self,
        cfg: SessionConfig,
        host="127.0.0.1",
        port=8771,
        ws_port=None,
        log_path=None,
        record_trajectory=False,
    ):
        self.core = SessionCore(cfg, log_path=log_path, record_trajectory=record_trajectory)
        self._host = host
        self._port = port
        self._ws_port = ws_port if ws_port is not None else (port + 1 if port else 0)
        self._stop = threading.Event()
        self._loop_thread = None
        self._aio_thread = None
        self._aio_loop = None
        self._ready = threading.Event()
        self._aio_error = None
        self.tcp_address = None
        self.ws_address = None

    # control loop ---------------------------------------------------------

    def _run_loop(self):
        dt = self.core.dt
        deadline = time.perf_counter() + dt
        while not self._stop.is_set():
            self.core.tick_once()
            deadline += dt
            delay = deadline - time.perf_counter()
            if delay > 0.0:
                time.sleep(delay)
            else:
                self.core.deadline_misses += 1
                if delay < -0.1:
                    # fell far behind (suspended?); resync instead of spiraling
                    deadline = time.perf_counter()

    # network --------------------------------------------------------------

    async def _client_session(self, send, recv, peer):
        """Shared per-connection logic for both framings.

        send(bytes) transmits one frame; recv() yields one line (bytes or
        str) or None at EOF.
        """
        token = object()
        core = self.core
        if not core.acquire_operator(token):
            await send(protocol.encode_error(BusyError("another operator session is active")))
            return
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue(maxsize=64)

        def push(data):
            def offer():
                if queue.full():
                    try:
                        queue.get_nowait()
                    except asyncio.QueueEmpty:
                        pass
                queue.put_nowait(data)

            loop.call_soon_threadsafe(offer)

        core.subscribe(push)

        async def sender():
            while True:
                data = await queue.get()
                await send(data)

        sender_task = asyncio.create_task(sender())
        try:
            while True:
                line = await recv()
                if line is None:
                    break
                reply = core.submit_line(line)
                if reply is not None:
                    await send(reply)
        finally:
            sender_task.cancel()
            core.unsubscribe(push)
            core.release_operator(token)

    async def _handle_tcp(self, reader, writer):
        async def send(data):
            writer.write(data)
            await writer.drain()

        async def recv():
            line = await reader.readline()
            return line if line else None

        try:
            await self._client_session(send, recv, writer.get_extra_info("peername"))
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass

    async def _handle_ws(self, websocket):
        import websockets

        recv_iter = aiter(websocket)

        async def send(data):
            await websocket.send(data.decode("utf-8"))

        async def recv():
            try:
                return await anext(recv_iter)
            except (StopAsyncIteration, websockets.ConnectionClosed):
                return None

        await self._client_session(send, recv, websocket.remote_address)

    async def _serve_async(self):
        import websockets

        tcp_server = await asyncio.start_server(self._handle_tcp, self._host, self._port)
        self.tcp_address = tcp_server.sockets[0].getsockname()[:2]
        ws_server = await websockets.serve(self._handle_ws, self._host, self._ws_port)
        self.ws_address = ws_server.sockets[0].getsockname()[:2]
        self._ready.set()
        try:
            await asyncio.Future()
        except asyncio.CancelledError:
            pass
        finally:
            tcp_server.close()
            ws_server.close(close_connections=True)
            await tcp_server.wait_closed()
            await ws_server.wait_closed()
            # unwind per-connection tasks before the loop closes
            pending = [t for t in asyncio.all_tasks() if t is not asyncio.current_task()]
            for task in pending:
                task.cancel()
            await asyncio.gather(*pending, return_exceptions=True)

    def _run_aio(self):
        loop = asyncio.new_event_loop()
        self._aio_loop = loop
        asyncio.set_event_loop(loop)
        self._aio_task = loop.create_task(self._serve_async())
        try:
            loop.run_until_complete(self._aio_task)
        except Exception as exc:  # bind failures etc.
            self._aio_error = exc
            self._ready.set()
        finally:
            loop.close()

    # lifecycle --------------------------------------------------------------

    def start(self):
        self._aio_thread = threading.Thread(target=self._run_aio, daemon=True)
        self._aio_thread.start()
        self._ready.wait(timeout=10.0)
        if self._aio_error is not None:
            raise self._aio_error
        self._loop_thread = threading.Thread(target=self._run_loop, daemon=True)
        self._loop_thread.start()
        return self

    def stop(self):
        self._stop.set()
        if self._loop_thread is not None:
            self._loop_thread.join(timeout=5.0)
        if self._aio_loop is not None and self._aio_loop.is_running():
            self._aio_loop.call_soon_threadsafe(self._aio_task.cancel)
        if self._aio_thread is not None:
            self._aio_thread.join(timeout=5.0)
        return self.core.close()


def serve(cfg, endpoint=None, ws_port=None, log_path=None, trajectory_out=None):
    """Run the service until interrupted; returns the process exit code."""
    host, port = parse_endpoint(endpoint or default_endpoint())
    svc = TeleopService(
        cfg,
        host=host,
        port=port,
        ws_port=ws_port,
        log_path=log_path,
        record_trajectory=trajectory_out is not None,
    )
    svc.start()
    print(f"listening on tcp://{svc.tcp_address[0]}:{svc.tcp_address[1]} "
          f"and ws://{svc.ws_address[0]}:{svc.ws_address[1]}")
    try:
        while True:
            time.sleep(0.25)
    except KeyboardInterrupt:
        pass
    finally:
        traj = svc.stop()
        if trajectory_out is not None and traj is not None:
            traj.write_csv(trajectory_out)
            print(f"wrote {len(traj)} ticks to {trajectory_out}")
    return 0
