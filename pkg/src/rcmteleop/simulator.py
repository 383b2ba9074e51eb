"""Kinematic stand-in for the robot arm carrying the forceps tool.

The robot is modeled as an ideal Cartesian velocity follower: commanded
end-effector twists are integrated directly, with no joint limits or
dynamics.  On top of that sit the jaw actuation model, the laryngoscope
channel geometry (advisory clearance only, never blocking), synthetic
band-limited operator tremor, and the scripted-scenario runner.

Scenario runs have two engines producing the same trajectory:

- "kernel": per-tick inputs are precomputed as arrays and the whole loop
  runs inside kernels.sim_run (numba-compiled unless disabled)
- "reference": a plain python loop over the spatial/controller/safety
  module functions, kept as the readable ground truth the kernel is tested
  against
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .controller import (
    MIN_PIVOT_ARM,
    ControllerConfig,
    DegenerateGeometryError,
    FrameSet,
    ToolGeometry,
)
from .spatial import RigidTransform, Twist, check_vec3, integrate_pose

TREMOR_COMPONENTS = 8

TRAJECTORY_COLUMNS = (
    "t",
    "ee_x",
    "ee_y",
    "ee_z",
    "ee_qw",
    "ee_qx",
    "ee_qy",
    "ee_qz",
    "tip_x",
    "tip_y",
    "tip_z",
    "rcm_drift_m",
    "jaw_rad",
    "clearance_m",
    "enabled",
)


class ScenarioError(ValueError):
    """Scenario file or script is invalid."""


@dataclass(frozen=True)
class ToolState:
    """World pose of the end-effector plus jaw state and elapsed time."""

    world_ee: RigidTransform = field(default_factory=RigidTransform.identity)
    jaw_angle: float = 0.0
    jaw_target: float = 0.0
    time: float = 0.0


@dataclass(frozen=True)
class JawModel:
    """Rate-limited jaw actuation; torque limit is informational."""

    jaw_max: float = 0.5
    rate_limit: float = 2.0
    torque_limit: float = 0.5

    def __post_init__(self):
        for name in ("jaw_max", "rate_limit", "torque_limit"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class LaryngoscopeChannel:
    """Straight tubular channel: axis line, bore radius, and mouth station.

    The tube occupies axial stations >= mouth_position along the (unit)
    direction measured from the axis point; the pivot is normally pinned at
    the mouth.
    """

    point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    radius: float = 0.009
    mouth_position: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "point", check_vec3(self.point, "channel point"))
        d = check_vec3(self.direction, "channel direction")
        n = np.linalg.norm(d)
        if n < 1e-12:
            raise ValueError("channel direction must be nonzero")
        object.__setattr__(self, "direction", d / n)
        if self.radius <= 0.0:
            raise ValueError("channel radius must be positive")


@dataclass(frozen=True)
class TremorModel:
    """Seeded band-limited velocity noise standing in for hand tremor.

    The noise on each linear axis is a sum of TREMOR_COMPONENTS sinusoids
    uniformly spread over the band with seeded random phases, normalized so
    ``amplitude`` is the per-axis RMS (m/s).  Deterministic for a fixed seed.
    """

    amplitude: float = 0.0
    band: tuple = (6.0, 12.0)
    seed: int = 0

    def __post_init__(self):
        low, high = self.band
        if not (0.0 <= low < high):
            raise ValueError(f"band must satisfy 0 <= low < high, got {self.band}")
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be nonnegative")
        object.__setattr__(self, "band", (float(low), float(high)))

    def frequencies(self):
        low, high = self.band
        k = np.arange(TREMOR_COMPONENTS)
        return low + (k + 0.5) * (high - low) / TREMOR_COMPONENTS

    def phases(self):
        rng = np.random.default_rng(self.seed)
        return rng.uniform(0.0, 2.0 * np.pi, (TREMOR_COMPONENTS, 3))


@dataclass(frozen=True)
class ScriptEvent:
    """One timestamped command: twist (6,), gripper [0,1], or pedal flags."""

    t: float
    kind: str
    value: object

    def __post_init__(self):
        if self.t < 0.0:
            raise ScenarioError(f"event time must be nonnegative, got {self.t}")
        if self.kind == "twist":
            arr = np.asarray(self.value, dtype=np.float64)
            if arr.shape != (6,) or not np.all(np.isfinite(arr)):
                raise ScenarioError("twist event needs 6 finite values")
            object.__setattr__(self, "value", arr)
        elif self.kind == "gripper":
            v = float(self.value)
            if not (0.0 <= v <= 1.0):
                raise ScenarioError(f"gripper command must be in [0, 1], got {v}")
            object.__setattr__(self, "value", v)
        elif self.kind == "pedal":
            left, right = self.value
            object.__setattr__(self, "value", (bool(left), bool(right)))
        else:
            raise ScenarioError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    """Fixed-rate scripted run: duration, command script, tremor, seeds."""

    name: str = "scenario"
    duration: float = 1.0
    rate: float = 1000.0
    seed: int = 0
    events: tuple = ()
    tremor: TremorModel = field(default_factory=TremorModel)
    rcm_offset: float | None = None
    initial_pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ScenarioError(f"duration must be positive, got {self.duration}")
        if not (100.0 <= self.rate <= 2000.0):
            raise ScenarioError(f"rate must be in [100, 2000] Hz, got {self.rate}")
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def ticks(self):
        return int(round(self.duration * self.rate))


def apply_twist(state: ToolState, tw_ee: Twist, dt: float) -> ToolState:
    """Advance the end-effector pose by one body-frame twist tick."""
    return replace(
        state,
        world_ee=integrate_pose(state.world_ee, tw_ee, dt),
        time=state.time + dt,
    )


def derive_frames(state: ToolState, geom: ToolGeometry, rcm_offset=None) -> FrameSet:
    """Nominal frame set with the pivot placed on the current shaft.

    The tip frame sits at the mount transform, the pivot frame rcm_offset
    back along the shaft x-axis, and the application frame coincident with
    the pivot.  Used when the operator (re)pins the pivot.
    """
    offset = geom.rcm_offset if rcm_offset is None else float(rcm_offset)
    if not (0.0 <= offset <= geom.shaft_length):
        raise ValueError(
            f"rcm_offset must be in [0, shaft_length={geom.shaft_length}], got {offset}"
        )
    world_f = RigidTransform(
        state.world_ee.rotation @ geom.ee_to_tip.rotation,
        state.world_ee.translation + state.world_ee.rotation @ geom.ee_to_tip.translation,
    )
    pivot = RigidTransform(world_f.rotation, world_f.translation - offset * world_f.x_axis)
    return FrameSet(world_c=pivot, world_f=world_f, world_rcm=pivot, world_ee=state.world_ee)


def frames_from_pin(state: ToolState, geom: ToolGeometry, pin: RigidTransform) -> FrameSet:
    """Closed-loop frame set against a world-pinned pivot.

    The pivot keeps the pose captured at engagement; the application frame
    rides the current shaft at the pivot's axial station (the shaft point
    nearest the pivot), so its lateral offset from the pivot is exactly the
    drift the controller corrects.
    """
    world_f = RigidTransform(
        state.world_ee.rotation @ geom.ee_to_tip.rotation,
        state.world_ee.translation + state.world_ee.rotation @ geom.ee_to_tip.translation,
    )
    axial = float(np.dot(pin.translation - world_f.translation, world_f.x_axis))
    world_c = RigidTransform(world_f.rotation, world_f.translation + axial * world_f.x_axis)
    return FrameSet(world_c=world_c, world_f=world_f, world_rcm=pin, world_ee=state.world_ee)


def jaw_step(state: ToolState, model: JawModel, command: float, dt: float) -> ToolState:
    """Move the jaw toward the commanded opening, rate-limited."""
    if not (0.0 <= command <= 1.0):
        raise ValueError(f"jaw command must be in [0, 1], got {command}")
    target = command * model.jaw_max
    delta = np.clip(target - state.jaw_angle, -model.rate_limit * dt, model.rate_limit * dt)
    return replace(state, jaw_angle=state.jaw_angle + float(delta), jaw_target=target)


def channel_clearance(state: ToolState, geom: ToolGeometry, ch: LaryngoscopeChannel) -> float:
    """Bore radius minus the worst radial deviation of the inserted shaft.

    Negative means the shaft touches or crosses the channel wall.  Advisory
    only: reported in telemetry, never blocks motion.
    """
    world_f = RigidTransform(
        state.world_ee.rotation @ geom.ee_to_tip.rotation,
        state.world_ee.translation + state.world_ee.rotation @ geom.ee_to_tip.translation,
    )
    return float(
        kernels.shaft_clearance(
            world_f.translation,
            np.ascontiguousarray(world_f.x_axis),
            geom.shaft_length,
            ch.point,
            ch.direction,
            ch.radius,
            ch.mouth_position,
        )
    )


def tremor_velocity(model: TremorModel, t):
    """Per-axis tremor velocity at time(s) t; shape (3,) or (len(t), 3)."""
    t = np.asarray(t, dtype=np.float64)
    if model.amplitude == 0.0:
        return np.zeros(t.shape + (3,))
    amp = model.amplitude * np.sqrt(2.0 / TREMOR_COMPONENTS)
    freqs = model.frequencies()
    phases = model.phases()
    arg = 2.0 * np.pi * np.multiply.outer(t, freqs)
    noise = np.empty(t.shape + (3,))
    for axis in range(3):
        noise[..., axis] = amp * np.sin(arg + phases[:, axis]).sum(axis=-1)
    return noise


def inject_tremor(tw: Twist, model: TremorModel, t: float) -> Twist:
    """Add the seeded tremor velocity onto the twist's linear part."""
    if model.amplitude == 0.0:
        return tw
    return Twist(tw.linear + tremor_velocity(model, float(t)), tw.angular)


@dataclass(frozen=True)
class Trajectory:
    """Columnar per-tick record of one run; the ee rotation is kept as
    matrices and serialized as wxyz unit quaternions."""

    rate: float
    t: np.ndarray
    ee_pos: np.ndarray
    ee_rot: np.ndarray
    tip: np.ndarray
    rcm_drift: np.ndarray
    jaw: np.ndarray
    clearance: np.ndarray
    enabled: np.ndarray
    cmd_twist: np.ndarray
    gated_twist: np.ndarray
    pin: np.ndarray

    def __len__(self):
        return len(self.t)

    def ee_quat(self):
        """(n, 4) wxyz unit quaternions with nonnegative scalar part."""
        from scipy.spatial.transform import Rotation

        if len(self.t) == 0:
            return np.zeros((0, 4))
        xyzw = Rotation.from_matrix(self.ee_rot).as_quat()
        wxyz = np.column_stack((xyzw[:, 3], xyzw[:, 0], xyzw[:, 1], xyzw[:, 2]))
        flip = wxyz[:, 0] < 0.0
        wxyz[flip] *= -1.0
        return wxyz

    def write_csv(self, path):
        quat = self.ee_quat()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_COLUMNS)
            for i in range(len(self.t)):
                row = [
                    self.t[i],
                    self.ee_pos[i, 0],
                    self.ee_pos[i, 1],
                    self.ee_pos[i, 2],
                    quat[i, 0],
                    quat[i, 1],
                    quat[i, 2],
                    quat[i, 3],
                    self.tip[i, 0],
                    self.tip[i, 1],
                    self.tip[i, 2],
                    self.rcm_drift[i],
                    self.jaw[i],
                    self.clearance[i],
                ]
                writer.writerow([f"{v:.17g}" for v in row] + [int(self.enabled[i])])


def read_trajectory_csv(path):
    """Read a trajectory CSV back as a dict of column arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory header: {header}")
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=np.float64).reshape(-1, len(TRAJECTORY_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(TRAJECTORY_COLUMNS)}


def script_arrays(scenario: Scenario):
    """Sample the event script onto the tick grid (hold-last semantics).

    Values take effect on the first tick whose start time is >= the event
    time.  Returns (v_in, w_in, jaw_cmd, pedal_left, pedal_right) where the
    twist arrays already include the tremor contribution.
    """
    n = scenario.ticks
    dt = 1.0 / scenario.rate
    v_in = np.zeros((n, 3))
    w_in = np.zeros((n, 3))
    jaw_cmd = np.zeros(n)
    left = np.zeros(n, dtype=np.bool_)
    right = np.zeros(n, dtype=np.bool_)

    events = sorted(scenario.events, key=lambda e: e.t)
    twist = np.zeros(6)
    grip = 0.0
    ped = (False, False)
    idx = 0
    for i in range(n):
        now = i * dt
        while idx < len(events) and events[idx].t <= now + 1e-12:
            ev = events[idx]
            if ev.kind == "twist":
                twist = ev.value
            elif ev.kind == "gripper":
                grip = ev.value
            else:
                ped = ev.value
            idx += 1
        v_in[i] = twist[:3]
        w_in[i] = twist[3:]
        jaw_cmd[i] = grip
        left[i] = ped[0]
        right[i] = ped[1]

    if scenario.tremor.amplitude > 0.0:
        v_in += tremor_velocity(scenario.tremor, np.arange(n) * dt)
    return v_in, w_in, jaw_cmd, left, right


def enabled_mask(left, right, dt, debounce_window):
    """Vectorized interlock: both pedals held for >= the debounce window.

    Matches safety.update tick for tick (including the float arithmetic at
    the window boundary): enable turns on once now - since >= debounce with
    both times on the tick grid, and turns off instantly on release.
    """
    both = np.asarray(left, dtype=bool) & np.asarray(right, dtype=bool)
    n = len(both)
    if n == 0:
        return np.zeros(0, dtype=bool)
    idx = np.arange(n)
    run_edge = both & np.concatenate(([True], ~both[:-1]))
    start = np.where(run_edge, idx, -1)
    start = np.maximum.accumulate(start)
    now = idx * dt
    since = start * dt
    return both & (now - since >= debounce_window)


def run_scenario(
    scenario: Scenario,
    ctl: ControllerConfig,
    geom: ToolGeometry,
    jaw: JawModel = JawModel(),
    channel: LaryngoscopeChannel = LaryngoscopeChannel(),
    debounce_window: float = 0.05,
    engine: str = "kernel",
) -> Trajectory:
    """Run a scripted scenario and return the per-tick trajectory.

    Deterministic for fixed (scenario, seeds, config).  The pivot is pinned
    once at t=0 from the scenario's rcm offset.
    """
    n = scenario.ticks
    dt = 1.0 / scenario.rate
    v_in, w_in, jaw_cmd, left, right = script_arrays(scenario)
    enabled = enabled_mask(left, right, dt, debounce_window)

    state0 = ToolState(world_ee=scenario.initial_pose)
    pin = derive_frames(state0, geom, scenario.rcm_offset).world_rcm

    if engine == "kernel":
        return _run_kernel(
            scenario, state0, pin, v_in, w_in, jaw_cmd, enabled, dt, ctl, geom, jaw, channel
        )
    if engine == "reference":
        return _run_reference(
            scenario, state0, pin, v_in, w_in, jaw_cmd, enabled, dt, ctl, geom, jaw, channel
        )
    raise ValueError(f"unknown engine {engine!r}")


def _run_kernel(scenario, state0, pin, v_in, w_in, jaw_cmd, enabled, dt, ctl, geom, jaw, channel):
    n = len(v_in)
    r_out = np.empty((n, 3, 3))
    p_out = np.empty((n, 3))
    tip_out = np.empty((n, 3))
    drift_out = np.empty(n)
    jaw_out = np.empty(n)
    clear_out = np.empty(n)
    cmd_out = np.empty((n, 6))
    gated_out = np.empty((n, 6))

    fail = kernels.sim_run(
        np.ascontiguousarray(state0.world_ee.rotation),
        np.ascontiguousarray(state0.world_ee.translation),
        np.ascontiguousarray(pin.translation),
        state0.jaw_angle,
        v_in,
        w_in,
        enabled,
        jaw_cmd,
        dt,
        np.ascontiguousarray(geom.ee_to_tip.rotation),
        np.ascontiguousarray(geom.ee_to_tip.translation),
        np.ascontiguousarray(ctl.r_in_c),
        ctl.alpha_t,
        ctl.alpha_r,
        ctl.gain_k,
        ctl.v_max,
        ctl.omega_max,
        MIN_PIVOT_ARM,
        jaw.jaw_max,
        jaw.rate_limit,
        channel.point,
        channel.direction,
        channel.radius,
        channel.mouth_position,
        geom.shaft_length,
        r_out,
        p_out,
        tip_out,
        drift_out,
        jaw_out,
        clear_out,
        cmd_out,
        gated_out,
    )
    if fail >= 0:
        raise DegenerateGeometryError(f"pivot arm collapsed at tick {fail}")
    return Trajectory(
        rate=scenario.rate,
        t=(np.arange(n) + 1) * dt,
        ee_pos=p_out,
        ee_rot=r_out,
        tip=tip_out,
        rcm_drift=drift_out,
        jaw=jaw_out,
        clearance=clear_out,
        enabled=enabled.copy(),
        cmd_twist=cmd_out,
        gated_twist=gated_out,
        pin=pin.translation.copy(),
    )


def _run_reference(scenario, state0, pin, v_in, w_in, jaw_cmd, enabled, dt, ctl, geom, jaw, channel):
    from . import controller as ctl_mod
    from .safety import InterlockState, gate

    n = len(v_in)
    r_out = np.empty((n, 3, 3))
    p_out = np.empty((n, 3))
    tip_out = np.empty((n, 3))
    drift_out = np.empty(n)
    jaw_out = np.empty(n)
    clear_out = np.empty(n)
    cmd_out = np.empty((n, 6))
    gated_out = np.empty((n, 6))

    state = state0
    for i in range(n):
        frames = frames_from_pin(state, geom, pin)
        cmd = ctl_mod.step(Twist(v_in[i], w_in[i]), frames, ctl)
        gated = gate(cmd, InterlockState(enabled=bool(enabled[i])))
        state = apply_twist(state, gated, dt)
        state = jaw_step(state, jaw, jaw_cmd[i], dt)

        post = frames_from_pin(state, geom, pin)
        cmd_out[i] = cmd.as_array()
        gated_out[i] = gated.as_array()
        r_out[i] = state.world_ee.rotation
        p_out[i] = state.world_ee.translation
        tip_out[i] = post.world_f.translation
        rel = pin.translation - post.world_f.translation
        xhat = post.world_f.x_axis
        drift_out[i] = np.linalg.norm(rel - np.dot(rel, xhat) * xhat)
        jaw_out[i] = state.jaw_angle
        clear_out[i] = channel_clearance(state, geom, channel)
    return Trajectory(
        rate=scenario.rate,
        t=(np.arange(n) + 1) * dt,
        ee_pos=p_out,
        ee_rot=r_out,
        tip=tip_out,
        rcm_drift=drift_out,
        jaw=jaw_out,
        clearance=clear_out,
        enabled=enabled.copy(),
        cmd_twist=cmd_out,
        gated_twist=gated_out,
        pin=pin.translation.copy(),
    )
