"""Velocity controller that maps operator twists into pivot-constrained tool twists.

The pipeline turns a raw operator twist into an end-effector twist that keeps
the instrument shaft passing through a pinned world point (the remote center
of motion):

1. scale_input     - rotate the operator twist into the application frame and
                     apply the translational/rotational scale factors
2. pivot_map       - convert the demanded lateral tip velocity into an angular
                     velocity about the pivot point; roll passes through
3. drift_correct   - replace the lateral translational command with a
                     proportional pull of the shaft back onto the pivot point;
                     the insertion-axis component passes through
4. clamp_twist     - bound speed while preserving the twist direction
5. to_end_effector - re-express the command in the end-effector frame a
                     Cartesian velocity controller consumes

Frames (all world poses carried in a FrameSet):

- {EE}  end-effector mount of the robot arm
- {F}   forceps tip, x-axis along the shaft pointing distally
- {RCM} the pinned pivot; set once when the operator engages, then fixed in
        the world while the tool moves
- {C}   application frame where scaled commands are interpreted: it rides the
        shaft at the pivot's axial station, sharing the tip frame's axes
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial import RigidTransform, Twist, check_rotation, transform_twist

# Pivot arms shorter than this amplify lateral-demand noise unacceptably
# (the pivot map divides by the arm), so they are rejected outright.
MIN_PIVOT_ARM = 0.005

# Sanity envelope for how far the pinned pivot may sit off the shaft line
# before the frame set is considered misused rather than drifted.
_MAX_PIVOT_DEVIATION = 0.02

_FRAME_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Pivot arm too short for a well-conditioned pivot map."""


@dataclass(frozen=True)
class ControllerConfig:
    """Scaling, drift-correction gain, input alignment, and speed clamps."""

    alpha_t: float = 0.25
    alpha_r: float = 0.4
    gain_k: float = 5.0
    r_in_c: np.ndarray = field(default_factory=lambda: np.eye(3))
    v_max: float = 0.05
    omega_max: float = 0.5

    def __post_init__(self):
        for name in ("alpha_t", "alpha_r", "gain_k", "v_max", "omega_max"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        r = check_rotation(self.r_in_c, "r_in_c")
        r.flags.writeable = False
        object.__setattr__(self, "r_in_c", r)


@dataclass(frozen=True)
class ToolGeometry:
    """Shaft geometry and the fixed mount between end-effector and tip.

    rcm_offset is the nominal distance (m) from the tip back along the shaft
    at which the pivot is pinned; ee_to_tip is the pose of the tip frame
    expressed in the end-effector frame (world_F = world_EE o ee_to_tip).
    """

    rcm_offset: float = 0.15
    shaft_length: float = 0.20
    ee_to_tip: RigidTransform = field(
        default_factory=lambda: RigidTransform(np.eye(3), np.array([0.20, 0.0, 0.0]))
    )

    def __post_init__(self):
        if not (0.0 < self.rcm_offset <= self.shaft_length):
            raise ValueError(
                f"rcm_offset must be in (0, shaft_length={self.shaft_length}], "
                f"got {self.rcm_offset}"
            )


@dataclass(frozen=True)
class FrameSet:
    """World poses of the application, tip, pivot, and end-effector frames.

    {C} and {F} are rigid on the tool: same x-axis (the shaft direction) and
    {C}'s origin on the tip frame's x-line.  The pivot pose is only loosely
    constrained here because it is pinned in the world and legitimately sits
    a small lateral distance off the shaft while drift correction acts.
    """

    world_c: RigidTransform
    world_f: RigidTransform
    world_rcm: RigidTransform
    world_ee: RigidTransform

    def __post_init__(self):
        xf = self.world_f.x_axis
        if np.linalg.norm(self.world_c.x_axis - xf) > _FRAME_TOL:
            raise ValueError("application frame x-axis must match the shaft direction")
        rel = self.world_c.translation - self.world_f.translation
        lateral = rel - np.dot(rel, xf) * xf
        if np.linalg.norm(lateral) > _FRAME_TOL:
            raise ValueError("application frame origin must lie on the shaft line")
        pivot_rel = self.world_rcm.translation - self.world_f.translation
        pivot_lateral = pivot_rel - np.dot(pivot_rel, xf) * xf
        if np.linalg.norm(pivot_lateral) > _MAX_PIVOT_DEVIATION:
            raise ValueError(
                "pivot origin is implausibly far off the shaft line "
                f"({np.linalg.norm(pivot_lateral):.4f} m)"
            )

    def rotation_c_to_f(self):
        """Rotation taking {F}-frame coordinates into {C}-frame coordinates."""
        return self.world_c.rotation.T @ self.world_f.rotation

    def pivot_arm(self):
        """Signed axial distance (m) from the {C} origin forward to the tip."""
        rel = self.world_f.translation - self.world_c.translation
        return float(np.dot(rel, self.world_f.x_axis))


def scale_input(tw_in: Twist, cfg: ControllerConfig) -> Twist:
    """Rotate the operator twist into {C} and apply the scale factors."""
    return Twist(
        cfg.alpha_t * (cfg.r_in_c @ tw_in.linear),
        cfg.alpha_r * (cfg.r_in_c @ tw_in.angular),
    )


def pivot_map(v_c, omega_c_x: float, frames: FrameSet):
    """Angular velocity in {C} realizing the demanded lateral tip velocity.

    The demanded translation is expressed at the tip; its lateral components
    become rotation rates about the pivot (omega_y = -v_z/arm,
    omega_z = v_y/arm) while the roll rate passes through unchanged.  The
    arm is measured from the frames so it stays exact while the shaft slides
    through the pivot.
    """
    arm = frames.pivot_arm()
    if arm < MIN_PIVOT_ARM:
        raise DegenerateGeometryError(
            f"pivot arm {arm:.4f} m is below the {MIN_PIVOT_ARM} m minimum"
        )
    r_cf = frames.rotation_c_to_f()
    v_f = r_cf.T @ np.asarray(v_c, dtype=np.float64)
    omega_f = np.array([omega_c_x, -v_f[2] / arm, v_f[1] / arm])
    return r_cf @ omega_f


def drift_correct(v_c, frames: FrameSet, cfg: ControllerConfig):
    """Constrained translation in {C}: insertion passes, lateral pulls back.

    The lateral deviation of the pinned pivot from the application frame is
    measured in tip coordinates and scaled by the proportional gain; the
    x (insertion-axis) component of the command is left unchanged so the
    shaft can still slide through the pivot.
    """
    r_cf = frames.rotation_c_to_f()
    r_wf = frames.world_f.rotation
    v_f = r_cf.T @ np.asarray(v_c, dtype=np.float64)
    t_f_rcm = r_wf.T @ (frames.world_rcm.translation - frames.world_f.translation)
    t_f_c = r_wf.T @ (frames.world_c.translation - frames.world_f.translation)
    delta = t_f_rcm - t_f_c
    corrected = np.array([v_f[0], cfg.gain_k * delta[1], cfg.gain_k * delta[2]])
    return r_cf @ corrected


def clamp_twist(tw: Twist, v_max: float, omega_max: float) -> Twist:
    """Scale the whole twist down so both speed limits hold.

    A single scalar is applied to the linear and angular parts together, so
    the clamped command is a nonnegative multiple of the request and the
    pivot-consistency of its components is preserved.
    """
    scale = 1.0
    v_norm = float(np.linalg.norm(tw.linear))
    if v_norm > 0.0:
        scale = min(scale, v_max / v_norm)
    w_norm = float(np.linalg.norm(tw.angular))
    if w_norm > 0.0:
        scale = min(scale, omega_max / w_norm)
    if scale >= 1.0:
        return tw
    return Twist(tw.linear * scale, tw.angular * scale)


def to_end_effector(tw_c: Twist, frames: FrameSet) -> Twist:
    """Re-express a {C}-frame twist in the end-effector frame."""
    r_ec = frames.world_ee.rotation.T @ frames.world_c.rotation
    t_ec = frames.world_ee.rotation.T @ (
        frames.world_c.translation - frames.world_ee.translation
    )
    return transform_twist(tw_c, RigidTransform(r_ec, t_ec))


def step(tw_in: Twist, frames: FrameSet, cfg: ControllerConfig) -> Twist:
    """Full pipeline from operator twist to end-effector twist command."""
    scaled = scale_input(tw_in, cfg)
    omega_c = pivot_map(scaled.linear, float(scaled.angular[0]), frames)
    v_c = drift_correct(scaled.linear, frames, cfg)
    clamped = clamp_twist(Twist(v_c, omega_c), cfg.v_max, cfg.omega_max)
    return to_end_effector(clamped, frames)
