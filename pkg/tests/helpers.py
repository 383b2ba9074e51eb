"""Shared test utilities: random geometry and independent oracles.

The oracles here deliberately avoid the package's own math:

- compose_oracle goes through plain 4x4 homogeneous matrix products
- fd_transform_twist integrates poses with scipy's matrix exponential and
  differentiates the target frame numerically
"""

import numpy as np
from scipy.linalg import expm

from rcmteleop.controller import ToolGeometry
from rcmteleop.simulator import ToolState, derive_frames, frames_from_pin
from rcmteleop.spatial import RigidTransform, Twist


def random_rotation(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, np.pi)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return expm(angle * k)


def random_transform(rng, span=1.0):
    return RigidTransform(random_rotation(rng), rng.uniform(-span, span, 3))


def random_twist(rng, v_span=1.0, w_span=1.0):
    return Twist(rng.uniform(-v_span, v_span, 3), rng.uniform(-w_span, w_span, 3))


def compose_oracle(a, b):
    """4x4 homogeneous matrix product."""
    return a.as_matrix() @ b.as_matrix()


def fd_transform_twist(tw, rel, delta=1e-6):
    """Numerically re-express a body twist in another rigidly attached frame.

    The source frame starts at the world origin and moves with the given
    body twist (exact screw motion via expm); the target frame is rigidly
    attached through ``rel`` (source coords -> target coords).  Central
    differences of the target frame's world pose give the target-frame
    twist.
    """
    xi = np.zeros((4, 4))
    xi[:3, :3] = np.array(
        [
            [0.0, -tw.angular[2], tw.angular[1]],
            [tw.angular[2], 0.0, -tw.angular[0]],
            [-tw.angular[1], tw.angular[0], 0.0],
        ]
    )
    xi[:3, 3] = tw.linear

    t_src_tgt = np.linalg.inv(rel.as_matrix())

    def target_pose(h):
        w_src = expm(xi * h)
        return w_src @ t_src_tgt

    w0 = target_pose(0.0)
    wp = target_pose(delta)
    wm = target_pose(-delta)
    r0 = w0[:3, :3]
    v = r0.T @ (wp[:3, 3] - wm[:3, 3]) / (2.0 * delta)
    wskew = r0.T @ (wp[:3, :3] - wm[:3, :3]) / (2.0 * delta)
    w = np.array([wskew[2, 1], wskew[0, 2], wskew[1, 0]])
    return Twist(v, w)


def random_tool_frames(rng, lateral_pivot_offset=0.0):
    """Random valid closed-loop frame set (and its geometry).

    The pivot is pinned on the shaft at a random arm in [0.03, 0.18] and
    then optionally displaced laterally by ``lateral_pivot_offset`` in a
    random direction perpendicular to the shaft.
    """
    geom = ToolGeometry(rcm_offset=0.15, shaft_length=0.20)
    state = ToolState(world_ee=random_transform(rng, span=0.3))
    arm = rng.uniform(0.03, 0.18)
    nominal = derive_frames(state, geom, arm)
    pin_t = nominal.world_rcm.translation
    if lateral_pivot_offset:
        xhat = nominal.world_f.x_axis
        perp = rng.normal(size=3)
        perp -= np.dot(perp, xhat) * xhat
        perp /= np.linalg.norm(perp)
        pin_t = pin_t + lateral_pivot_offset * perp
    pin = RigidTransform(nominal.world_rcm.rotation, pin_t)
    return frames_from_pin(state, geom, pin), geom
