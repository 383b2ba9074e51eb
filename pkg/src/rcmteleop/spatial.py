"""Rigid-transform and twist algebra on plain numpy arrays.

Conventions used throughout the package:

- rotations are 3x3 right-handed orthonormal matrices (det +1)
- a RigidTransform maps coordinates of a point from its source frame into
  its target frame: x_target = R @ x_source + t, so ``translation`` is the
  source-frame origin expressed in the target frame
- a Twist is a body velocity (linear m/s, angular rad/s) expressed in the
  frame it is attached to, with the frame origin as reference point
- angles are radians everywhere; degrees only exist at CLI/UI boundaries
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Residual above which a rotation is re-orthonormalized; construction fails
# outright when the residual is too large to be numerical drift.
ORTHONORMALITY_TOL = 1e-9
_CONSTRUCTION_TOL = 1e-6

# First-order pose integration assumes short control ticks.
MAX_INTEGRATION_DT = 0.1


def vec3(x, y, z):
    """Build a finite float64 3-vector."""
    return check_vec3(np.array([x, y, z], dtype=np.float64))


def check_vec3(v, name="vector"):
    """Validate shape (3,) and finiteness; returns a float64 copy."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr.copy()


def skew(w):
    """Skew-symmetric matrix such that skew(w) @ v == cross(w, v)."""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def cross(a, b):
    """Right-handed cross product of two 3-vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_exp(w):
    """Rotation exponential (Rodrigues) of an axis-times-angle 3-vector."""
    w = np.asarray(w, dtype=np.float64)
    theta = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    if theta < 1e-12:
        # First-order term alone keeps orthonormality error below theta^2.
        return np.eye(3) + skew(w)
    k = w / theta
    khat = skew(k)
    return np.eye(3) + np.sin(theta) * khat + (1.0 - np.cos(theta)) * (khat @ khat)


def orthonormality_residual(R):
    """Max absolute entry of R^T R - I."""
    return float(np.max(np.abs(R.T @ R - np.eye(3))))


def gram_schmidt(R):
    """Re-orthonormalize a near-rotation, keeping the first column direction."""
    c0 = R[:, 0] / np.linalg.norm(R[:, 0])
    c1 = R[:, 1] - np.dot(c0, R[:, 1]) * c0
    c1 = c1 / np.linalg.norm(c1)
    c2 = cross(c0, c1)
    return np.column_stack((c0, c1, c2))


def check_rotation(R, name="rotation"):
    """Validate a rotation matrix, absorbing small numerical drift.

    Residuals below ORTHONORMALITY_TOL pass through untouched; residuals up
    to the construction tolerance are repaired by Gram-Schmidt; anything
    larger (or a reflection) is rejected.
    """
    arr = np.asarray(R, dtype=np.float64)
    if arr.shape != (3, 3):
        raise ValueError(f"{name} must have shape (3, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    residual = orthonormality_residual(arr)
    if residual > _CONSTRUCTION_TOL:
        raise ValueError(f"{name} is not orthonormal (residual {residual:.3e})")
    if np.linalg.det(arr) < 0.0:
        raise ValueError(f"{name} is a reflection (negative determinant)")
    if residual > ORTHONORMALITY_TOL:
        arr = gram_schmidt(arr)
    return arr.copy()


def _freeze(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RigidTransform:
    """SO(3) rotation plus translation (m); immutable value type."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _freeze(check_rotation(self.rotation)))
        object.__setattr__(
            self, "translation", _freeze(check_vec3(self.translation, "translation"))
        )

    @staticmethod
    def identity():
        return RigidTransform(np.eye(3), np.zeros(3))

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, point):
        """Map point coordinates from the source frame into the target frame."""
        return self.rotation @ np.asarray(point, dtype=np.float64) + self.translation

    @property
    def x_axis(self):
        return self.rotation[:, 0]

    def as_matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class Twist:
    """Paired linear (m/s) and angular (rad/s) velocity; immutable."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", _freeze(check_vec3(self.linear, "linear")))
        object.__setattr__(self, "angular", _freeze(check_vec3(self.angular, "angular")))

    @staticmethod
    def zero():
        return Twist(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(a):
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (6,):
            raise ValueError(f"twist array must have shape (6,), got {a.shape}")
        return Twist(a[:3], a[3:])

    def as_array(self):
        return np.concatenate((self.linear, self.angular))

    def is_zero(self):
        return not (np.any(self.linear) or np.any(self.angular))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Chain two transforms: result maps like applying b first, then a."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def transform_twist(tw: Twist, rel: RigidTransform) -> Twist:
    """Re-express a body twist of one rigid body in another attached frame.

    ``rel`` maps source-frame coordinates into the target frame, so
    ``rel.translation`` is the source-frame origin seen from the target
    frame.  The angular part rotates; the linear part picks up the lever-arm
    term from the change of reference point:

        w' = R @ w
        v' = R @ v + t x w'
    """
    ang = rel.rotation @ tw.angular
    lin = rel.rotation @ tw.linear + cross(rel.translation, ang)
    return Twist(lin, ang)


def integrate_pose(pose: RigidTransform, tw: Twist, dt: float) -> RigidTransform:
    """Advance a world pose by a body-frame twist over one short tick.

    First-order body-frame update: the angular part uses the exact rotation
    exponential, the translation advances along the current body axes
    (p += R v dt).  dt must lie in (0, MAX_INTEGRATION_DT].
    """
    if not (0.0 < dt <= MAX_INTEGRATION_DT):
        raise ValueError(f"dt must be in (0, {MAX_INTEGRATION_DT}], got {dt}")
    rot = pose.rotation @ rot_exp(tw.angular * dt)
    trans = pose.translation + pose.rotation @ (tw.linear * dt)
    return RigidTransform(rot, trans)
