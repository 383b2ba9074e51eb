"""Pivot-constrained velocity teleoperation: controller, simulator, safety
interlock, metrics, and a live session service."""

from .controller import (
    ControllerConfig,
    DegenerateGeometryError,
    FrameSet,
    ToolGeometry,
    clamp_twist,
    drift_correct,
    pivot_map,
    scale_input,
    step,
    to_end_effector,
)
from .spatial import (
    RigidTransform,
    Twist,
    compose,
    cross,
    integrate_pose,
    transform_twist,
)

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig",
    "DegenerateGeometryError",
    "FrameSet",
    "RigidTransform",
    "ToolGeometry",
    "Twist",
    "clamp_twist",
    "compose",
    "cross",
    "drift_correct",
    "integrate_pose",
    "pivot_map",
    "scale_input",
    "step",
    "to_end_effector",
    "transform_twist",
    "__version__",
]
