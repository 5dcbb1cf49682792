"""Desk-scale torque-controlled biped stack.

Footstep planning on a linear inverted pendulum, whole-body QP torque
control, contact-based gait scheduling, an upper-body gesture FSM, a
physics harness and a teleoperation bridge.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    RobotModel,
    RobotState,
    build_model,
    load_default_model,
    load_model,
)
