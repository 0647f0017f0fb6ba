"""Simulated robot controller: state machine, safety filters, gripper.

The control loop owns all mutable state and advances it with step() at a
fixed cadence (4 ms nominal).  Each cycle the raw target is low-pass
filtered, the remaining motion is clamped to the configured translation
and rotation rates, and the clamped pose is solved to joints; kinematic
failures latch the ERROR state with the mapped fault code instead of
raising.  Service calls (connect, restart, gripper, fault injection) may
come from other threads and synchronize on the controller lock.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kinematics as kin
from .errors import ErrorEvent, ErrorLog
from .frames import RobotPose, quat_angle_deg, quat_slerp


class Mode(Enum):
    DISCONNECTED = "disconnected"
    READY = "ready"
    EXECUTING = "executing"
    ERROR = "error"


class Gripper(Enum):
    OPEN = "open"
    CLOSED = "closed"


class ControllerRejected(Exception):
    """Service request rejected by the controller state machine."""


class ActiveError(ControllerRejected):
    """Controller is latched in ERROR; restart before commanding."""


class NotConnected(ControllerRejected):
    """Controller has no active session."""


@dataclass
class SafetyConfig:
    max_speed_deviation_mm_s: float = 50.0
    lp_cutoff_hz: float = 100.0
    max_orient_rate_deg_s: float = 25.0
    # gross over-command thresholds for the Speed Violation fault
    violation_factor: float = 4.0
    violation_window_ms: float = 250.0

    def __post_init__(self):
        if min(self.max_speed_deviation_mm_s, self.lp_cutoff_hz,
               self.max_orient_rate_deg_s, self.violation_factor,
               self.violation_window_ms) <= 0:
            raise ValueError("safety parameters must be > 0")


def lp_alpha(cutoff_hz: float, dt: float) -> float:
    """First-order IIR coefficient: alpha = dt / (RC + dt), RC = 1/(2*pi*fc)."""
    rc = 1.0 / (2.0 * np.pi * cutoff_hz)
    return dt / (rc + dt)


def lp_filter_pose(filtered: RobotPose, raw: RobotPose, cutoff_hz: float,
                   dt: float) -> RobotPose:
    """One IIR step per translation axis and on the orientation error angle."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    a = lp_alpha(cutoff_hz, dt)
    pos = filtered.position + a * (raw.position - filtered.position)
    ori = quat_slerp(filtered.orientation, raw.orientation, a)
    return RobotPose(pos, ori)


@dataclass
class Snapshot:
    mode: Mode
    q_deg: np.ndarray
    pose: RobotPose
    gripper: Gripper
    error: ErrorEvent | None


@dataclass
class StateChange:
    mode: Mode
    error: ErrorEvent | None = None


class SimController:
    def __init__(self, model: kin.ArmModel | None = None,
                 safety: SafetyConfig | None = None,
                 w_min: float = 1e-4,
                 home_q_deg=None,
                 elog: ErrorLog | None = None):
        self.model = model or kin.default_arm()
        self.safety = safety or SafetyConfig()
        self.w_min = float(w_min)
        self.home_q = np.array(kin.HOME_Q_DEG if home_q_deg is None else home_q_deg,
                               dtype=float)
        self.elog = elog or ErrorLog()
        self.lock = threading.RLock()
        self.state_listeners: list = []

        self.mode = Mode.DISCONNECTED
        self.active_error: ErrorEvent | None = None
        self.q = self.home_q.copy()
        self.pose = kin.fk(self.model, self.q)
        self.gripper = Gripper.OPEN
        self._filt: RobotPose | None = None
        self._prev_raw_pos: np.ndarray | None = None
        self._viol_time_s = 0.0

    # -- service surface ----------------------------------------------------

    def connect(self) -> Mode:
        with self.lock:
            if self.mode is Mode.DISCONNECTED:
                self.q = self.home_q.copy()
                self.pose = kin.fk(self.model, self.q)
                self._filt = self.pose.copy()
                self._prev_raw_pos = None
                self._viol_time_s = 0.0
                self._set_mode(Mode.READY)
            return self.mode

    def disconnect(self) -> Mode:
        with self.lock:
            if self.mode is not Mode.DISCONNECTED:
                self.active_error = None
                self._set_mode(Mode.DISCONNECTED)
            return self.mode

    def restart(self) -> Mode:
        with self.lock:
            if self.mode is Mode.ERROR:
                self.active_error = None
                self._filt = self.pose.copy()
                self._prev_raw_pos = None
                self._viol_time_s = 0.0
                self._set_mode(Mode.READY)
            elif self.mode is Mode.EXECUTING:
                self._set_mode(Mode.READY)
            return self.mode

    def inject_fault(self, code: int, description: str = "") -> ErrorEvent:
        with self.lock:
            return self._fault(code, description or "injected fault")

    def gripper_command(self, action: str) -> Gripper:
        if action not in ("open", "close"):
            raise ValueError(f"unknown gripper action {action!r}")
        with self.lock:
            if self.mode is Mode.ERROR:
                raise ActiveError(f"fault {self.active_error.code} active")
            if self.mode is Mode.DISCONNECTED:
                raise NotConnected("connect before commanding the gripper")
            self.gripper = Gripper.OPEN if action == "open" else Gripper.CLOSED
            return self.gripper

    def snapshot(self) -> Snapshot:
        with self.lock:
            return Snapshot(self.mode, self.q.copy(), self.pose.copy(),
                            self.gripper, self.active_error)

    # -- control loop -------------------------------------------------------

    def step(self, raw_target: RobotPose | None, dt: float = 0.004) -> None:
        """Advance one control cycle toward the target (None = hold in place)."""
        with self.lock:
            if self.mode in (Mode.DISCONNECTED, Mode.ERROR):
                return
            raw = raw_target if raw_target is not None else self.pose
            if raw_target is not None and self._prev_raw_pos is not None:
                tv = float(np.linalg.norm(raw.position - self._prev_raw_pos)) / dt
                if tv > self.safety.violation_factor * self.safety.max_speed_deviation_mm_s:
                    self._viol_time_s += dt
                else:
                    self._viol_time_s = 0.0
                if self._viol_time_s * 1000.0 > self.safety.violation_window_ms:
                    self._fault(90515, f"sustained target velocity {tv:.0f} mm/s")
                    return
            else:
                self._viol_time_s = 0.0
            self._prev_raw_pos = raw.position.copy() if raw_target is not None else None

            if self._filt is None:
                self._filt = self.pose.copy()
            self._filt = lp_filter_pose(self._filt, raw, self.safety.lp_cutoff_hz, dt)

            dp = self._filt.position - self.pose.position
            dist = float(np.linalg.norm(dp))
            max_step = self.safety.max_speed_deviation_mm_s * dt
            if dist > max_step:
                new_pos = self.pose.position + dp * (max_step / dist)
            else:
                new_pos = self._filt.position.copy()
            ang = quat_angle_deg(self.pose.orientation, self._filt.orientation)
            max_ang = self.safety.max_orient_rate_deg_s * dt
            if ang > max_ang:
                new_ori = quat_slerp(self.pose.orientation, self._filt.orientation,
                                     max_ang / ang)
            else:
                new_ori = self._filt.orientation.copy()
            new_pose = RobotPose(new_pos, new_ori)

            try:
                q_new = kin.ik(self.model, new_pose, self.q,
                               pos_tol_mm=1e-3, ori_tol_deg=1e-3, max_iters=50)
            except kin.JointLimit as e:
                self._fault(50027, str(e))
                return
            except kin.Unreachable as e:
                self._fault(50027, str(e))
                return
            except kin.NoConvergence as e:
                self._fault(0, str(e))
                return
            if kin.manipulability(self.model, q_new) < self.w_min:
                self._fault(50456, "manipulability below threshold")
                return

            moved = dist > 1e-9 or ang > 1e-9
            self.q = q_new
            self.pose = new_pose
            self._set_mode(Mode.EXECUTING if moved else Mode.READY)

    # -- internals ----------------------------------------------------------

    def _fault(self, code: int, description: str) -> ErrorEvent:
        event = self.elog.record(code, description)
        self.active_error = event
        self._set_mode(Mode.ERROR)
        return event

    def _set_mode(self, mode: Mode) -> None:
        if mode is self.mode:
            return
        self.mode = mode
        change = StateChange(mode, self.active_error)
        for fn in list(self.state_listeners):
            fn(change)
