"""Kinematics for the simulated six-axis arm.

Forward kinematics over a modified-DH chain, the geometric Jacobian,
damped-least-squares inverse kinematics, and a Yoshikawa-style
manipulability measure used for singularity detection.

The default arm is a generic 6R spherical-wrist geometry at collaborative
scale; the DH table is a documented placeholder, not vendor data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import RobotPose, matrix_to_quat, quat_to_matrix, rotvec_from_matrix

DEG = np.pi / 180.0


class KinematicsError(Exception):
    pass


class Unreachable(KinematicsError):
    """Target position lies beyond the arm's maximum reach."""


class NoConvergence(KinematicsError):
    """IK iteration cap hit before reaching tolerance."""


class JointLimit(KinematicsError):
    """Converged solution violates a joint limit (controller error 50027)."""

    def __init__(self, joint: int, value_deg: float, lo: float, hi: float):
        super().__init__(f"joint {joint + 1} at {value_deg:.3f} deg outside [{lo}, {hi}]")
        self.joint = joint
        self.value_deg = value_deg


@dataclass
class ArmModel:
    """Six modified-DH rows (a mm, alpha rad, d mm, theta_offset rad) plus limits."""

    dh: np.ndarray
    limits_deg: np.ndarray
    name: str = "generic-6r"

    def __post_init__(self):
        self.dh = np.asarray(self.dh, dtype=float)
        self.limits_deg = np.asarray(self.limits_deg, dtype=float)
        if self.dh.shape != (6, 4):
            raise ValueError("expected six DH rows of (a, alpha, d, theta_offset)")
        if self.limits_deg.shape != (6, 2) or np.any(self.limits_deg[:, 0] >= self.limits_deg[:, 1]):
            raise ValueError("limits must be six (min, max) rows with min < max")

    @property
    def max_reach_mm(self) -> float:
        # conservative bound: chain of link lengths from the base
        return float(np.sum(np.hypot(self.dh[:, 0], self.dh[:, 2])))

    def within_limits(self, q_deg) -> bool:
        q = np.asarray(q_deg, dtype=float)
        return bool(np.all(q >= self.limits_deg[:, 0]) and np.all(q <= self.limits_deg[:, 1]))


def default_arm() -> ArmModel:
    hp = np.pi / 2
    dh = [
        # a_{i-1} [mm], alpha_{i-1} [rad], d_i [mm], theta_offset_i [rad]
        (0.0, 0.0, 265.0, 0.0),
        (0.0, -hp, 0.0, -hp),
        (350.0, 0.0, 0.0, 0.0),
        (0.0, -hp, 380.0, 0.0),
        (0.0, hp, 0.0, 0.0),
        (0.0, -hp, 101.0, 0.0),
    ]
    limits = [(-170, 170), (-120, 120), (-150, 150), (-170, 170), (-125, 125), (-170, 170)]
    return ArmModel(np.array(dh), np.array(limits))


# Comfortable non-singular posture the controller homes to on connect.
HOME_Q_DEG = np.array([0.0, 30.0, -40.0, 0.0, -60.0, 0.0])


def dh_transform(a: float, alpha: float, d: float, theta: float) -> np.ndarray:
    """Modified-DH link transform Rx(alpha)Tx(a)Rz(theta)Tz(d)."""
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([
        [ct, -st, 0.0, a],
        [st * ca, ct * ca, -sa, -sa * d],
        [st * sa, ct * sa, ca, ca * d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def fk_frames(model: ArmModel, q_deg) -> list[np.ndarray]:
    """Cumulative base-to-frame transforms for joints 1..6."""
    q = np.asarray(q_deg, dtype=float) * DEG
    frames = []
    t = np.eye(4)
    for i in range(6):
        a, alpha, d, off = model.dh[i]
        t = t @ dh_transform(a, alpha, d, q[i] + off)
        frames.append(t)
    return frames


def fk(model: ArmModel, q_deg) -> RobotPose:
    """TCP pose for the given joint angles (degrees)."""
    t = fk_frames(model, q_deg)[-1]
    return RobotPose(t[:3, 3].copy(), matrix_to_quat(t[:3, :3]))


def jacobian(model: ArmModel, q_deg) -> np.ndarray:
    """Geometric Jacobian at q: rows 0-2 linear (mm/rad), rows 3-5 angular (rad/rad)."""
    return _jacobian_of(fk_frames(model, q_deg))


def manipulability(model: ArmModel, q_deg) -> float:
    """Yoshikawa measure sqrt(det(J J^T)) with linear rows scaled by max reach.

    Scaling makes the measure dimensionless so one threshold works across
    arm sizes; near zero indicates proximity to a singularity.
    """
    j = jacobian(model, q_deg)
    j[:3, :] /= model.max_reach_mm
    return float(np.sqrt(max(np.linalg.det(j @ j.T), 0.0)))


def _wrap_deg(q_deg: np.ndarray) -> np.ndarray:
    return (q_deg + 180.0) % 360.0 - 180.0


def _jacobian_of(frames: list[np.ndarray]) -> np.ndarray:
    p_ee = frames[-1][:3, 3]
    j = np.zeros((6, 6))
    for i, t in enumerate(frames):
        z = t[:3, 2]
        j[:3, i] = np.cross(z, p_ee - t[:3, 3])
        j[3:, i] = z
    return j


def ik(model: ArmModel, target: RobotPose, seed_deg,
       pos_tol_mm: float = 0.1, ori_tol_deg: float = 0.1,
       max_iters: int = 100, damping: float = 0.01) -> np.ndarray:
    """Damped-least-squares IK from a seed configuration.

    Raises Unreachable when the target position exceeds the reach bound,
    NoConvergence at the iteration cap, and JointLimit when the converged
    solution falls outside the model's limits (never clamps silently).
    """
    if not (np.all(np.isfinite(target.position)) and np.all(np.isfinite(target.orientation))):
        raise KinematicsError("target pose must be finite")
    if np.linalg.norm(target.position) > model.max_reach_mm:
        raise Unreachable(f"|target|={np.linalg.norm(target.position):.1f} mm "
                          f"exceeds reach {model.max_reach_mm:.1f} mm")
    q = np.asarray(seed_deg, dtype=float).copy()
    ori_tol_rad = ori_tol_deg * DEG
    lam2 = damping * damping
    eye6 = np.eye(6)
    r_target = quat_to_matrix(target.orientation)
    for _ in range(max_iters):
        frames = fk_frames(model, q)
        t = frames[-1]
        dp = target.position - t[:3, 3]
        w = rotvec_from_matrix(r_target @ t[:3, :3].T)
        pos_err = float(np.linalg.norm(dp))
        ori_err = float(np.linalg.norm(w))
        if pos_err < pos_tol_mm and ori_err < ori_tol_rad:
            q = _wrap_deg(q)
            for i in range(6):
                lo, hi = model.limits_deg[i]
                if not (lo <= q[i] <= hi):
                    raise JointLimit(i, float(q[i]), float(lo), float(hi))
            return q
        # cap the per-iteration error step for stability far from the target
        if pos_err > 30.0:
            dp *= 30.0 / pos_err
        if ori_err > 0.3:
            w *= 0.3 / ori_err
        e = np.concatenate([dp, w])
        j = _jacobian_of(frames)
        dq = j.T @ np.linalg.solve(j @ j.T + lam2 * eye6, e)
        # bound the joint step: near-singular configurations otherwise
        # produce wild excursions onto mirrored solution branches
        dq_norm = float(np.linalg.norm(dq))
        if dq_norm > 0.35:
            dq *= 0.35 / dq_norm
        q += dq / DEG
    raise NoConvergence(f"no IK convergence in {max_iters} iterations")
