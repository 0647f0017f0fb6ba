"""Coordinate conversions between the AR-side and robot-side frames.

The AR scene uses a left-handed frame (x right, y up, z forward, meters);
the robot uses a right-handed frame (x forward, y left, z up, millimeters).
Conversion is a signed axis permutation plus unit scaling, applied to both
position and orientation.  The permutation matrix is the single source of
truth for both; it is configurable so other rigs can remap.

Also provides the joint-angle sign mapping (v_joint = -theta * e_hat) and
the quaternion helpers shared by the kinematics and controller modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

M_TO_MM = 1000.0

# robot axis = signed AR axis: x_r = +z_ar, y_r = -x_ar, z_r = +y_ar
DEFAULT_PERMUTATION = ((0, 0, 1), (-1, 0, 0), (0, 1, 0))


class InvalidPose(ValueError):
    """Pose has non-finite components or a non-unit quaternion."""


# ---------------------------------------------------------------------------
# quaternion helpers (scalar-first wxyz, unit norm)
# ---------------------------------------------------------------------------

def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise InvalidPose(f"cannot normalize quaternion {q!r}")
    return q / n


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([w, -x, -y, -z])


def quat_angle_deg(a, b) -> float:
    """Angle of the relative rotation between two unit quaternions, degrees."""
    r = quat_mul(quat_conj(a), b)
    # atan2 form stays accurate for very small angles, unlike arccos of the dot
    return float(np.degrees(2.0 * np.arctan2(np.linalg.norm(r[1:]), abs(r[0]))))


def quat_slerp(a, b, t: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dot = float(np.dot(a, b))
    if dot < 0.0:  # take the short arc
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(a + t * (b - a))
    theta = np.arccos(min(1.0, dot))
    s = np.sin(theta)
    return (np.sin((1.0 - t) * theta) * a + np.sin(t * theta) * b) / s


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m) -> np.ndarray:
    """Rotation matrix to unit quaternion (Shepperd's method)."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def rotvec_from_matrix(m) -> np.ndarray:
    """Axis-angle vector (radians) of a rotation matrix."""
    m = np.asarray(m, dtype=float)
    angle = np.arccos(np.clip((np.trace(m) - 1.0) / 2.0, -1.0, 1.0))
    if angle < 1e-12:
        return np.zeros(3)
    axis = np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    n = np.linalg.norm(axis)
    if n < 1e-12:
        # angle ~ pi: axis from the diagonal
        ax = np.sqrt(np.maximum(0.0, (np.diag(m) + 1.0) / 2.0))
        # resolve signs against the off-diagonals
        if ax[0] >= ax[1] and ax[0] >= ax[2]:
            ax[1] = np.copysign(ax[1], m[0, 1])
            ax[2] = np.copysign(ax[2], m[0, 2])
        elif ax[1] >= ax[2]:
            ax[0] = np.copysign(ax[0], m[0, 1])
            ax[2] = np.copysign(ax[2], m[1, 2])
        else:
            ax[0] = np.copysign(ax[0], m[0, 2])
            ax[1] = np.copysign(ax[1], m[1, 2])
        return ax / np.linalg.norm(ax) * angle
    return axis / n * angle


# ---------------------------------------------------------------------------
# pose value types
# ---------------------------------------------------------------------------

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass
class ArPose:
    """AR-side pose: position in meters (left-handed), unit quaternion wxyz."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.orientation = np.asarray(self.orientation, dtype=float)


@dataclass
class RobotPose:
    """Robot-side TCP pose: position in millimeters (right-handed), unit quaternion wxyz."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.orientation = np.asarray(self.orientation, dtype=float)

    def copy(self) -> "RobotPose":
        return RobotPose(self.position.copy(), self.orientation.copy())

    def allclose(self, other: "RobotPose", pos_tol_mm: float = 1e-9,
                 ori_tol_deg: float = 1e-7) -> bool:
        return (np.all(np.abs(self.position - other.position) <= pos_tol_mm)
                and quat_angle_deg(self.orientation, other.orientation) <= ori_tol_deg)


def _check_pose(position, orientation, norm_tol: float = 1e-9):
    if not (np.all(np.isfinite(position)) and np.all(np.isfinite(orientation))):
        raise InvalidPose("pose has non-finite components")
    n = np.linalg.norm(orientation)
    if abs(n - 1.0) > norm_tol:
        raise InvalidPose(f"quaternion norm {n} not within {norm_tol} of 1")


# ---------------------------------------------------------------------------
# frame map
# ---------------------------------------------------------------------------

class FrameMap:
    """Signed axis permutation between the AR frame and the robot frame.

    ``permutation`` is a 3x3 signed permutation matrix M (row-major); a
    robot-frame vector is M @ (AR vector) scaled by 1000 (m -> mm).
    Orientation converts by basis change with the same M.
    """

    def __init__(self, permutation=DEFAULT_PERMUTATION):
        m = np.asarray(permutation, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("permutation must be 3x3")
        if (not np.all(np.isin(m, (-1.0, 0.0, 1.0)))
                or np.any(np.sum(np.abs(m), axis=0) != 1)
                or np.any(np.sum(np.abs(m), axis=1) != 1)):
            raise ValueError("permutation must have exactly one +-1 per row and column")
        self.matrix = m

    def ar_to_robot(self, pose: ArPose, norm_tol: float = 1e-9) -> RobotPose:
        _check_pose(pose.position, pose.orientation, norm_tol)
        p = M_TO_MM * (self.matrix @ pose.position)
        r = self.matrix @ quat_to_matrix(pose.orientation) @ self.matrix.T
        return RobotPose(p, matrix_to_quat(r))

    def robot_to_ar(self, pose: RobotPose, norm_tol: float = 1e-9) -> ArPose:
        _check_pose(pose.position, pose.orientation, norm_tol)
        p = (self.matrix.T @ pose.position) / M_TO_MM
        r = self.matrix.T @ quat_to_matrix(pose.orientation) @ self.matrix
        return ArPose(p, matrix_to_quat(r))


# ---------------------------------------------------------------------------
# joint sign mapping
# ---------------------------------------------------------------------------

_UNIT_AXES = (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))


def _check_axis(axis) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    if a.shape != (3,) or not any(np.array_equal(a, u) for u in _UNIT_AXES):
        raise ValueError(f"axis must be a unit coordinate axis, got {axis!r}")
    return a


def joint_map(theta_deg: float, axis, sign: float = -1.0) -> np.ndarray:
    """Local Euler vector for one joint: sign * theta * e_hat (degrees).

    The default sign inversion compensates the opposite joint rotation
    direction between the AR scene and the controller feedback.
    """
    return sign * float(theta_deg) * _check_axis(axis)


@dataclass
class JointMapSpec:
    """Per-joint rotation axis and sign convention for a six-axis arm."""

    axes: tuple = ((0, 1, 0), (1, 0, 0), (1, 0, 0), (0, 1, 0), (1, 0, 0), (0, 1, 0))
    signs: tuple = (-1.0,) * 6

    def __post_init__(self):
        if len(self.axes) != 6 or len(self.signs) != 6:
            raise ValueError("expected exactly six joints")
        for a in self.axes:
            _check_axis(a)

    def map_all(self, thetas_deg) -> np.ndarray:
        """Apply the per-joint mapping; returns a 6x3 array of Euler vectors."""
        thetas = np.asarray(thetas_deg, dtype=float)
        if thetas.shape != (6,):
            raise ValueError("expected six joint angles")
        return np.stack([joint_map(t, a, s)
                         for t, a, s in zip(thetas, self.axes, self.signs)])
