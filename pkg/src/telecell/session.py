"""Demonstration-session recording and replay.

On-disk format: line-delimited structured text.  The first line is the
header (`#cellsession` + space-separated key=value fields, including the
schema version, arm model id, safety snapshot, and wall-clock start);
every following line is one control-cycle record of key=value tokens.
An optional free-text annotation terminates a record line and runs to the
end of the line.  Files are append-only while recording; a truncated tail
yields the complete records plus a warning rather than a parse failure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import wire
from .controller import SafetyConfig
from .frames import RobotPose

SCHEMA_VERSION = 1
HEADER_TAG = "#cellsession"

_STATE_NAMES = {wire.STATE_READY: "ready", wire.STATE_EXECUTING: "executing",
                wire.STATE_ERROR: "error"}
_STATE_BYTES = {v: k for k, v in _STATE_NAMES.items()}


class UnsupportedSchema(ValueError):
    """Session file header is missing, malformed, or a different version."""


@dataclass
class SessionRecord:
    t_us: int
    seq: int
    target: RobotPose
    actual: RobotPose
    joints_deg: np.ndarray
    gripper: str = "open"
    mode: str = "ready"
    annotation: str | None = None

    def __post_init__(self):
        self.joints_deg = np.asarray(self.joints_deg, dtype=float)


def _fmt_pose(prefix: str, pose: RobotPose) -> str:
    p, o = pose.position, pose.orientation
    return (f"{prefix}x={p[0]:.6f} {prefix}y={p[1]:.6f} {prefix}z={p[2]:.6f} "
            f"{prefix}qw={o[0]:.9f} {prefix}qx={o[1]:.9f} "
            f"{prefix}qy={o[2]:.9f} {prefix}qz={o[3]:.9f}")


def format_record(r: SessionRecord) -> str:
    joints = " ".join(f"j{i + 1}={v:.6f}" for i, v in enumerate(r.joints_deg))
    line = (f"t_us={r.t_us} seq={r.seq} mode={r.mode} gripper={r.gripper} "
            f"{_fmt_pose('t', r.target)} {_fmt_pose('a', r.actual)} {joints}")
    if r.annotation:
        line += f" annotation={r.annotation}"
    return line


def _parse_pose(kv: dict, prefix: str) -> RobotPose:
    pos = np.array([float(kv[prefix + a]) for a in "xyz"])
    ori = np.array([float(kv[prefix + "q" + a]) for a in "wxyz"])
    return RobotPose(pos, ori)


def parse_record(line: str) -> SessionRecord:
    annotation = None
    if " annotation=" in line:
        line, annotation = line.split(" annotation=", 1)
    kv = dict(tok.split("=", 1) for tok in line.split())
    joints = np.array([float(kv[f"j{i + 1}"]) for i in range(6)])
    return SessionRecord(int(kv["t_us"]), int(kv["seq"]),
                         _parse_pose(kv, "t"), _parse_pose(kv, "a"),
                         joints, kv["gripper"], kv["mode"], annotation)


class SessionWriter:
    """Single-writer, append-only session file."""

    def __init__(self, path, arm_name: str = "generic-6r",
                 safety: SafetyConfig | None = None):
        safety = safety or SafetyConfig()
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._last_t_us: int | None = None
        self._pending_annotation: str | None = None
        self.count = 0
        header = (f"{HEADER_TAG} version={SCHEMA_VERSION} arm={arm_name} "
                  f"start_wall_us={time.time_ns() // 1000} "
                  f"max_speed_deviation_mm_s={safety.max_speed_deviation_mm_s} "
                  f"lp_cutoff_hz={safety.lp_cutoff_hz} "
                  f"max_orient_rate_deg_s={safety.max_orient_rate_deg_s}")
        self._fh.write(header + "\n")

    def annotate(self, text: str) -> None:
        """Tag the next written record with a task-event annotation."""
        self._pending_annotation = text.replace("\n", " ")

    def write(self, record: SessionRecord) -> None:
        if self._last_t_us is not None and record.t_us <= self._last_t_us:
            return  # drop duplicated/stale cycles; time must increase
        self._last_t_us = record.t_us
        if self._pending_annotation and not record.annotation:
            record.annotation = self._pending_annotation
            self._pending_annotation = None
        self._fh.write(format_record(record) + "\n")
        self.count += 1

    def close(self) -> None:
        self._fh.flush()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_session(path):
    """Parse a session file; returns (header dict, records, warnings)."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith(HEADER_TAG + " "):
            raise UnsupportedSchema("missing session header line")
        try:
            header = dict(tok.split("=", 1) for tok in first[len(HEADER_TAG):].split())
        except ValueError as e:
            raise UnsupportedSchema(f"malformed header: {e}") from e
        if header.get("version") != str(SCHEMA_VERSION):
            raise UnsupportedSchema(f"unsupported schema version {header.get('version')!r}")
        records, warnings = [], []
        for n, line in enumerate(fh, start=2):
            if not line.endswith("\n"):
                warnings.append(f"line {n}: truncated tail dropped")
                break
            line = line.strip()
            if not line:
                continue
            try:
                records.append(parse_record(line))
            except (KeyError, ValueError):
                warnings.append(f"line {n}: incomplete record dropped")
                break
    return header, records, warnings


class SessionRecorder:
    """Bridges a wire client session to a session file: one record per
    feedback datagram, joined with the sent command it echoes.  Gripper
    state is derived from the echoed commands (the feedback payload does
    not carry it)."""

    def __init__(self, writer: SessionWriter, session: "wire.CommandSession"):
        self.writer = writer
        self.session = session
        self._gripper_state = "open"
        self._folded_seq = 0

    def on_feedback(self, fb: "wire.Feedback") -> None:
        # gripper actions apply for every delivered command, including ones
        # superseded before a control cycle echoed them; fold all of them
        for seq in range(self._folded_seq + 1, fb.echo_seq + 1):
            cmd = self.session.sent(seq)
            if cmd is None:
                continue
            if cmd.gripper == wire.GRIPPER_OPEN:
                self._gripper_state = "open"
            elif cmd.gripper == wire.GRIPPER_CLOSE:
                self._gripper_state = "closed"
        self._folded_seq = max(self._folded_seq, fb.echo_seq)
        sent = self.session.sent(fb.echo_seq)
        target = sent.target if sent is not None else fb.actual
        self.writer.write(SessionRecord(fb.timestamp_us, fb.echo_seq, target,
                                        fb.actual, fb.joints_deg,
                                        self._gripper_state,
                                        _STATE_NAMES[fb.state]))


def replay(path, host: str = "127.0.0.1", port: int = wire.DEFAULT_PORT,
           speed: float = 1.0, session: "wire.CommandSession | None" = None) -> float:
    """Re-emit a recorded target stream with original timing scaled by speed.

    Returns the elapsed send duration in seconds.
    """
    if speed <= 0:
        raise ValueError("speed factor must be > 0")
    header, records, _ = read_session(path)
    own_session = session is None
    if own_session:
        session = wire.CommandSession(host, port)
    try:
        t0 = time.perf_counter()
        if records:
            first_t = records[0].t_us
            prev_gripper = None
            for r in records:
                due = t0 + (r.t_us - first_t) / 1e6 / speed
                delay = due - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
                action = wire.GRIPPER_HOLD
                if r.gripper != prev_gripper and prev_gripper is not None:
                    action = (wire.GRIPPER_OPEN if r.gripper == "open"
                              else wire.GRIPPER_CLOSE)
                prev_gripper = r.gripper
                session.send_target(r.target, action)
        return time.perf_counter() - t0
    finally:
        if own_session:
            session.close()
