"""Binary UDP position-stream protocol and its endpoints.

Datagram layout (little-endian throughout):
  header (17 bytes): magic "EGM1", msg_type u8 (1=COMMAND, 2=FEEDBACK),
                     seq u32, timestamp_us u64 (sender monotonic clock)
  COMMAND payload (57 bytes): target position 3*f64 mm, orientation
                     quaternion wxyz 4*f64, gripper u8 (0 hold/1 open/2 close)
  FEEDBACK payload (109 bytes): joints 6*f64 deg, actual position 3*f64 mm,
                     quaternion wxyz 4*f64, state u8 (1 ready/2 executing/
                     3 error), echo_seq u32 (last command applied)

UDP semantics are preserved: no retransmission, out-of-order datagrams
(seq not newer than the last seen) are dropped, and the newest target is
held between datagrams.  After hold_timeout of command silence the server
freezes the commanded pose in place.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .controller import ControllerRejected, Mode, SimController
from .frames import RobotPose

MAGIC = b"EGM1"
MSG_COMMAND = 1
MSG_FEEDBACK = 2

GRIPPER_HOLD = 0
GRIPPER_OPEN = 1
GRIPPER_CLOSE = 2

STATE_READY = 1
STATE_EXECUTING = 2
STATE_ERROR = 3

_HEADER = struct.Struct("<4sBIQ")
_CMD_PAYLOAD = struct.Struct("<3d4dB")
_FB_PAYLOAD = struct.Struct("<6d3d4dBI")

COMMAND_SIZE = _HEADER.size + _CMD_PAYLOAD.size    # 74
FEEDBACK_SIZE = _HEADER.size + _FB_PAYLOAD.size    # 126

DEFAULT_PORT = 6510
DEFAULT_RATE_HZ = 250.0
DEFAULT_HOLD_TIMEOUT_MS = 500.0

_MODE_TO_STATE = {Mode.READY: STATE_READY, Mode.EXECUTING: STATE_EXECUTING,
                  Mode.ERROR: STATE_ERROR}


class EncodeError(ValueError):
    pass


class DecodeError(ValueError):
    pass


class Truncated(DecodeError):
    pass


class BadMagic(DecodeError):
    pass


class BadField(DecodeError):
    pass


@dataclass
class Command:
    seq: int
    timestamp_us: int
    target: RobotPose
    gripper: int = GRIPPER_HOLD


@dataclass
class Feedback:
    seq: int
    timestamp_us: int
    joints_deg: np.ndarray
    actual: RobotPose
    state: int
    echo_seq: int

    def __post_init__(self):
        self.joints_deg = np.asarray(self.joints_deg, dtype=float)


def monotonic_us() -> int:
    return time.monotonic_ns() // 1000


def seq_newer(a: int, b: int) -> bool:
    """True when sequence number a is newer than b, wraparound-aware."""
    return 0 < ((a - b) & 0xFFFFFFFF) < 0x80000000


def _check_finite_pose(pose: RobotPose, norm_tol: float = 1e-6) -> None:
    if not (np.all(np.isfinite(pose.position)) and np.all(np.isfinite(pose.orientation))):
        raise EncodeError("pose has non-finite components")
    n = float(np.linalg.norm(pose.orientation))
    if abs(n - 1.0) > norm_tol:
        raise EncodeError(f"quaternion norm {n} not within {norm_tol} of 1")


def encode_command(cmd: Command) -> bytes:
    _check_finite_pose(cmd.target)
    if cmd.gripper not in (GRIPPER_HOLD, GRIPPER_OPEN, GRIPPER_CLOSE):
        raise EncodeError(f"bad gripper action {cmd.gripper}")
    head = _HEADER.pack(MAGIC, MSG_COMMAND, cmd.seq & 0xFFFFFFFF, cmd.timestamp_us)
    body = _CMD_PAYLOAD.pack(*cmd.target.position, *cmd.target.orientation, cmd.gripper)
    return head + body


def encode_feedback(fb: Feedback) -> bytes:
    _check_finite_pose(fb.actual)
    if fb.state not in (STATE_READY, STATE_EXECUTING, STATE_ERROR):
        raise EncodeError(f"bad state byte {fb.state}")
    if fb.joints_deg.shape != (6,) or not np.all(np.isfinite(fb.joints_deg)):
        raise EncodeError("feedback requires six finite joint angles")
    head = _HEADER.pack(MAGIC, MSG_FEEDBACK, fb.seq & 0xFFFFFFFF, fb.timestamp_us)
    body = _FB_PAYLOAD.pack(*fb.joints_deg, *fb.actual.position,
                            *fb.actual.orientation, fb.state, fb.echo_seq & 0xFFFFFFFF)
    return head + body


def decode(datagram: bytes) -> Command | Feedback:
    if len(datagram) < _HEADER.size:
        raise Truncated(f"datagram of {len(datagram)} bytes lacks a full header")
    magic, msg_type, seq, ts = _HEADER.unpack_from(datagram, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if msg_type == MSG_COMMAND:
        if len(datagram) != COMMAND_SIZE:
            raise Truncated(f"COMMAND must be {COMMAND_SIZE} bytes, got {len(datagram)}")
        vals = _CMD_PAYLOAD.unpack_from(datagram, _HEADER.size)
        pose = RobotPose(np.array(vals[0:3]), np.array(vals[3:7]))
        gripper = vals[7]
        if gripper not in (GRIPPER_HOLD, GRIPPER_OPEN, GRIPPER_CLOSE):
            raise BadField(f"bad gripper byte {gripper}")
        if not np.all(np.isfinite(pose.position)) or not np.all(np.isfinite(pose.orientation)):
            raise BadField("non-finite pose")
        if abs(float(np.linalg.norm(pose.orientation)) - 1.0) > 1e-6:
            raise BadField("quaternion not unit norm")
        return Command(seq, ts, pose, gripper)
    if msg_type == MSG_FEEDBACK:
        if len(datagram) != FEEDBACK_SIZE:
            raise Truncated(f"FEEDBACK must be {FEEDBACK_SIZE} bytes, got {len(datagram)}")
        vals = _FB_PAYLOAD.unpack_from(datagram, _HEADER.size)
        joints = np.array(vals[0:6])
        pose = RobotPose(np.array(vals[6:9]), np.array(vals[9:13]))
        state, echo_seq = vals[13], vals[14]
        if state not in (STATE_READY, STATE_EXECUTING, STATE_ERROR):
            raise BadField(f"bad state byte {state}")
        return Feedback(seq, ts, joints, pose, state, echo_seq)
    raise BadField(f"unknown message type {msg_type}")


# ---------------------------------------------------------------------------
# endpoints
# ---------------------------------------------------------------------------

class WireServer:
    """Controller-side endpoint: receives commands, runs the cycle loop,
    emits feedback to the most recent command sender."""

    def __init__(self, controller: SimController, host: str = "127.0.0.1",
                 port: int = DEFAULT_PORT, rate_hz: float = DEFAULT_RATE_HZ,
                 hold_timeout_ms: float = DEFAULT_HOLD_TIMEOUT_MS,
                 on_cycle=None):
        self.controller = controller
        self.host = host
        self.requested_port = port
        self.rate_hz = float(rate_hz)
        self.dt = 1.0 / self.rate_hz
        self.hold_timeout_ms = float(hold_timeout_ms)
        self.on_cycle = on_cycle
        self._sock: socket.socket | None = None
        self._rx: deque = deque(maxlen=64)
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._last_seen_seq: dict = {}  # per sender address
        self.port: int | None = None

    def start(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.bind((self.host, self.requested_port))
        except OSError:
            sock.close()
            raise
        sock.settimeout(0.2)
        self._sock = sock
        self.port = sock.getsockname()[1]
        self._stop.clear()
        for fn in (self._recv_loop, self._cycle_loop):
            t = threading.Thread(target=fn, daemon=True, name=fn.__name__)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        self._threads.clear()
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def _recv_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, addr = self._sock.recvfrom(2048)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                msg = decode(data)
            except DecodeError:
                continue
            if not isinstance(msg, Command):
                continue
            last = self._last_seen_seq.get(addr)
            if last is not None and not seq_newer(msg.seq, last):
                continue
            self._last_seen_seq[addr] = msg.seq
            self._rx.append((msg, addr))

    def _cycle_loop(self) -> None:
        ctrl = self.controller
        dt = self.dt
        fb_seq = 0
        client_addr = None
        latest: Command | None = None
        cycles_since_cmd = 0
        hold_cycles = self.hold_timeout_ms / 1000.0 / dt
        next_tick = time.perf_counter()
        while not self._stop.is_set():
            # drain the inbound queue; newest command wins
            arrivals = []
            while self._rx:
                arrivals.append(self._rx.popleft())
            if arrivals and ctrl.mode is Mode.DISCONNECTED:
                ctrl.connect()   # session handshake: first received command
            drained = False
            for cmd, addr in arrivals:
                # a different sender starts a fresh sequence space
                if (latest is None or addr != client_addr
                        or seq_newer(cmd.seq, latest.seq)):
                    latest = cmd
                    drained = True
                client_addr = addr
                if cmd.gripper != GRIPPER_HOLD:
                    try:
                        ctrl.gripper_command("open" if cmd.gripper == GRIPPER_OPEN
                                             else "close")
                    except ControllerRejected:
                        pass
            if drained:
                cycles_since_cmd = 0
            else:
                cycles_since_cmd += 1

            if ctrl.mode is not Mode.DISCONNECTED:
                target = latest.target if (latest is not None
                                           and cycles_since_cmd <= hold_cycles) else None
                ctrl.step(target, dt)
                snap = ctrl.snapshot()
                if client_addr is not None:
                    fb_seq += 1
                    fb = Feedback(fb_seq, monotonic_us(), snap.q_deg, snap.pose,
                                  _MODE_TO_STATE[snap.mode],
                                  latest.seq if latest is not None else 0)
                    try:
                        self._sock.sendto(encode_feedback(fb), client_addr)
                    except OSError:
                        pass
                if self.on_cycle is not None:
                    self.on_cycle(snap)

            next_tick += dt
            delay = next_tick - time.perf_counter()
            if delay > 0:
                # sleep coarsely, then spin the last stretch: scheduler wakeup
                # jitter would otherwise dominate the 4 ms tick budget; the
                # sleep(0) yields keep the GIL available to the receive thread
                if delay > 0.0010:
                    time.sleep(delay - 0.0008)
                while True:
                    remaining = next_tick - time.perf_counter()
                    if remaining <= 0:
                        break
                    if remaining > 5e-5:
                        time.sleep(0)
            elif delay < -1.0:
                next_tick = time.perf_counter()  # fell far behind; re-anchor


@dataclass
class SentCommand:
    target: RobotPose
    gripper: int
    t_send_us: int


class CommandSession:
    """Client-side endpoint: streams commands, receives feedback replies."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
                 on_feedback=None, sent_history: int = 4096):
        self.addr = (host, port)
        self.on_feedback = on_feedback
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind(("127.0.0.1", 0))
        self._sock.settimeout(0.2)
        self._seq = 0
        self._sent: dict[int, SentCommand] = {}
        self._sent_order: deque = deque()
        self._sent_history = sent_history
        self.latest_feedback: Feedback | None = None
        self._fb_event = threading.Event()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._recv_loop, daemon=True)
        self._thread.start()

    def send_target(self, pose: RobotPose, gripper: int = GRIPPER_HOLD) -> int:
        self._seq += 1
        cmd = Command(self._seq, monotonic_us(), pose, gripper)
        self._sock.sendto(encode_command(cmd), self.addr)
        self._sent[self._seq] = SentCommand(pose, gripper, cmd.timestamp_us)
        self._sent_order.append(self._seq)
        while len(self._sent_order) > self._sent_history:
            self._sent.pop(self._sent_order.popleft(), None)
        return self._seq

    def sent(self, seq: int) -> SentCommand | None:
        return self._sent.get(seq)

    def wait_feedback(self, predicate=None, timeout: float = 2.0) -> Feedback | None:
        """Block until a feedback satisfying the predicate arrives."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            self._fb_event.clear()
            fb = self.latest_feedback
            if fb is not None and (predicate is None or predicate(fb)):
                return fb
            self._fb_event.wait(timeout=0.05)
        return None

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)
        self._sock.close()

    def _recv_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, _ = self._sock.recvfrom(2048)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                msg = decode(data)
            except DecodeError:
                continue
            if not isinstance(msg, Feedback):
                continue
            self.latest_feedback = msg
            self._fb_event.set()
            if self.on_feedback is not None:
                self.on_feedback(msg)


def stream_targets(session: CommandSession, targets, rate_hz: float = DEFAULT_RATE_HZ,
                   gripper: int = GRIPPER_HOLD) -> int:
    """Send a finite target sequence at a fixed rate; returns the last seq."""
    dt = 1.0 / rate_hz
    next_send = time.perf_counter()
    last = 0
    for pose in targets:
        last = session.send_target(pose, gripper)
        next_send += dt
        delay = next_send - time.perf_counter()
        if delay > 0:
            time.sleep(delay)
    return last
