"""Cell runtime: wires the controller, UDP endpoint, monitor service, and
the optional synthetic depth camera into one start/stoppable unit."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from .config import CellConfig
from .controller import SimController
from .errors import ErrorLog
from .monitor import MonitorServer, SubscriptionTable, build_app, map_ctrl_state
from .pointcloud import (STREAM_MAX_FPS, STREAM_MAX_POINTS, Pipeline, SceneBox,
                         decimate, pack_points, synth_scene)
from .wire import WireServer


@dataclass
class SceneSpec:
    """Synthetic camera scene: plane depth plus optional boxes and noise."""

    plane_depth_mm: float = 600.0
    noise_sigma_mm: float = 0.0
    dropout_rate: float = 0.0
    boxes: list[SceneBox] = field(default_factory=list)
    width: int = 256
    height: int = 256
    seed: int = 0


def parse_scene_spec(text: str, seed: int = 0) -> SceneSpec:
    """Parse a --synth-scene value, e.g. ``plane:600,noise:5,dropout:0.05``
    with optional repeated ``box:u0-v0-u1-v1-depth`` tokens."""
    spec = SceneSpec(seed=seed)
    saw_plane = False
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        key, _, value = token.partition(":")
        if key == "plane":
            spec.plane_depth_mm = float(value)
            saw_plane = True
        elif key == "noise":
            spec.noise_sigma_mm = float(value)
        elif key == "dropout":
            spec.dropout_rate = float(value)
        elif key == "box":
            parts = [float(p) for p in value.split("-")]
            if len(parts) != 5:
                raise ValueError(f"box token needs u0-v0-u1-v1-depth, got {value!r}")
            spec.boxes.append(SceneBox(int(parts[0]), int(parts[1]),
                                       int(parts[2]), int(parts[3]), parts[4]))
        elif key == "size":
            w, _, h = value.partition("x")
            spec.width, spec.height = int(w), int(h)
        else:
            raise ValueError(f"unknown scene token {key!r}")
    if not saw_plane:
        raise ValueError("scene spec must include plane:<depth_mm>")
    return spec


class SynthCamera:
    """Background thread: synthetic frames -> pipeline -> decimated stream slot."""

    def __init__(self, spec: SceneSpec, pipeline_params, fps: float = 12.0,
                 max_points: int = STREAM_MAX_POINTS):
        self.spec = spec
        self.fps = min(float(fps), STREAM_MAX_FPS)
        self.max_points = max_points
        self._pipe = Pipeline(pipeline_params)
        self._latest: tuple[int, bytes] | None = None
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name="synth-camera")
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    def latest(self) -> tuple[int, bytes] | None:
        with self._lock:
            return self._latest

    def _run(self) -> None:
        s = self.spec
        frames = synth_scene(s.plane_depth_mm, s.boxes, s.noise_sigma_mm,
                             s.dropout_rate, s.seed, s.width, s.height)
        period = 1.0 / self.fps
        stamp = 0
        next_frame = time.perf_counter()
        for frame in frames:
            if self._stop.is_set():
                break
            cloud = self._pipe.process(frame)
            packed = pack_points(decimate(cloud.points, self.max_points))
            stamp += 1
            with self._lock:
                self._latest = (stamp, packed)
            next_frame += period
            delay = next_frame - time.perf_counter()
            if delay > 0:
                self._stop.wait(delay)
            else:
                next_frame = time.perf_counter()


class CellRuntime:
    """Controller + wire endpoint + monitor service (+ optional camera)."""

    def __init__(self, config: CellConfig | None = None, host: str = "127.0.0.1",
                 scene: SceneSpec | None = None, console_dir: str | None = None):
        self.config = config or CellConfig()
        cfg = self.config
        self.elog = ErrorLog()
        self.controller = SimController(model=cfg.arm, safety=cfg.safety,
                                        w_min=cfg.w_min, elog=self.elog)
        self.subscriptions = SubscriptionTable()
        self.elog.listeners.append(self._publish_error)
        self.controller.state_listeners.append(self._publish_state)
        self.wire_server = WireServer(self.controller, host=host,
                                      port=cfg.wire.port,
                                      rate_hz=cfg.wire.rate_hz,
                                      hold_timeout_ms=cfg.wire.hold_timeout_ms)
        self.monitor_server = MonitorServer(build_app(self, console_dir),
                                            host=host,
                                            port=cfg.monitor.http_port)
        self.camera = (SynthCamera(scene, cfg.pipeline) if scene is not None
                       else None)
        self.stream_max_fps = STREAM_MAX_FPS
        self.host = host
        self._last_ctrl_state: str | None = None

    def start(self) -> None:
        self.wire_server.start()
        try:
            self.monitor_server.start()
        except Exception:
            self.wire_server.stop()
            raise
        if self.camera is not None:
            self.camera.start()

    def stop(self) -> None:
        if self.camera is not None:
            self.camera.stop()
        self.monitor_server.stop()
        self.wire_server.stop()

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.monitor_server.port}"

    @property
    def ws_url(self) -> str:
        return f"ws://{self.host}:{self.monitor_server.port}"

    def latest_points(self) -> tuple[int, bytes] | None:
        return self.camera.latest() if self.camera is not None else None

    def _publish_error(self, event) -> None:
        self.subscriptions.publish(
            f"elog/{event.domain}",
            f"resource=elog/{event.domain} seqnum={event.seqnum}")

    def _publish_state(self, change) -> None:
        code = change.error.code if change.error else None
        mapped = map_ctrl_state(change.mode, code)
        if mapped == self._last_ctrl_state:
            return  # READY<->EXECUTING both map to motoron; push on change only
        self._last_ctrl_state = mapped
        self.subscriptions.publish(
            "panel/ctrl-state", f"resource=panel/ctrl-state state={mapped}")
