"""Depth-frame post-processing pipeline and point-cloud utilities.

Stage order: threshold -> disparity transform -> spatial filter ->
temporal filter -> inverse disparity transform -> pinhole deprojection.
Disparity d = K/z makes the delta-gated smoothing thresholds act
proportionally to depth.  Invalid pixels are 0 in both representations.

The spatial filter is a reconstruction of the edge-preserving recursive
smoother commonly used on depth sensors: per iteration, four 1-D passes
(rows left-to-right and right-to-left, columns top-to-bottom and
bottom-to-top); within a pass a pixel blends toward the previous output
only when their gap is below delta, and a single-pixel invalid gap between
two compatible valid neighbors is filled with the propagated value.

Also provides a deterministic synthetic depth-scene generator (the test
and demo stand-in for a physical depth camera), the on-disk frame
container, and the binary point-frame encoding used by the console stream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Intrinsics:
    fx: float = 180.0
    fy: float = 180.0
    cx: float = 128.0
    cy: float = 128.0


@dataclass
class DepthFrame:
    """Row-major depth image in millimeters; 0 marks an invalid pixel."""

    depth: np.ndarray
    intrinsics: Intrinsics = field(default_factory=Intrinsics)
    frame_index: int = 0

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=float)
        if self.depth.ndim != 2:
            raise ValueError("depth must be a 2-D array")
        if np.any(self.depth < 0):
            raise ValueError("depth values must be >= 0")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.depth > 0


@dataclass
class DisparityFrame:
    """Same layout as DepthFrame with values d = K/z; 0 marks invalid."""

    disp: np.ndarray
    intrinsics: Intrinsics = field(default_factory=Intrinsics)
    frame_index: int = 0

    @property
    def valid(self) -> np.ndarray:
        return self.disp > 0


@dataclass
class PointCloud:
    """3-D points (x, y, z) in camera frame, millimeters."""

    points: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class PipelineParams:
    z_min_mm: float = 0.0
    z_max_mm: float = 1000.0
    spatial_magnitude: int = 2
    spatial_alpha: float = 0.5
    spatial_delta: float = 20.0
    temporal_alpha: float = 0.4
    temporal_delta: float = 20.0
    persistence: int = 3
    disparity_k: float = 32000.0

    def __post_init__(self):
        for name in ("spatial_alpha", "temporal_alpha"):
            a = getattr(self, name)
            if not 0.0 < a <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {a}")
        if self.spatial_delta <= 0 or self.temporal_delta <= 0:
            raise ValueError("delta must be > 0")
        if self.spatial_magnitude < 1:
            raise ValueError("magnitude must be >= 1")
        if self.persistence < 0:
            raise ValueError("persistence must be >= 0")
        if self.z_min_mm >= self.z_max_mm:
            raise ValueError("z_min must be < z_max")
        if self.disparity_k <= 0:
            raise ValueError("disparity constant must be > 0")


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def threshold_filter(frame: DepthFrame, z_min_mm: float, z_max_mm: float) -> DepthFrame:
    """Invalidate pixels outside [z_min, z_max]; in-range pixels pass unchanged."""
    if z_min_mm >= z_max_mm:
        raise ValueError("z_min must be < z_max")
    d = frame.depth
    keep = (d > 0) & (d >= z_min_mm) & (d <= z_max_mm)
    return DepthFrame(np.where(keep, d, 0.0), frame.intrinsics, frame.frame_index)


def to_disparity(frame: DepthFrame, k: float) -> DisparityFrame:
    if k <= 0:
        raise ValueError("disparity constant must be > 0")
    d = frame.depth
    with np.errstate(divide="ignore"):
        disp = np.where(d > 0, k / np.where(d > 0, d, 1.0), 0.0)
    return DisparityFrame(disp, frame.intrinsics, frame.frame_index)


def from_disparity(frame: DisparityFrame, k: float) -> DepthFrame:
    if k <= 0:
        raise ValueError("disparity constant must be > 0")
    v = frame.disp
    depth = np.where(v > 0, k / np.where(v > 0, v, 1.0), 0.0)
    return DepthFrame(depth, frame.intrinsics, frame.frame_index)


def _scan_pass(a: np.ndarray, alpha: float, delta: float, reverse: bool) -> None:
    """One recursive 1-D pass along axis 1, in place, vectorized across rows.

    Scan position j reads the already-written output at the previous scan
    position and this pass's untouched input at the next one, so in-place
    processing is exact.
    """
    n = a.shape[1]
    order = range(n - 2, -1, -1) if reverse else range(1, n)
    step = 1 if reverse else -1  # offset from j to the previous scan position
    for j in order:
        cur = a[:, j].copy()
        prev = a[:, j + step]
        valid = cur > 0
        pvalid = prev > 0
        smooth = valid & pvalid & (np.abs(prev - cur) < delta)
        out_valid = np.where(smooth, cur + alpha * (prev - cur), cur)
        jn = j - step  # next scan position, input not yet processed
        if 0 <= jn < n:
            nxt = a[:, jn]
            fill = (~valid) & pvalid & (nxt > 0) & (np.abs(prev - nxt) < delta)
            a[:, j] = np.where(valid, out_valid, np.where(fill, prev, 0.0))
        else:
            a[:, j] = np.where(valid, out_valid, 0.0)


def spatial_filter(frame: DisparityFrame, magnitude: int = 2, alpha: float = 0.5,
                   delta: float = 20.0) -> DisparityFrame:
    """Edge-preserving recursive smoothing with single-pixel hole filling."""
    a = np.array(frame.disp, dtype=float)
    for _ in range(magnitude):
        _scan_pass(a, alpha, delta, reverse=False)
        _scan_pass(a, alpha, delta, reverse=True)
        at = a.T
        _scan_pass(at, alpha, delta, reverse=False)
        _scan_pass(at, alpha, delta, reverse=True)
    return DisparityFrame(a, frame.intrinsics, frame.frame_index)


class TemporalFilter:
    """Per-pixel exponential blending with delta reset and invalid-hold.

    A valid pixel blends with its history when the gap is below delta and
    resets the history otherwise; an invalid pixel is back-filled from
    history for up to `persistence` consecutive misses, after which the
    history is dropped.
    """

    def __init__(self, alpha: float = 0.4, delta: float = 20.0, persistence: int = 3):
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if delta <= 0:
            raise ValueError("delta must be > 0")
        if persistence < 0:
            raise ValueError("persistence must be >= 0")
        self.alpha = float(alpha)
        self.delta = float(delta)
        self.persistence = int(persistence)
        self._hist: np.ndarray | None = None
        self._miss: np.ndarray | None = None

    def reset(self) -> None:
        self._hist = None
        self._miss = None

    def apply(self, frame: DisparityFrame) -> DisparityFrame:
        v = np.asarray(frame.disp, dtype=float)
        if self._hist is None:
            self._hist = np.zeros_like(v)
            self._miss = np.full(v.shape, self.persistence + 1, dtype=np.int64)
        if v.shape != self._hist.shape:
            raise ValueError("frame dimensions changed within a stream")
        hist = self._hist
        cur_valid = v > 0
        hist_valid = hist > 0
        self._miss = np.where(cur_valid, 0, self._miss + 1)
        blend = cur_valid & hist_valid & (np.abs(v - hist) < self.delta)
        hold = (~cur_valid) & hist_valid & (self._miss <= self.persistence)
        out = np.where(cur_valid,
                       np.where(blend, self.alpha * v + (1.0 - self.alpha) * hist, v),
                       np.where(hold, hist, 0.0))
        self._hist = out
        return DisparityFrame(out, frame.intrinsics, frame.frame_index)


def deproject(frame: DepthFrame) -> PointCloud:
    """Pinhole back-projection of valid pixels, row-major scan order."""
    z = frame.depth
    mask = z > 0
    vv, uu = np.nonzero(mask)
    zz = z[mask]
    ii = frame.intrinsics
    x = (uu - ii.cx) * zz / ii.fx
    y = (vv - ii.cy) * zz / ii.fy
    return PointCloud(np.column_stack([x, y, zz]))


class Pipeline:
    """Stateful per-stream pipeline; frames must be processed in order."""

    def __init__(self, params: PipelineParams | None = None):
        self.params = params or PipelineParams()
        self._temporal = TemporalFilter(self.params.temporal_alpha,
                                        self.params.temporal_delta,
                                        self.params.persistence)
        self.last_depth: DepthFrame | None = None

    def reset(self) -> None:
        self._temporal.reset()
        self.last_depth = None

    def process(self, frame: DepthFrame) -> PointCloud:
        p = self.params
        f = threshold_filter(frame, p.z_min_mm, p.z_max_mm)
        d = to_disparity(f, p.disparity_k)
        d = spatial_filter(d, p.spatial_magnitude, p.spatial_alpha, p.spatial_delta)
        d = self._temporal.apply(d)
        self.last_depth = from_disparity(d, p.disparity_k)
        return deproject(self.last_depth)


def run_pipeline(frames, params: PipelineParams | None = None):
    """Map a depth-frame stream to a point-cloud stream (one pipeline state)."""
    pipe = Pipeline(params)
    for frame in frames:
        yield pipe.process(frame)


# ---------------------------------------------------------------------------
# synthetic scene generator
# ---------------------------------------------------------------------------

@dataclass
class SceneBox:
    """Image-axis-aligned rectangle [u0, u1) x [v0, v1) at a constant depth."""

    u0: int
    v0: int
    u1: int
    v1: int
    depth_mm: float


def synth_scene(plane_depth_mm: float, boxes: list[SceneBox] | None = None,
                noise_sigma_mm: float = 0.0, dropout_rate: float = 0.0,
                seed: int = 0, width: int = 256, height: int = 256,
                intrinsics: Intrinsics | None = None, n_frames: int | None = None):
    """Deterministic stream of synthetic depth frames.

    Background plane plus boxes, per-pixel gaussian noise, and random
    invalid dropout; identical seeds yield identical streams.
    """
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must be in [0, 1)")
    rng = np.random.default_rng(seed)
    intrinsics = intrinsics or Intrinsics(cx=width / 2.0, cy=height / 2.0)
    base = np.full((height, width), float(plane_depth_mm))
    for b in boxes or []:
        base[b.v0:b.v1, b.u0:b.u1] = float(b.depth_mm)
    index = 0
    while n_frames is None or index < n_frames:
        d = base.copy()
        if noise_sigma_mm > 0:
            d = d + rng.normal(0.0, noise_sigma_mm, size=d.shape)
        if dropout_rate > 0:
            d = np.where(rng.random(d.shape) < dropout_rate, 0.0, d)
        yield DepthFrame(np.maximum(d, 0.0), intrinsics, index)
        index += 1


# ---------------------------------------------------------------------------
# wire encodings: stream frames and the on-disk frame container
# ---------------------------------------------------------------------------

STREAM_MAX_POINTS = 20000
STREAM_MAX_FPS = 15.0


def decimate(points: np.ndarray, max_points: int = STREAM_MAX_POINTS) -> np.ndarray:
    points = np.asarray(points).reshape(-1, 3)
    n = points.shape[0]
    if n <= max_points:
        return points
    stride = -(-n // max_points)  # ceil
    return points[::stride]


def pack_points(points: np.ndarray) -> bytes:
    """Binary stream frame: u32 count + count * 3 * f32 xyz, little-endian."""
    pts = np.ascontiguousarray(np.asarray(points, dtype="<f4").reshape(-1, 3))
    return struct.pack("<I", pts.shape[0]) + pts.tobytes()


def unpack_points(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise ValueError("stream frame shorter than its count header")
    (count,) = struct.unpack_from("<I", data, 0)
    need = 4 + count * 12
    if len(data) != need:
        raise ValueError(f"stream frame length {len(data)} != expected {need}")
    return np.frombuffer(data, dtype="<f4", offset=4).reshape(count, 3)


_FRAME_MAGIC = b"DPF1"
_FRAME_HEADER = struct.Struct("<4sIIffffI")  # magic, w, h, fx, fy, cx, cy, index


def write_depth_file(path, frames) -> int:
    """Write frames to the depth-corpus container; returns the frame count.

    Per frame: a fixed header (dimensions, intrinsics, frame index) followed
    by width*height little-endian u16 depth values in millimeters.
    """
    count = 0
    with open(path, "wb") as fh:
        for f in frames:
            ii = f.intrinsics
            fh.write(_FRAME_HEADER.pack(_FRAME_MAGIC, f.width, f.height,
                                        ii.fx, ii.fy, ii.cx, ii.cy, f.frame_index))
            fh.write(np.clip(np.rint(f.depth), 0, 65535).astype("<u2").tobytes())
            count += 1
    return count


def read_depth_file(path) -> list[DepthFrame]:
    frames = []
    with open(path, "rb") as fh:
        while True:
            head = fh.read(_FRAME_HEADER.size)
            if not head:
                break
            if len(head) < _FRAME_HEADER.size:
                raise ValueError("truncated frame header")
            magic, w, h, fx, fy, cx, cy, idx = _FRAME_HEADER.unpack(head)
            if magic != _FRAME_MAGIC:
                raise ValueError(f"bad frame magic {magic!r}")
            raw = fh.read(w * h * 2)
            if len(raw) < w * h * 2:
                raise ValueError("truncated frame payload")
            depth = np.frombuffer(raw, dtype="<u2").reshape(h, w).astype(float)
            frames.append(DepthFrame(depth, Intrinsics(fx, fy, cx, cy), idx))
    return frames
