"""Cell configuration: dataclass defaults plus INI-file overrides.

Sections map to modules; keys follow the documented names, e.g.

    [frame]
    permutation = 0 0 1 -1 0 0 0 1 0
    [wire]
    port = 6510
    rate_hz = 250
    hold_timeout_ms = 500
    [safety]
    max_speed_deviation_mm_s = 50
    lp_cutoff_hz = 100
    max_orient_rate_deg_s = 25
    [kinematics]
    w_min = 1e-4
    [pointcloud]
    disparity_k = 32000
    [monitor]
    http_port = 8080
    [arm]
    dh = <six lines: a_mm alpha_rad d_mm theta_offset_rad>
    limits = <six lines: min_deg max_deg>
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .controller import SafetyConfig
from .frames import DEFAULT_PERMUTATION
from .kinematics import ArmModel, default_arm
from .pointcloud import PipelineParams
from .wire import DEFAULT_HOLD_TIMEOUT_MS, DEFAULT_PORT, DEFAULT_RATE_HZ


@dataclass
class WireConfig:
    port: int = DEFAULT_PORT
    rate_hz: float = DEFAULT_RATE_HZ
    hold_timeout_ms: float = DEFAULT_HOLD_TIMEOUT_MS


@dataclass
class MonitorConfig:
    http_port: int = 8080


@dataclass
class CellConfig:
    frame_permutation: tuple = DEFAULT_PERMUTATION
    wire: WireConfig = field(default_factory=WireConfig)
    safety: SafetyConfig = field(default_factory=SafetyConfig)
    w_min: float = 1e-4
    pipeline: PipelineParams = field(default_factory=PipelineParams)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    arm: ArmModel = field(default_factory=default_arm)


def _multiline_rows(text: str, n_cols: int) -> np.ndarray:
    rows = [[float(tok) for tok in line.split()]
            for line in text.strip().splitlines() if line.strip()]
    arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != n_cols:
        raise ValueError(f"expected rows of {n_cols} numbers")
    return arr


def load_config(path=None) -> CellConfig:
    cfg = CellConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    if parser.has_option("frame", "permutation"):
        vals = [int(tok) for tok in parser.get("frame", "permutation").split()]
        if len(vals) != 9:
            raise ValueError("frame.permutation needs nine signed integers")
        cfg.frame_permutation = tuple(tuple(vals[i:i + 3]) for i in (0, 3, 6))

    w = cfg.wire
    if parser.has_section("wire"):
        w.port = parser.getint("wire", "port", fallback=w.port)
        w.rate_hz = parser.getfloat("wire", "rate_hz", fallback=w.rate_hz)
        w.hold_timeout_ms = parser.getfloat("wire", "hold_timeout_ms",
                                            fallback=w.hold_timeout_ms)

    if parser.has_section("safety"):
        s = parser["safety"]
        cfg.safety = SafetyConfig(
            max_speed_deviation_mm_s=s.getfloat("max_speed_deviation_mm_s",
                                                cfg.safety.max_speed_deviation_mm_s),
            lp_cutoff_hz=s.getfloat("lp_cutoff_hz", cfg.safety.lp_cutoff_hz),
            max_orient_rate_deg_s=s.getfloat("max_orient_rate_deg_s",
                                             cfg.safety.max_orient_rate_deg_s),
            violation_factor=s.getfloat("violation_factor",
                                        cfg.safety.violation_factor),
            violation_window_ms=s.getfloat("violation_window_ms",
                                           cfg.safety.violation_window_ms),
        )

    cfg.w_min = parser.getfloat("kinematics", "w_min", fallback=cfg.w_min)

    if parser.has_section("pointcloud"):
        p = parser["pointcloud"]
        cfg.pipeline = PipelineParams(
            z_min_mm=p.getfloat("z_min_mm", cfg.pipeline.z_min_mm),
            z_max_mm=p.getfloat("z_max_mm", cfg.pipeline.z_max_mm),
            spatial_magnitude=p.getint("spatial_magnitude",
                                       cfg.pipeline.spatial_magnitude),
            spatial_alpha=p.getfloat("spatial_alpha", cfg.pipeline.spatial_alpha),
            spatial_delta=p.getfloat("spatial_delta", cfg.pipeline.spatial_delta),
            temporal_alpha=p.getfloat("temporal_alpha", cfg.pipeline.temporal_alpha),
            temporal_delta=p.getfloat("temporal_delta", cfg.pipeline.temporal_delta),
            persistence=p.getint("persistence", cfg.pipeline.persistence),
            disparity_k=p.getfloat("disparity_k", cfg.pipeline.disparity_k),
        )

    cfg.monitor.http_port = parser.getint("monitor", "http_port",
                                          fallback=cfg.monitor.http_port)

    if parser.has_section("arm"):
        dh = _multiline_rows(parser.get("arm", "dh"), 4)
        limits = _multiline_rows(parser.get("arm", "limits"), 2)
        name = parser.get("arm", "name", fallback="custom")
        cfg.arm = ArmModel(dh, limits, name)

    return cfg
