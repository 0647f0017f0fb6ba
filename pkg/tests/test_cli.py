import socket
import subprocess
import sys
import time

import httpx
import numpy as np
import pytest
from websockets.sync.client import connect as ws_connect

from telecell import kinematics as kin
from telecell import session as ses
from telecell.pointcloud import unpack_points

from conftest import free_port, spawn_cell, stop_cell

HOME = kin.fk(kin.default_arm(), kin.HOME_Q_DEG)


def run_cli(*args, timeout=60):
    return subprocess.run([sys.executable, "-m", "telecell", *args],
                          capture_output=True, text=True, timeout=timeout)


def fmt_pose_line(pos, ori=None) -> str:
    line = f"{pos[0]:.3f} {pos[1]:.3f} {pos[2]:.3f}"
    if ori is not None:
        line += f" {ori[0]:.9f} {ori[1]:.9f} {ori[2]:.9f} {ori[3]:.9f}"
    return line


@pytest.fixture(scope="module")
def running_cell():
    proc, wire_port, http_port = spawn_cell()
    yield wire_port, http_port
    assert stop_cell(proc) == 0  # clean shutdown on signal


# ---------------------------------------------------------------------------
# cell run
# ---------------------------------------------------------------------------

def test_run_binds_both_ports(running_cell):
    wire_port, http_port = running_cell
    resp = httpx.get(f"http://127.0.0.1:{http_port}/rw/panel/ctrl-state")
    assert resp.status_code == 200
    # UDP port answers the wire protocol
    from telecell import wire
    sess = wire.CommandSession("127.0.0.1", wire_port)
    try:
        sess.send_target(HOME)
        assert sess.wait_feedback(timeout=2.0) is not None
    finally:
        sess.close()


def test_run_port_collision_exit_2():
    holder = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    holder.bind(("127.0.0.1", 0))
    port = holder.getsockname()[1]
    try:
        r = run_cli("run", "--wire-port", str(port),
                    "--http-port", str(free_port()), timeout=30)
        assert r.returncode == 2
        assert str(port) in r.stderr
    finally:
        holder.close()


def test_run_with_synth_scene_streams_points():
    proc, _, http_port = spawn_cell("--synth-scene", "plane:600", "--seed", "3")
    try:
        with ws_connect(f"ws://127.0.0.1:{http_port}/stream/points",
                        open_timeout=5) as ws:
            frame = ws.recv(timeout=5)
        pts = unpack_points(frame)
        assert len(pts) > 1000
        assert np.all(np.abs(pts[:, 2] - 600.0) < 5.0)
    finally:
        stop_cell(proc)


def test_unknown_flag_rejected():
    r = run_cli("run", "--bogus-flag", timeout=30)
    assert r.returncode == 2


def test_bad_scene_spec_exit_2():
    r = run_cli("run", "--synth-scene", "cube:5", timeout=30)
    assert r.returncode == 2


# ---------------------------------------------------------------------------
# cell teleop
# ---------------------------------------------------------------------------

def test_teleop_square_path_records_session(running_cell, tmp_path):
    wire_port, _ = running_cell
    ori = HOME.orientation
    p = HOME.position
    square = [p + np.array([0.0, 20.0, 0.0]),
              p + np.array([0.0, 20.0, 20.0]),
              p + np.array([0.0, 0.0, 20.0]),
              p.copy()]
    lines = ["# square demonstration", "annotate complete"]
    lines += [fmt_pose_line(w, ori) for w in square]
    wp = tmp_path / "square.waypoints"
    wp.write_text("\n".join(lines) + "\n")
    out = tmp_path / "square.session"

    r = run_cli("teleop", str(wp), "--wire-port", str(wire_port),
                "--record", str(out), timeout=120)
    assert r.returncode == 0, r.stderr
    header, records, warnings = ses.read_session(out)
    assert header["version"] == "1"
    assert not warnings
    final = records[-1].actual.position
    assert np.linalg.norm(final - square[-1]) < 0.5
    assert any(rec.annotation == "complete" for rec in records)


def test_teleop_gripper_directive(running_cell, tmp_path):
    wire_port, http_port = running_cell
    wp = tmp_path / "grip.waypoints"
    wp.write_text(fmt_pose_line(HOME.position, HOME.orientation) + "\n"
                  "gripper close\n"
                  + fmt_pose_line(HOME.position + np.array([0, 5.0, 0]),
                                  HOME.orientation) + "\n")
    out = tmp_path / "grip.session"
    r = run_cli("teleop", str(wp), "--wire-port", str(wire_port),
                "--record", str(out), timeout=60)
    assert r.returncode == 0, r.stderr
    _, records, _ = ses.read_session(out)
    assert records[-1].gripper == "closed"


def test_teleop_unreachable_waypoint_fails(tmp_path):
    # fresh cell so the ERROR does not leak into other tests
    proc, wire_port, http_port = spawn_cell()
    try:
        wp = tmp_path / "far.waypoints"
        wp.write_text(fmt_pose_line(HOME.position, HOME.orientation) + "\n"
                      + fmt_pose_line([4000.0, 0.0, 700.0], HOME.orientation) + "\n")
        out = tmp_path / "far.session"
        r = run_cli("teleop", str(wp), "--wire-port", str(wire_port),
                    "--record", str(out), "--waypoint-timeout-s", "60",
                    timeout=180)
        assert r.returncode == 1
        _, records, _ = ses.read_session(out)
        assert any(rec.mode == "error" for rec in records)
    finally:
        stop_cell(proc)


def test_teleop_bad_waypoint_file(tmp_path, running_cell):
    wire_port, _ = running_cell
    wp = tmp_path / "bad.waypoints"
    wp.write_text("1.0 2.0\n")
    r = run_cli("teleop", str(wp), "--wire-port", str(wire_port), timeout=30)
    assert r.returncode == 2


# ---------------------------------------------------------------------------
# cell fault
# ---------------------------------------------------------------------------

def test_fault_cli_emergencystop(tmp_path):
    proc, wire_port, http_port = spawn_cell()
    try:
        r = run_cli("fault", "90518", "--http-port", str(http_port), timeout=30)
        assert r.returncode == 0
        assert "state=emergencystop" in r.stdout
        r2 = run_cli("fault", "12345", "--http-port", str(http_port), timeout=30)
        assert r2.returncode == 2
    finally:
        stop_cell(proc)


# ---------------------------------------------------------------------------
# cell replay
# ---------------------------------------------------------------------------

def test_replay_cli_double_speed(running_cell, tmp_path):
    wire_port, _ = running_cell
    path = tmp_path / "r.session"
    from telecell.frames import RobotPose
    with ses.SessionWriter(path) as w:
        for k in range(250):
            pose = RobotPose(HOME.position, HOME.orientation)
            w.write(ses.SessionRecord(1000 + 4000 * k, k + 1, pose, pose,
                                      kin.HOME_Q_DEG, "open", "ready"))
    span = 4000 * 249 / 1e6
    t0 = time.monotonic()
    r = run_cli("replay", str(path), "--wire-port", str(wire_port),
                "--speed", "2", timeout=60)
    assert r.returncode == 0
    reported = float(r.stdout.split("replayed in ")[1].split("s")[0])
    assert reported == pytest.approx(span / 2, rel=0.02)
    assert time.monotonic() - t0 < span  # actually ran faster than realtime


def test_replay_cli_bad_file(tmp_path):
    path = tmp_path / "junk.session"
    path.write_text("garbage\n")
    r = run_cli("replay", str(path), timeout=30)
    assert r.returncode == 1
    assert "error" in r.stderr


# ---------------------------------------------------------------------------
# cell analyze
# ---------------------------------------------------------------------------

def test_analyze_sus_prints_scores_and_mean(tmp_path):
    path = tmp_path / "sus.csv"
    path.write_text("3,3,3,3,3,3,3,3,3,3\n5,1,5,1,5,1,5,1,5,1\n")
    r = run_cli("analyze", "sus", str(path), timeout=30)
    assert r.returncode == 0
    lines = r.stdout.strip().splitlines()
    assert lines[0].endswith("50.0")
    assert lines[1].endswith("100.0")
    assert lines[2] == "mean: 75.00"


def test_analyze_compare_prints_statistics():
    r = run_cli("analyze", "compare", "70.5", "23.14", "5", "63.0", "17.54", "5",
                timeout=30)
    assert r.returncode == 0
    assert "t=0.578" in r.stdout
    assert "d=0.37" in r.stdout


def test_analyze_metrics(tmp_path):
    from telecell.frames import RobotPose
    path = tmp_path / "m.session"
    pose = RobotPose(np.array([1.0, 2.0, 3.0]))
    with ses.SessionWriter(path) as w:
        for k, note in enumerate(["complete", "complete", "minor", None]):
            w.write(ses.SessionRecord(1000 + k * 1_000_000, k + 1, pose, pose,
                                      np.zeros(6), "open", "ready", note))
    r = run_cli("analyze", "metrics", str(path), "--limit-s", "180", timeout=30)
    assert r.returncode == 0
    assert "n_max=2 e_minor=1 e_major=0" in r.stdout
