"""cell: operational entry points for the teleoperation cell.

Subcommands: run (services), teleop (scripted waypoint client), fault
(inject a controller fault over HTTP), replay (re-stream a session file),
analyze (sus | compare | metrics).  Exit codes: 0 success, 1 runtime
error, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import signal
import sys
import threading
import time

import numpy as np

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_RUNTIME):
        super().__init__(message)
        self.code = code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cell")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="start controller sim + wire + monitor")
    run.add_argument("--config", help="INI config file")
    run.add_argument("--host", default="127.0.0.1")
    run.add_argument("--wire-port", type=int, help="UDP command port (default 6510)")
    run.add_argument("--http-port", type=int, help="monitor HTTP port (default 8080)")
    run.add_argument("--synth-scene",
                     help="synthetic camera, e.g. plane:600,noise:5,dropout:0.05")
    run.add_argument("--seed", type=int, default=0, help="RNG seed for synthetic parts")
    run.add_argument("--console-dir", default="frontend",
                     help="serve the built operator console from this directory")

    tel = sub.add_parser("teleop", help="stream a waypoint file, record the session")
    tel.add_argument("waypoints", help="waypoint file (x y z [qw qx qy qz] per line)")
    tel.add_argument("--host", default="127.0.0.1")
    tel.add_argument("--wire-port", type=int, default=6510)
    tel.add_argument("--record", help="write the demonstration session to this file")
    tel.add_argument("--rate-hz", type=float, default=250.0)
    tel.add_argument("--reach-tol-mm", type=float, default=0.3)
    tel.add_argument("--waypoint-timeout-s", type=float, default=20.0)

    flt = sub.add_parser("fault", help="inject a controller fault")
    flt.add_argument("code", type=int)
    flt.add_argument("--host", default="127.0.0.1")
    flt.add_argument("--http-port", type=int, default=8080)

    rep = sub.add_parser("replay", help="re-stream a recorded session")
    rep.add_argument("session", help="session file")
    rep.add_argument("--host", default="127.0.0.1")
    rep.add_argument("--wire-port", type=int, default=6510)
    rep.add_argument("--speed", type=float, default=1.0)

    ana = sub.add_parser("analyze", help="evaluation utilities")
    ana_sub = ana.add_subparsers(dest="analyze_command", required=True)
    sus = ana_sub.add_parser("sus", help="score SUS responses (10 csv ints per line)")
    sus.add_argument("file")
    cmp_ = ana_sub.add_parser("compare",
                              help="Welch t / Cohen d from summary statistics")
    cmp_.add_argument("stats", type=float, nargs=6, metavar="STAT",
                      help="mean1 sd1 n1 mean2 sd2 n2")
    met = ana_sub.add_parser("metrics", help="task metrics from an annotated session")
    met.add_argument("session")
    met.add_argument("--limit-s", type=float, default=180.0)

    return parser


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    from .config import load_config
    from .runtime import CellRuntime, parse_scene_spec

    # shorten GIL switch latency so the 4 ms control loop preempts promptly
    sys.setswitchinterval(0.001)
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as e:
        raise CliError(f"config error: {e}", EXIT_USAGE)
    if args.wire_port is not None:
        cfg.wire.port = args.wire_port
    if args.http_port is not None:
        cfg.monitor.http_port = args.http_port
    scene = None
    if args.synth_scene:
        try:
            scene = parse_scene_spec(args.synth_scene, seed=args.seed)
        except ValueError as e:
            raise CliError(f"bad --synth-scene: {e}", EXIT_USAGE)

    import os.path
    console_dir = args.console_dir if os.path.isdir(args.console_dir) else None
    runtime = CellRuntime(cfg, host=args.host, scene=scene, console_dir=console_dir)
    try:
        runtime.start()
    except OSError as e:
        port = cfg.wire.port if runtime.wire_server.port is None else cfg.monitor.http_port
        raise CliError(f"cannot bind port {port}: {e}", EXIT_USAGE)

    stop = threading.Event()

    def _signal(_sig, _frm):
        stop.set()

    signal.signal(signal.SIGINT, _signal)
    signal.signal(signal.SIGTERM, _signal)
    print(f"cell ready wire={runtime.wire_server.port} "
          f"http={runtime.monitor_server.port}", flush=True)
    try:
        stop.wait()
    finally:
        runtime.stop()
    return EXIT_OK


# ---------------------------------------------------------------------------
# teleop
# ---------------------------------------------------------------------------

def parse_waypoint_file(path):
    """Waypoint script: `x y z [qw qx qy qz]` moves, `gripper open|close`,
    `annotate <text>` directives; `#` comments."""
    from .frames import quat_normalize

    actions = []
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("annotate "):
                actions.append(("annotate", line[len("annotate "):]))
                continue
            if line.startswith("gripper "):
                action = line.split(None, 1)[1].strip()
                if action not in ("open", "close"):
                    raise ValueError(f"line {n}: gripper must be open|close")
                actions.append(("gripper", action))
                continue
            toks = line.split()
            if len(toks) not in (3, 7):
                raise ValueError(f"line {n}: expected 3 or 7 numbers")
            vals = [float(t) for t in toks]
            pos = np.array(vals[:3])
            ori = quat_normalize(vals[3:]) if len(vals) == 7 else None
            actions.append(("move", (pos, ori)))
    return actions


def cmd_teleop(args) -> int:
    from . import wire
    from .frames import RobotPose, quat_angle_deg
    from .session import SessionRecorder, SessionWriter

    try:
        actions = parse_waypoint_file(args.waypoints)
    except (OSError, ValueError) as e:
        raise CliError(f"waypoint file: {e}", EXIT_USAGE)

    writer = recorder = None
    if args.record:
        writer = SessionWriter(args.record)
    session = wire.CommandSession(args.host, args.wire_port)
    if writer is not None:
        recorder = SessionRecorder(writer, session)
        session.on_feedback = recorder.on_feedback

    dt = 1.0 / args.rate_hz
    exit_code = EXIT_OK
    try:
        # the first command establishes the session; aim at the current pose
        # once feedback arrives, so orientation-less waypoints stay natural
        orientation = None
        gripper_next = wire.GRIPPER_HOLD
        for kind, payload in actions:
            if kind == "annotate":
                if writer is not None:
                    writer.annotate(payload)
                continue
            if kind == "gripper":
                gripper_next = (wire.GRIPPER_OPEN if payload == "open"
                                else wire.GRIPPER_CLOSE)
                continue
            pos, ori = payload
            deadline = time.monotonic() + args.waypoint_timeout_s
            reached = False
            next_send = time.perf_counter()
            while time.monotonic() < deadline:
                fb = session.latest_feedback
                if ori is None:
                    orientation = (orientation if orientation is not None else
                                   (fb.actual.orientation.copy() if fb is not None
                                    else np.array([1.0, 0, 0, 0])))
                else:
                    orientation = ori
                target = RobotPose(pos, orientation)
                session.send_target(target, gripper_next)
                gripper_next = wire.GRIPPER_HOLD
                if fb is not None:
                    if fb.state == wire.STATE_ERROR:
                        print("controller entered ERROR; stopping", file=sys.stderr)
                        return EXIT_RUNTIME
                    if (np.linalg.norm(fb.actual.position - pos) <= args.reach_tol_mm
                            and quat_angle_deg(fb.actual.orientation, orientation) <= 0.5):
                        reached = True
                        break
                next_send += dt
                delay = next_send - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
            if not reached:
                print(f"waypoint {pos.tolist()} not reached within "
                      f"{args.waypoint_timeout_s}s", file=sys.stderr)
                exit_code = EXIT_RUNTIME
                break
        # let the last feedback drain into the recorder
        time.sleep(0.05)
    finally:
        session.close()
        if writer is not None:
            writer.close()
            print(f"recorded {writer.count} records to {writer.path}")
    return exit_code


# ---------------------------------------------------------------------------
# fault / replay / analyze
# ---------------------------------------------------------------------------

def cmd_fault(args) -> int:
    import httpx

    base = f"http://{args.host}:{args.http_port}"
    try:
        resp = httpx.post(f"{base}/fault/{args.code}", timeout=5.0)
    except httpx.HTTPError as e:
        raise CliError(f"monitor service unreachable: {e}")
    if resp.status_code == 400:
        raise CliError(f"unknown fault code {args.code}", EXIT_USAGE)
    if resp.status_code != 202:
        raise CliError(f"fault injection failed: HTTP {resp.status_code}")
    state = httpx.get(f"{base}/rw/panel/ctrl-state", timeout=5.0).text.strip()
    print(f"injected={args.code} {state}")
    return EXIT_OK


def cmd_replay(args) -> int:
    from .session import UnsupportedSchema, replay

    try:
        elapsed = replay(args.session, args.host, args.wire_port, args.speed)
    except UnsupportedSchema as e:
        raise CliError(f"cannot replay: {e}")
    except OSError as e:
        raise CliError(f"cannot replay: {e}")
    print(f"replayed in {elapsed:.3f}s at speed {args.speed}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    from . import analysis

    if args.analyze_command == "sus":
        try:
            responses = analysis.read_sus_file(args.file)
        except (OSError, ValueError) as e:
            raise CliError(f"sus file: {e}", EXIT_USAGE)
        if not responses:
            raise CliError("no responses in file", EXIT_USAGE)
        scores = [analysis.sus_score(r) for r in responses]
        for i, s in enumerate(scores, start=1):
            print(f"response {i}: {s:.1f}")
        print(f"mean: {float(np.mean(scores)):.2f}")
        return EXIT_OK

    if args.analyze_command == "compare":
        m1, s1, n1, m2, s2, n2 = args.stats
        try:
            res = analysis.welch_t(m1, s1, int(n1), m2, s2, int(n2))
            d = analysis.cohens_d(m1, s1, m2, s2)
        except ValueError as e:
            raise CliError(str(e), EXIT_USAGE)
        print(f"t={res.t:.3f} df={res.df:.2f} d={d:.2f}")
        return EXIT_OK

    from .session import UnsupportedSchema

    try:
        metrics = analysis.task_metrics(args.session, args.limit_s)
    except (OSError, UnsupportedSchema) as e:
        raise CliError(f"session file: {e}", EXIT_USAGE)
    print(f"n_max={metrics.n_max} e_minor={metrics.e_minor} e_major={metrics.e_major}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "teleop": cmd_teleop, "fault": cmd_fault,
                "replay": cmd_replay, "analyze": cmd_analyze}
    try:
        return handlers[args.command](args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
