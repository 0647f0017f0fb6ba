"""Monitoring service: HTTP resources, push subscriptions, fault injection.

All request/response bodies are line-delimited structured text: space
separated key=value tokens, one record per line.  Subscribers POST
/subscription with the resources they want, then attach to the push
channel at /poll/{id} (WebSocket upgrade); events carry only the elog
seqnum (or the mapped ctrl-state) and detail is fetched with a second
GET, mirroring the two-step retrieval the controller protocol requires.

Endpoints:
  GET    /rw/panel/ctrl-state          -> state=<init|motoron|motoroff|emergencystop>
  POST   /rw/panel/ctrl-state          body action=<connect|disconnect|restart>
  POST   /subscription                 body resources=<r1,r2,...>  -> 201 id=...
  GET    /subscription                 -> one `subscription id=... resources=...` line each
  DELETE /subscription/{id}            -> 200 deleted=... | 404
  GET    /rw/elog/{domain}/{seqnum}    -> error detail lines | 404
  POST   /fault/{code}                 -> 202 (one of the five known codes)
  POST   /gripper                      body action=<open|close> -> 200 | 409 in ERROR
  WS     /poll/{id}                    push channel (text event lines)
  WS     /relay/pose                   browser-to-wire pose relay (text lines in,
                                       periodic `state ...` lines out)
  WS     /stream/points                binary point frames (u32 count + f32 xyz)
"""

from __future__ import annotations

import asyncio
import queue
import re
import secrets
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from . import wire
from .controller import ActiveError, ControllerRejected, Mode
from .errors import KNOWN_FAULT_CODES
from .frames import RobotPose

KNOWN_RESOURCES = frozenset({"panel/ctrl-state", "elog/5", "elog/9"})

EVENT_QUEUE_SIZE = 256


def map_ctrl_state(mode: Mode, error_code: int | None = None) -> str:
    if mode is Mode.DISCONNECTED:
        return "init"
    if mode in (Mode.READY, Mode.EXECUTING):
        return "motoron"
    return "emergencystop" if error_code == 90518 else "motoroff"


def parse_kv_line(line: str) -> dict:
    out = {}
    for tok in line.strip().split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            out[k] = v
    return out


def parse_kv_body(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        out.update(parse_kv_line(line))
    return out


# ---------------------------------------------------------------------------
# subscription table
# ---------------------------------------------------------------------------

@dataclass
class LiveSubscription:
    id: str
    resources: frozenset
    created_at_us: int
    events: queue.Queue = field(default_factory=lambda: queue.Queue(EVENT_QUEUE_SIZE))
    attached: bool = False
    overflowed: bool = False

    def listing_line(self) -> str:
        return (f"subscription id={self.id} "
                f"resources={','.join(sorted(self.resources))} "
                f"created_at_us={self.created_at_us}")


class SubscriptionTable:
    def __init__(self):
        self._lock = threading.Lock()
        self._subs: dict[str, LiveSubscription] = {}

    def create(self, resources) -> LiveSubscription:
        resources = frozenset(resources)
        unknown = resources - KNOWN_RESOURCES
        if not resources or unknown:
            raise ValueError(f"unknown resources: {sorted(unknown)}" if unknown
                             else "no resources requested")
        sub = LiveSubscription(secrets.token_hex(8), resources,
                               time.time_ns() // 1000)
        with self._lock:
            self._subs[sub.id] = sub
        return sub

    def get(self, sub_id: str) -> LiveSubscription | None:
        with self._lock:
            return self._subs.get(sub_id)

    def delete(self, sub_id: str) -> bool:
        with self._lock:
            return self._subs.pop(sub_id, None) is not None

    def list(self) -> list[LiveSubscription]:
        with self._lock:
            return list(self._subs.values())

    def publish(self, resource: str, line: str) -> None:
        """Fan an event line out to every matching subscription.

        Never blocks the caller: a full queue marks the subscriber
        overflowed and its push connection is closed on next poll.
        """
        for sub in self.list():
            if resource in sub.resources:
                try:
                    sub.events.put_nowait(line)
                except queue.Full:
                    sub.overflowed = True


# ---------------------------------------------------------------------------
# service application
# ---------------------------------------------------------------------------

def build_app(runtime, console_dir=None):
    """FastAPI app over a CellRuntime; optionally serves the built console."""
    app = FastAPI(title="cell monitor", docs_url=None, redoc_url=None)
    ctrl = runtime.controller
    table = runtime.subscriptions

    if console_dir is not None:
        import os.path

        from fastapi.responses import FileResponse
        from fastapi.staticfiles import StaticFiles

        index = os.path.join(console_dir, "index.html")
        dist = os.path.join(console_dir, "dist")
        if os.path.isfile(index):
            @app.get("/")
            def console_index():
                return FileResponse(index)
        if os.path.isdir(dist):
            app.mount("/dist", StaticFiles(directory=dist), name="console")

    def text(body: str, status: int = 200) -> PlainTextResponse:
        return PlainTextResponse(body, status_code=status)

    @app.get("/rw/panel/ctrl-state")
    def get_ctrl_state():
        snap = ctrl.snapshot()
        code = snap.error.code if snap.error else None
        return text(f"state={map_ctrl_state(snap.mode, code)}\n")

    @app.post("/rw/panel/ctrl-state")
    async def post_ctrl_state(request: Request):
        body = parse_kv_body((await request.body()).decode())
        action = body.get("action")
        if action == "connect":
            ctrl.connect()
        elif action == "disconnect":
            ctrl.disconnect()
        elif action == "restart":
            ctrl.restart()
        else:
            return text(f"error=unknown action {action!r}\n", 400)
        snap = ctrl.snapshot()
        code = snap.error.code if snap.error else None
        return text(f"state={map_ctrl_state(snap.mode, code)}\n")

    @app.post("/subscription")
    async def create_subscription(request: Request):
        body = parse_kv_body((await request.body()).decode())
        resources = [r for r in body.get("resources", "").split(",") if r]
        try:
            sub = table.create(resources)
        except ValueError as e:
            return text(f"error={e}\n", 400)
        return text(f"id={sub.id}\npoll=/poll/{sub.id}\n", 201)

    @app.get("/subscription")
    def list_subscriptions():
        lines = [s.listing_line() for s in table.list()]
        return text("".join(line + "\n" for line in lines))

    @app.delete("/subscription/{sub_id}")
    def delete_subscription(sub_id: str):
        if table.delete(sub_id):
            return text(f"deleted={sub_id}\n")
        return text("error=unknown subscription\n", 404)

    @app.get("/rw/elog/{domain}/{seqnum}")
    def get_elog_detail(domain: int, seqnum: int):
        event = runtime.elog.get(domain, seqnum)
        if event is None:
            return text("error=unknown seqnum\n", 404)
        return text(event.detail_text())

    @app.post("/fault/{code}")
    def inject_fault(code: int):
        if code not in KNOWN_FAULT_CODES:
            return text(f"error=unknown fault code {code}\n", 400)
        event = ctrl.inject_fault(code)
        return text(f"accepted={code}\nseqnum={event.seqnum}\n", 202)

    @app.post("/gripper")
    async def gripper(request: Request):
        body = parse_kv_body((await request.body()).decode())
        action = body.get("action")
        if action not in ("open", "close"):
            return text(f"error=unknown action {action!r}\n", 400)
        try:
            state = ctrl.gripper_command(action)
        except ActiveError as e:
            return text(f"error=active fault: {e}\n", 409)
        except ControllerRejected as e:
            return text(f"error={e}\n", 409)
        return text(f"gripper={state.value}\n")

    # -- push channel -------------------------------------------------------

    @app.websocket("/poll/{sub_id}")
    async def poll(ws: WebSocket, sub_id: str):
        sub = table.get(sub_id)
        if sub is None:
            await ws.close(code=4404)
            return
        if sub.attached:
            await ws.close(code=4409)
            return
        sub.attached = True
        await ws.accept()
        recv_task = asyncio.ensure_future(ws.receive())
        try:
            while not sub.overflowed:
                if recv_task.done():
                    msg = recv_task.result()
                    if msg.get("type") == "websocket.disconnect":
                        break
                    recv_task = asyncio.ensure_future(ws.receive())
                try:
                    line = sub.events.get_nowait()
                except queue.Empty:
                    await asyncio.sleep(0.02)
                    continue
                await ws.send_text(line)
            if sub.overflowed:
                await ws.close(code=1013)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            recv_task.cancel()
            sub.attached = False

    # -- pose relay (browser transport cannot emit UDP) ----------------------

    @app.websocket("/relay/pose")
    async def relay_pose(ws: WebSocket):
        await ws.accept()
        session = wire.CommandSession("127.0.0.1", runtime.wire_server.port)
        gripper_state = None

        def state_line() -> str:
            snap = ctrl.snapshot()
            p, o = snap.pose.position, snap.pose.orientation
            code = snap.error.code if snap.error else 0
            return (f"state mode={snap.mode.value} "
                    f"ctrl={map_ctrl_state(snap.mode, code or None)} "
                    f"x={p[0]:.3f} y={p[1]:.3f} z={p[2]:.3f} "
                    f"qw={o[0]:.6f} qx={o[1]:.6f} qy={o[2]:.6f} qz={o[3]:.6f} "
                    f"gripper={snap.gripper.value} error={code}")

        recv_task = asyncio.ensure_future(ws.receive_text())
        last_push = 0.0
        try:
            await ws.send_text(state_line())
            while True:
                if recv_task.done():
                    try:
                        msg = recv_task.result()
                    except (WebSocketDisconnect, RuntimeError):
                        break
                    recv_task = asyncio.ensure_future(ws.receive_text())
                    kv = parse_kv_line(msg)
                    if msg.startswith("target "):
                        try:
                            pose = RobotPose(
                                np.array([float(kv["x"]), float(kv["y"]), float(kv["z"])]),
                                np.array([float(kv["qw"]), float(kv["qx"]),
                                          float(kv["qy"]), float(kv["qz"])]))
                        except (KeyError, ValueError):
                            await ws.send_text("error=malformed target line")
                            continue
                        action = wire.GRIPPER_HOLD
                        if kv.get("gripper") in ("open", "close") and kv["gripper"] != gripper_state:
                            gripper_state = kv["gripper"]
                            action = (wire.GRIPPER_OPEN if gripper_state == "open"
                                      else wire.GRIPPER_CLOSE)
                        try:
                            session.send_target(pose, action)
                        except wire.EncodeError as e:
                            await ws.send_text(f"error={e}")
                    elif msg.strip() == "reset":
                        await ws.send_text(state_line())
                now = time.monotonic()
                if now - last_push >= 0.05:
                    last_push = now
                    await ws.send_text(state_line())
                await asyncio.sleep(0.005)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            recv_task.cancel()
            session.close()

    # -- decimated point-cloud stream ----------------------------------------

    @app.websocket("/stream/points")
    async def stream_points(ws: WebSocket):
        await ws.accept()
        recv_task = asyncio.ensure_future(ws.receive())
        last_stamp = None
        interval = 1.0 / runtime.stream_max_fps
        try:
            while True:
                if recv_task.done():
                    msg = recv_task.result()
                    if msg.get("type") == "websocket.disconnect":
                        break
                    recv_task = asyncio.ensure_future(ws.receive())
                latest = runtime.latest_points()
                if latest is not None and latest[0] != last_stamp:
                    last_stamp = latest[0]
                    await ws.send_bytes(latest[1])
                await asyncio.sleep(interval)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            recv_task.cancel()

    return app


# ---------------------------------------------------------------------------
# service runner
# ---------------------------------------------------------------------------

class MonitorServer:
    """uvicorn in a daemon thread; resolves the actual bound port."""

    def __init__(self, app, host: str = "127.0.0.1", port: int = 8080):
        import uvicorn

        self._config = uvicorn.Config(app, host=host, port=port,
                                      log_level="warning", ws="auto")
        self._server = uvicorn.Server(self._config)
        self._thread: threading.Thread | None = None
        self.host = host
        self.port: int | None = None

    def start(self, timeout: float = 10.0) -> None:
        self._thread = threading.Thread(target=self._server.run, daemon=True,
                                        name="monitor-http")
        self._thread.start()
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self._server.started:
                break
            if not self._thread.is_alive():
                raise OSError(f"monitor service failed to bind "
                              f"{self.host}:{self._config.port}")
            time.sleep(0.01)
        else:
            raise TimeoutError("monitor service did not start in time")
        self.port = self._server.servers[0].sockets[0].getsockname()[1]

    def stop(self) -> None:
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None


# ---------------------------------------------------------------------------
# client helpers
# ---------------------------------------------------------------------------

SUB_ID_PATTERN = re.compile(r"\bid=([0-9a-f]+)\b")


def list_subscription_ids(base_url: str, client=None) -> list[str]:
    """Scrape live subscription ids out of the listing by pattern match."""
    import httpx

    own = client is None
    client = client or httpx.Client()
    try:
        resp = client.get(f"{base_url}/subscription")
        resp.raise_for_status()
        return SUB_ID_PATTERN.findall(resp.text)
    finally:
        if own:
            client.close()


def cleanup_subscriptions(base_url: str, client=None) -> int:
    """Delete every live subscription; returns how many were removed.

    A 404 on delete counts as already gone so cleanup is safe to race.
    """
    import httpx

    own = client is None
    client = client or httpx.Client()
    try:
        ids = list_subscription_ids(base_url, client)
        for sub_id in ids:
            resp = client.delete(f"{base_url}/subscription/{sub_id}")
            if resp.status_code not in (200, 404):
                resp.raise_for_status()
        return len(ids)
    finally:
        if own:
            client.close()


def create_subscription(base_url: str, resources, client=None) -> tuple[str, str]:
    """POST a subscription; returns (id, poll path)."""
    import httpx

    own = client is None
    client = client or httpx.Client()
    try:
        resp = client.post(f"{base_url}/subscription",
                           content=f"resources={','.join(resources)}")
        resp.raise_for_status()
        kv = parse_kv_body(resp.text)
        return kv["id"], kv["poll"]
    finally:
        if own:
            client.close()
