import socket
import subprocess
import sys
import time

import httpx
import numpy as np
import pytest

from telecell.config import CellConfig
from telecell.monitor import cleanup_subscriptions
from telecell.runtime import CellRuntime


def random_unit_quat(rng) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def spawn_cell(*extra_args, wire_port=None, http_port=None, timeout=15.0):
    """Start `cell run` in a subprocess and wait until its services answer."""
    wire_port = wire_port or free_port()
    http_port = http_port or free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "telecell", "run",
         "--wire-port", str(wire_port), "--http-port", str(http_port),
         *extra_args],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if proc.poll() is not None:
            out, err = proc.communicate()
            raise RuntimeError(f"cell run exited {proc.returncode}: {err}")
        try:
            httpx.get(f"http://127.0.0.1:{http_port}/rw/panel/ctrl-state",
                      timeout=0.5)
            return proc, wire_port, http_port
        except httpx.HTTPError:
            time.sleep(0.05)
    proc.kill()
    raise TimeoutError("cell run did not become ready")


def stop_cell(proc) -> int:
    proc.terminate()
    try:
        proc.wait(timeout=10.0)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait(timeout=5.0)
    return proc.returncode


@pytest.fixture(scope="module")
def cell():
    """One runtime per test module, on ephemeral ports."""
    cfg = CellConfig()
    cfg.wire.port = 0
    cfg.monitor.http_port = 0
    rt = CellRuntime(cfg)
    rt.start()
    yield rt
    rt.stop()


@pytest.fixture()
def fresh_cell(cell):
    """Runtime reset to a clean disconnected state with no subscriptions."""
    cleanup_subscriptions(cell.base_url)
    cell.controller.restart()
    cell.controller.disconnect()
    yield cell
    cleanup_subscriptions(cell.base_url)
    cell.controller.restart()
    cell.controller.disconnect()
