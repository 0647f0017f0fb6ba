/** Console entry point: binds the panel, jog keys, event channel, relay,
 * and point-cloud view to the DOM. */

import { MonitorApi } from "./api.js";
import { attachCloudView, CloudBuffer } from "./cloud.js";
import { EventChannel, type WebSocketLike } from "./events.js";
import { JogController, KEY_AXES } from "./jog.js";
import { PoseRelay } from "./relay.js";
import { applyStateLine, commandsEnabled, indicatorColor, initialConsoleState } from "./state.js";
import { showToast } from "./toast.js";

const UI_RATE_HZ = 60;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const baseUrl = window.location.origin.replace(/\/$/, "");
  const wsBase = baseUrl.replace(/^http/, "ws");
  const api = new MonitorApi(baseUrl);
  const wsCtor = WebSocket as unknown as WebSocketLike;

  let state = initialConsoleState();
  const indicator = el<HTMLSpanElement>("indicator");
  const modeText = el<HTMLSpanElement>("mode-text");
  const poseText = el<HTMLSpanElement>("pose-text");
  const gripperBadge = el<HTMLSpanElement>("gripper-badge");
  const jogHint = el<HTMLSpanElement>("jog-hint");

  const jog = new JogController(20.0);

  function render(): void {
    const color = indicatorColor(state.ctrl);
    indicator.className = `dot dot-${color}`;
    modeText.textContent = state.ctrl + (state.errorCode ? ` (${state.errorCode})` : "");
    gripperBadge.textContent = state.gripper;
    gripperBadge.className = `badge badge-${state.gripper}`;
    if (state.actual) {
      poseText.textContent =
        `x ${state.actual.x.toFixed(1)}  y ${state.actual.y.toFixed(1)}  ` +
        `z ${state.actual.z.toFixed(1)} mm`;
    }
    const enabled = commandsEnabled(state.ctrl);
    jogHint.textContent = enabled
      ? "jog: WASD/QE, hold to move; G toggles gripper; R resets target"
      : "jog disabled until the controller is ready";
    if (!enabled) jog.releaseAll();
  }

  const relay = new PoseRelay(`${wsBase}/relay/pose`, {
    onState: (kv, pose) => {
      state = applyStateLine(state, kv, pose);
      if (jog.target === null && pose && commandsEnabled(state.ctrl)) {
        jog.reset(pose);
      }
      render();
    },
    onClose: () => showToast("pose relay disconnected"),
  }, wsCtor);

  const events = new EventChannel(api, wsBase, {
    onCtrlState: (ctrl) => {
      state = { ...state, ctrl };
      render();
    },
    onErrorToast: (text) => showToast(text),
    onClose: () => showToast("event channel closed"),
  }, wsCtor);

  el<HTMLButtonElement>("btn-connect").onclick = async () => {
    state = { ...state, ctrl: await api.ctrlAction("connect") };
    relay.requestState();
    render();
  };
  el<HTMLButtonElement>("btn-disconnect").onclick = async () => {
    state = { ...state, ctrl: await api.ctrlAction("disconnect") };
    jog.target = null;
    render();
  };
  el<HTMLButtonElement>("btn-restart").onclick = async () => {
    state = { ...state, ctrl: await api.ctrlAction("restart") };
    render();
  };
  el<HTMLButtonElement>("btn-gripper").onclick = async () => {
    const result = await api.gripper(state.gripper === "open" ? "close" : "open");
    if (!result.ok) showToast(`gripper rejected: ${result.state}`);
  };

  window.addEventListener("keydown", (ev) => {
    if (!commandsEnabled(state.ctrl)) return;
    const axis = KEY_AXES[ev.code];
    if (axis) {
      jog.press(axis);
      ev.preventDefault();
    } else if (ev.code === "KeyR" && state.actual) {
      jog.reset(state.actual);
    } else if (ev.code === "KeyG") {
      el<HTMLButtonElement>("btn-gripper").click();
    }
  });
  window.addEventListener("keyup", (ev) => {
    const axis = KEY_AXES[ev.code];
    if (axis) jog.release(axis);
  });
  window.addEventListener("blur", () => jog.releaseAll());

  // jog integration at the UI rate; controller-side filter/clamp smooths
  setInterval(() => {
    if (!commandsEnabled(state.ctrl)) return;
    const moved = jog.tick(1 / UI_RATE_HZ);
    if (moved) relay.sendTarget(moved);
  }, 1000 / UI_RATE_HZ);

  const cloud = new CloudBuffer();
  const stream = new (wsCtor as unknown as new (url: string) => WebSocket)(
    `${wsBase}/stream/points`,
  );
  stream.binaryType = "arraybuffer";
  stream.onmessage = (ev) => {
    if (ev.data instanceof ArrayBuffer) cloud.ingest(ev.data);
  };
  attachCloudView(el<HTMLCanvasElement>("cloud"), cloud, el<HTMLDivElement>("no-data"));

  void relay.open().then(() => relay.requestState());
  void events.open();
  void api.ctrlState().then((ctrl) => {
    state = { ...state, ctrl };
    render();
  });
  render();
}

main();
