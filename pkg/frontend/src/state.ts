/** Console state and the status-indicator color mapping.
 *
 * The color is a pure function of the controller state reported by the
 * monitor service; the console never guesses. */

import type { Pose } from "./protocol.js";

export type CtrlState = "init" | "motoron" | "motoroff" | "emergencystop";
export type IndicatorColor = "gray" | "green" | "red";

export function indicatorColor(state: CtrlState): IndicatorColor {
  switch (state) {
    case "init":
      return "gray";
    case "motoron":
      return "green";
    case "motoroff":
    case "emergencystop":
      return "red";
  }
}

/** Commands are allowed only while the controller reports ready/executing. */
export function commandsEnabled(state: CtrlState): boolean {
  return state === "motoron";
}

export interface ConsoleState {
  ctrl: CtrlState;
  mode: string;
  actual: Pose | null;
  target: Pose | null;
  gripper: "open" | "closed";
  errorCode: number;
}

export function initialConsoleState(): ConsoleState {
  return {
    ctrl: "init",
    mode: "disconnected",
    actual: null,
    target: null,
    gripper: "open",
    errorCode: 0,
  };
}

/** Fold one relay `state ...` line into the console state. */
export function applyStateLine(
  state: ConsoleState,
  kv: Record<string, string>,
  pose: Pose | null,
): ConsoleState {
  return {
    ...state,
    ctrl: (kv.ctrl as CtrlState) ?? state.ctrl,
    mode: kv.mode ?? state.mode,
    actual: pose ?? state.actual,
    gripper: kv.gripper === "closed" ? "closed" : "open",
    errorCode: Number(kv.error ?? "0") || 0,
  };
}
