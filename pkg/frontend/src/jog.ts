/** Keyboard TCP jogging: integrates held axis inputs into a target pose at
 * the UI rate and hands the result to the relay.  Safety (speed clamp and
 * smoothing) stays on the controller side; this only accumulates intent. */

import type { Pose } from "./protocol.js";

export type Axis = "+x" | "-x" | "+y" | "-y" | "+z" | "-z";

export const KEY_AXES: Record<string, Axis> = {
  KeyD: "+x",
  KeyA: "-x",
  KeyW: "+y",
  KeyS: "-y",
  KeyQ: "+z",
  KeyE: "-z",
};

const AXIS_DIR: Record<Axis, [number, number, number]> = {
  "+x": [1, 0, 0],
  "-x": [-1, 0, 0],
  "+y": [0, 1, 0],
  "-y": [0, -1, 0],
  "+z": [0, 0, 1],
  "-z": [0, 0, -1],
};

export class JogController {
  target: Pose | null = null;
  private held = new Set<Axis>();

  constructor(public rateMmS = 20.0) {}

  press(axis: Axis): void {
    this.held.add(axis);
  }

  release(axis: Axis): void {
    this.held.delete(axis);
  }

  releaseAll(): void {
    this.held.clear();
  }

  get active(): boolean {
    return this.held.size > 0;
  }

  /** Snap the jog target onto the given (actual) pose. */
  reset(pose: Pose): void {
    this.target = { ...pose };
  }

  /** Integrate held inputs over dt seconds; returns the new target when it
   * moved, null otherwise.  No-op until reset() provided a starting pose. */
  tick(dtS: number): Pose | null {
    if (this.target === null || this.held.size === 0) return null;
    let dx = 0;
    let dy = 0;
    let dz = 0;
    for (const axis of this.held) {
      const [ax, ay, az] = AXIS_DIR[axis];
      dx += ax;
      dy += ay;
      dz += az;
    }
    if (dx === 0 && dy === 0 && dz === 0) return null;
    const step = this.rateMmS * dtS;
    this.target = {
      ...this.target,
      x: this.target.x + dx * step,
      y: this.target.y + dy * step,
      z: this.target.z + dz * step,
    };
    return this.target;
  }
}
