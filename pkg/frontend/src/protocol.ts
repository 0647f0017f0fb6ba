/** Wire formats of the monitor service: key=value text lines and the
 * binary point-stream frames. */

export interface Pose {
  x: number;
  y: number;
  z: number;
  qw: number;
  qx: number;
  qy: number;
  qz: number;
}

export function parseKvLine(line: string): Record<string, string> {
  const out: Record<string, string> = {};
  for (const tok of line.trim().split(/\s+/)) {
    const eq = tok.indexOf("=");
    if (eq > 0) out[tok.slice(0, eq)] = tok.slice(eq + 1);
  }
  return out;
}

/** Response bodies carry one key=value per line; the value runs to the end
 * of the line and may contain spaces (e.g. error titles). */
export function parseKvBody(text: string): Record<string, string> {
  const out: Record<string, string> = {};
  for (const raw of text.split("\n")) {
    const line = raw.replace(/\r$/, "").trim();
    const eq = line.indexOf("=");
    if (eq > 0) out[line.slice(0, eq)] = line.slice(eq + 1);
  }
  return out;
}

export function parsePose(kv: Record<string, string>): Pose | null {
  const nums = ["x", "y", "z", "qw", "qx", "qy", "qz"].map((k) => Number(kv[k]));
  if (nums.some((v) => !Number.isFinite(v))) return null;
  const [x, y, z, qw, qx, qy, qz] = nums;
  return { x, y, z, qw, qx, qy, qz };
}

export function formatTargetLine(pose: Pose, gripper?: "open" | "close"): string {
  let line =
    `target x=${pose.x.toFixed(3)} y=${pose.y.toFixed(3)} z=${pose.z.toFixed(3)} ` +
    `qw=${pose.qw.toFixed(6)} qx=${pose.qx.toFixed(6)} ` +
    `qy=${pose.qy.toFixed(6)} qz=${pose.qz.toFixed(6)}`;
  if (gripper) line += ` gripper=${gripper}`;
  return line;
}

/** Binary stream frame: u32 little-endian count, then count * 3 float32 xyz mm. */
export function decodePointFrame(buffer: ArrayBuffer): Float32Array {
  if (buffer.byteLength < 4) throw new Error("point frame shorter than its header");
  const count = new DataView(buffer).getUint32(0, true);
  const expected = 4 + count * 12;
  if (buffer.byteLength !== expected) {
    throw new Error(`point frame length ${buffer.byteLength}, expected ${expected}`);
  }
  return new Float32Array(buffer, 4, count * 3);
}

export function formatErrorToast(detail: Record<string, string>): string {
  return `${detail.title ?? "Unknown"} (${detail.code ?? "?"})`;
}
