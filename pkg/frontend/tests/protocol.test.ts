import { describe, expect, it } from "vitest";

import {
  decodePointFrame,
  formatErrorToast,
  formatTargetLine,
  parseKvBody,
  parseKvLine,
  parsePose,
} from "../src/protocol.js";

describe("kv text parsing", () => {
  it("splits space separated key=value tokens", () => {
    expect(parseKvLine("resource=elog/9 seqnum=12")).toEqual({
      resource: "elog/9",
      seqnum: "12",
    });
  });

  it("keeps '=' inside values", () => {
    expect(parseKvLine("description=a=b c=d").description).toBe("a=b");
  });

  it("parses multi-line bodies with values running to end of line", () => {
    const kv = parseKvBody("code=90518\ntitle=Emergency Stop\n");
    expect(kv.code).toBe("90518");
    expect(kv.title).toBe("Emergency Stop");
  });
});

describe("pose lines", () => {
  it("round trips through format and parse", () => {
    const pose = { x: 583.771, y: -2.5, z: 729.004, qw: 0, qx: -0.173648, qy: 0, qz: -0.984808 };
    const kv = parseKvLine(formatTargetLine(pose).slice("target ".length));
    const back = parsePose(kv)!;
    expect(back.x).toBeCloseTo(pose.x, 3);
    expect(back.qx).toBeCloseTo(pose.qx, 6);
  });

  it("appends the gripper action when given", () => {
    const pose = { x: 0, y: 0, z: 0, qw: 1, qx: 0, qy: 0, qz: 0 };
    expect(formatTargetLine(pose, "close")).toContain("gripper=close");
  });

  it("rejects incomplete pose fields", () => {
    expect(parsePose({ x: "1", y: "2" })).toBeNull();
  });
});

describe("binary point frames", () => {
  function makeFrame(points: number[][]): ArrayBuffer {
    const buf = new ArrayBuffer(4 + points.length * 12);
    const view = new DataView(buf);
    view.setUint32(0, points.length, true);
    points.forEach(([x, y, z], i) => {
      view.setFloat32(4 + i * 12, x, true);
      view.setFloat32(8 + i * 12, y, true);
      view.setFloat32(12 + i * 12, z, true);
    });
    return buf;
  }

  it("decodes count-prefixed float32 triples", () => {
    const pts = decodePointFrame(makeFrame([[1, 2, 3], [-4, 5, 600]]));
    expect(pts.length).toBe(6);
    expect(pts[5]).toBeCloseTo(600);
  });

  it("rejects truncated frames", () => {
    const frame = makeFrame([[1, 2, 3]]);
    expect(() => decodePointFrame(frame.slice(0, 10))).toThrow();
    expect(() => decodePointFrame(new ArrayBuffer(2))).toThrow();
  });
});

describe("error toast text", () => {
  it("formats title and code", () => {
    expect(formatErrorToast({ code: "90518", title: "Emergency Stop" }))
      .toBe("Emergency Stop (90518)");
  });

  it("degrades gracefully on missing fields", () => {
    expect(formatErrorToast({})).toBe("Unknown (?)");
  });
});
