import { describe, expect, it } from "vitest";

import {
  encodeCommand,
  parseServerMessage,
  quatToMatrix,
} from "../src/protocol.js";

function telemetryObj(overrides: Record<string, unknown> = {}) {
  return {
    kind: "telemetry",
    t: 1.5,
    tick: 1500,
    ee_pos: [0, 0, 0],
    ee_quat: [1, 0, 0, 0],
    tip: [0.2, 0, 0],
    jaw: 0.1,
    rcm_drift: 1e-6,
    clearance: 0.008,
    enabled: true,
    commanded_twist: [0, 0, 0, 0, 0, 0],
    gated_twist: [0, 0, 0, 0, 0, 0],
    last_seq_applied: 4,
    ...overrides,
  };
}

describe("encodeCommand", () => {
  it("emits the four normative fields", () => {
    const obj = JSON.parse(encodeCommand("twist", 3, [0, 0, 0, 0, 0, 0], 123.0));
    expect(obj).toEqual({
      kind: "twist",
      seq: 3,
      t_client: 123.0,
      payload: [0, 0, 0, 0, 0, 0],
    });
  });
});

describe("parseServerMessage", () => {
  it("round-trips telemetry", () => {
    const frame = parseServerMessage(JSON.stringify(telemetryObj()));
    expect(frame).not.toBeNull();
    expect(frame!.kind).toBe("telemetry");
    if (frame!.kind === "telemetry") {
      expect(frame!.tip[0]).toBeCloseTo(0.2);
      expect(frame!.enabled).toBe(true);
    }
  });

  it("parses error replies", () => {
    const msg = parseServerMessage('{"kind":"error","code":"busy","detail":"nope"}');
    expect(msg).toEqual({ kind: "error", code: "busy", detail: "nope", seq: undefined });
  });

  it("rejects junk without throwing", () => {
    expect(parseServerMessage("not json")).toBeNull();
    expect(parseServerMessage('"str"')).toBeNull();
    expect(parseServerMessage('{"kind":"telemetry"}')).toBeNull();
    expect(
      parseServerMessage(JSON.stringify(telemetryObj({ ee_pos: [0, 0] }))),
    ).toBeNull();
    expect(
      parseServerMessage(JSON.stringify(telemetryObj({ enabled: "yes" }))),
    ).toBeNull();
  });
});

describe("quatToMatrix", () => {
  it("identity quaternion gives identity matrix", () => {
    const r = quatToMatrix([1, 0, 0, 0]);
    expect(r).toEqual([
      [1, 0, 0],
      [0, 1, 0],
      [0, 0, 1],
    ]);
  });

  it("quarter turn about z rotates x into y", () => {
    const s = Math.SQRT1_2;
    const r = quatToMatrix([s, 0, 0, s]);
    // first column is the rotated x axis
    expect(r[0][0]).toBeCloseTo(0, 12);
    expect(r[1][0]).toBeCloseTo(1, 12);
    expect(r[2][0]).toBeCloseTo(0, 12);
  });

  it("matrix is orthonormal for random unit quaternions", () => {
    let state = 42;
    const rand = () => {
      state = (state * 1103515245 + 12345) & 0x7fffffff;
      return state / 0x7fffffff - 0.5;
    };
    for (let trial = 0; trial < 20; trial++) {
      let q: [number, number, number, number] = [rand(), rand(), rand(), rand()];
      const n = Math.hypot(...q);
      q = q.map((v) => v / n) as typeof q;
      const r = quatToMatrix(q);
      for (let i = 0; i < 3; i++) {
        for (let j = 0; j < 3; j++) {
          const dot = r[0][i] * r[0][j] + r[1][i] * r[1][j] + r[2][i] * r[2][j];
          expect(dot).toBeCloseTo(i === j ? 1 : 0, 9);
        }
      }
    }
  });
});
