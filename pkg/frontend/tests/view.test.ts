import { describe, expect, it } from "vitest";

import { TelemetryFrame } from "../src/protocol.js";
import {
  DEFAULT_SCENE,
  Draw2D,
  defaultViewState,
  jawDirections,
  renderFrame,
  shaftMouthCrossing,
} from "../src/view.js";

function frame(overrides: Partial<TelemetryFrame> = {}): TelemetryFrame {
  return {
    kind: "telemetry",
    t: 0.5,
    tick: 500,
    ee_pos: [0, 0, 0],
    ee_quat: [1, 0, 0, 0],
    tip: [0.2, 0, 0],
    jaw: 0.4,
    rcm_drift: 2e-6,
    clearance: 0.0075,
    enabled: true,
    commanded_twist: [0, 0, 0, 0, 0, 0],
    gated_twist: [0, 0, 0, 0, 0, 0],
    last_seq_applied: 9,
    ...overrides,
  };
}

class RecordingCtx implements Draw2D {
  ops: string[] = [];
  texts: string[] = [];
  strokeStyle = "";
  fillStyle = "";
  lineWidth = 1;
  font = "";
  clearRect(): void {
    this.ops.push("clearRect");
  }
  beginPath(): void {
    this.ops.push("beginPath");
  }
  arc(x: number, y: number, r: number): void {
    this.ops.push(`arc:${x.toFixed(1)},${y.toFixed(1)},${r.toFixed(1)}`);
  }
  moveTo(x: number, y: number): void {
    this.ops.push(`moveTo:${x.toFixed(1)},${y.toFixed(1)}`);
  }
  lineTo(x: number, y: number): void {
    this.ops.push(`lineTo:${x.toFixed(1)},${y.toFixed(1)}`);
  }
  stroke(): void {
    this.ops.push("stroke");
  }
  fill(): void {
    this.ops.push("fill");
  }
  fillRect(): void {
    this.ops.push("fillRect");
  }
  fillText(text: string): void {
    this.texts.push(text);
  }
  setLineDash(): void {}
}

describe("shaftMouthCrossing", () => {
  it("parallel-offset shaft crosses at its lateral offset", () => {
    const f = frame({ tip: [0.2, 0.004, -0.002] });
    const crossing = shaftMouthCrossing(f, DEFAULT_SCENE);
    expect(crossing).not.toBeNull();
    expect(crossing![0]).toBeCloseTo(0.004, 12);
    expect(crossing![1]).toBeCloseTo(-0.002, 12);
  });

  it("shaft perpendicular to the channel axis has no crossing", () => {
    const s = Math.SQRT1_2;
    const f = frame({ ee_quat: [s, 0, 0, s] }); // tool x now along world y
    expect(shaftMouthCrossing(f, DEFAULT_SCENE)).toBeNull();
  });
});

describe("jawDirections", () => {
  it("opens symmetrically by the jaw angle", () => {
    const f = frame({ jaw: 0.4 });
    const [a, b] = jawDirections(f);
    const dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    expect(Math.acos(dot)).toBeCloseTo(0.4, 9);
    // symmetric about the shaft axis (+x for the identity pose)
    expect(a[1]).toBeCloseTo(-b[1], 12);
    expect(a[0]).toBeCloseTo(b[0], 12);
  });

  it("closed jaws collapse onto the shaft axis", () => {
    const [a, b] = jawDirections(frame({ jaw: 0 }));
    expect(a).toEqual([1, 0, 0]);
    expect(b).toEqual([1, 0, 0]);
  });

  it("roll rotates the jaw plane", () => {
    const s = Math.SQRT1_2;
    const [a] = jawDirections(frame({ jaw: 0.4, ee_quat: [s, s, 0, 0] })); // 90 deg roll
    expect(Math.abs(a[1])).toBeLessThan(1e-9); // opening now in the x-z plane
    expect(Math.abs(a[2])).toBeGreaterThan(0.1);
  });
});

describe("renderFrame", () => {
  it("shows the enable banner from the frame, never invented", () => {
    const ctx = new RecordingCtx();
    renderFrame(ctx, 800, 600, frame({ enabled: true }), DEFAULT_SCENE, defaultViewState());
    expect(ctx.texts.join(" ")).toContain("ENABLED");
    const ctx2 = new RecordingCtx();
    renderFrame(ctx2, 800, 600, frame({ enabled: false }), DEFAULT_SCENE, defaultViewState());
    expect(ctx2.texts.join(" ")).toContain("DISABLED");
  });

  it("prints drift and clearance readouts from the frame", () => {
    const ctx = new RecordingCtx();
    renderFrame(ctx, 800, 600, frame(), DEFAULT_SCENE, defaultViewState());
    const text = ctx.texts.join(" ");
    expect(text).toContain("2.0 um");
    expect(text).toContain("7.50 mm");
  });

  it("draws the tip where the frame says it is", () => {
    const ctx = new RecordingCtx();
    const view = defaultViewState();
    // +y tip offset must land right of center on screen
    renderFrame(ctx, 800, 600, frame({ tip: [0.2, 0.004, 0] }), DEFAULT_SCENE, view);
    const scale = (0.35 * 600) / DEFAULT_SCENE.channelRadius;
    const expectedX = 400 + 0.004 * scale;
    expect(ctx.ops.some((op) => op.startsWith(`arc:${expectedX.toFixed(1)},300.0`))).toBe(true);
  });

  it("renders a placeholder message with no telemetry", () => {
    const ctx = new RecordingCtx();
    renderFrame(ctx, 800, 600, null, DEFAULT_SCENE, defaultViewState());
    expect(ctx.texts.join(" ")).toContain("no telemetry");
  });

  it("orbit mode draws the channel wireframe", () => {
    const ctx = new RecordingCtx();
    const view = defaultViewState();
    view.mode = "orbit";
    renderFrame(ctx, 800, 600, frame(), DEFAULT_SCENE, view);
    expect(ctx.ops.filter((op) => op === "stroke").length).toBeGreaterThan(20);
  });
});
