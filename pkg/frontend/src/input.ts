/**
 * Operator input: keys, mouse drag, and wheel mapped onto twist components,
 * plus pedal hold keys and the gripper squeeze key.
 *
 * This is velocity teleoperation: holding a key or dragging commands a
 * velocity, and releasing everything must yield an exact zero twist on the
 * very next client tick.  Each twist component may be driven by at most one
 * source (key pair, mouse axis, or wheel) so commands never sum surprises.
 */

import type { TwistArray } from "./protocol.js";

export type TwistComponent = "vx" | "vy" | "vz" | "wx" | "wy" | "wz";

const COMPONENT_INDEX: Record<TwistComponent, number> = {
  vx: 0,
  vy: 1,
  vz: 2,
  wx: 3,
  wy: 4,
  wz: 5,
};

export interface KeyAxis {
  positive: string; // KeyboardEvent.code
  negative: string;
}

export interface InputBinding {
  /** key pairs driving a component at +/- sensitivity while held */
  keyAxes: Partial<Record<TwistComponent, KeyAxis>>;
  /** mouse-drag screen axes (drag speed scales the command) */
  mouse: { horizontal: TwistComponent | null; vertical: TwistComponent | null };
  /** wheel steps drive this component as velocity pulses */
  wheel: TwistComponent | null;
  pedalKeys: { left: string; right: string };
  /** held = squeeze closed (1), released = open (0) */
  gripperKey: string;
  /** full-deflection command per component (m/s or rad/s) */
  sensitivity: Record<TwistComponent, number>;
  /** drag speed (px/s) that reaches full deflection */
  mouseFullScalePxPerSec: number;
  /** wheel delta per event treated as one full-scale pulse for one tick */
  wheelPulseScale: number;
}

export const DEFAULT_BINDING: InputBinding = {
  keyAxes: {
    vx: { positive: "KeyW", negative: "KeyS" }, // insertion / retraction
    wx: { positive: "KeyE", negative: "KeyQ" }, // tool roll
  },
  mouse: { horizontal: "vy", vertical: "vz" }, // lateral tip demand on screen
  wheel: null,
  pedalKeys: { left: "KeyF", right: "KeyJ" },
  gripperKey: "Space",
  sensitivity: { vx: 0.08, vy: 0.08, vz: 0.08, wx: 0.8, wy: 0.8, wz: 0.8 },
  mouseFullScalePxPerSec: 600,
  wheelPulseScale: 0.25,
};

/** Every twist component may be bound at most once across all sources. */
export function validateBinding(binding: InputBinding): void {
  const seen = new Set<TwistComponent>();
  const claim = (component: TwistComponent | null, source: string) => {
    if (component === null) return;
    if (seen.has(component)) {
      throw new Error(`twist component ${component} bound twice (${source})`);
    }
    seen.add(component);
  };
  for (const component of Object.keys(binding.keyAxes) as TwistComponent[]) {
    claim(component, "keyAxes");
  }
  claim(binding.mouse.horizontal, "mouse.horizontal");
  claim(binding.mouse.vertical, "mouse.vertical");
  claim(binding.wheel, "wheel");
}

export class InputState {
  private held = new Set<string>();
  private dragPx = { x: 0, y: 0 }; // accumulated since last sample
  private wheelAccum = 0;
  private dragging = false;

  constructor(readonly binding: InputBinding = DEFAULT_BINDING) {
    validateBinding(binding);
  }

  keyDown(code: string): void {
    this.held.add(code);
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  setDragging(active: boolean): void {
    this.dragging = active;
    if (!active) {
      this.dragPx = { x: 0, y: 0 };
    }
  }

  mouseMove(dxPx: number, dyPx: number): void {
    if (this.dragging) {
      this.dragPx.x += dxPx;
      this.dragPx.y += dyPx;
    }
  }

  wheel(delta: number): void {
    this.wheelAccum += delta;
  }

  releaseAll(): void {
    this.held.clear();
    this.dragPx = { x: 0, y: 0 };
    this.wheelAccum = 0;
    this.dragging = false;
  }

  pedals(): [boolean, boolean] {
    return [
      this.held.has(this.binding.pedalKeys.left),
      this.held.has(this.binding.pedalKeys.right),
    ];
  }

  gripper(): number {
    return this.held.has(this.binding.gripperKey) ? 1.0 : 0.0;
  }

  /**
   * Sample the commanded twist for one client tick of length dt seconds.
   * Drag and wheel accumulators are consumed, so an idle mouse decays to
   * zero on the next sample.
   */
  sampleTwist(dt: number): TwistArray {
    const out: TwistArray = [0, 0, 0, 0, 0, 0];
    const b = this.binding;
    for (const [component, axis] of Object.entries(b.keyAxes) as [TwistComponent, KeyAxis][]) {
      let value = 0;
      if (this.held.has(axis.positive)) value += 1;
      if (this.held.has(axis.negative)) value -= 1;
      out[COMPONENT_INDEX[component]] = value * b.sensitivity[component];
    }
    if (dt > 0) {
      const scale = (pxPerSec: number) =>
        Math.max(-1, Math.min(1, pxPerSec / b.mouseFullScalePxPerSec));
      if (b.mouse.horizontal !== null) {
        out[COMPONENT_INDEX[b.mouse.horizontal]] =
          scale(this.dragPx.x / dt) * b.sensitivity[b.mouse.horizontal];
      }
      if (b.mouse.vertical !== null) {
        // screen-down drags map to negative world z (view looks along +x)
        out[COMPONENT_INDEX[b.mouse.vertical]] =
          scale(-this.dragPx.y / dt) * b.sensitivity[b.mouse.vertical];
      }
      if (b.wheel !== null && this.wheelAccum !== 0) {
        const pulses = Math.max(-1, Math.min(1, this.wheelAccum * b.wheelPulseScale));
        out[COMPONENT_INDEX[b.wheel]] = pulses * b.sensitivity[b.wheel];
      }
    }
    this.dragPx = { x: 0, y: 0 };
    this.wheelAccum = 0;
    for (let i = 0; i < out.length; i++) {
      if (out[i] === 0) out[i] = 0; // normalize -0 from sign arithmetic
    }
    return out;
  }
}
