/**
 * Scene rendering: an endoscope-style view looking down the channel axis
 * (the monitor view an operator steers by) and a free-orbit wireframe for
 * debugging.  Everything drawn comes from the latest telemetry frame; there
 * is no client-side prediction or interpolation.
 */

import { TelemetryFrame, quatToMatrix } from "./protocol.js";

export type CameraMode = "endoscope" | "orbit";

export interface OverlayToggles {
  rcmMarker: boolean;
  driftReadout: boolean;
  clearanceRing: boolean;
  enableStatus: boolean;
}

export interface ViewState {
  mode: CameraMode;
  overlays: OverlayToggles;
  orbit: { azimuth: number; elevation: number; zoom: number };
}

export function defaultViewState(): ViewState {
  return {
    mode: "endoscope",
    overlays: { rcmMarker: true, driftReadout: true, clearanceRing: true, enableStatus: true },
    orbit: { azimuth: 0.7, elevation: 0.45, zoom: 1.0 },
  };
}

/** Geometry the scene needs; mirrors the service's session config. */
export interface SceneConfig {
  channelRadius: number;
  mouthPoint: [number, number, number];
  shaftLength: number;
  eeToTip: [number, number, number];
}

export const DEFAULT_SCENE: SceneConfig = {
  channelRadius: 0.009,
  mouthPoint: [0.05, 0, 0],
  shaftLength: 0.2,
  eeToTip: [0.2, 0, 0],
};

/** Subset of CanvasRenderingContext2D the renderer uses (fakeable). */
export interface Draw2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

type Vec3 = [number, number, number];

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

/** Tool shaft direction (body x-axis) in world coordinates. */
export function shaftAxis(frame: TelemetryFrame): Vec3 {
  const r = quatToMatrix(frame.ee_quat);
  return [r[0][0], r[1][0], r[2][0]];
}

/**
 * Where the shaft line crosses the channel mouth plane (x = mouth x),
 * or null when the shaft is parallel to the plane.
 */
export function shaftMouthCrossing(
  frame: TelemetryFrame,
  scene: SceneConfig,
): [number, number] | null {
  const axis = shaftAxis(frame);
  if (Math.abs(axis[0]) < 1e-9) return null;
  const s = (frame.tip[0] - scene.mouthPoint[0]) / axis[0];
  return [frame.tip[1] - s * axis[1], frame.tip[2] - s * axis[2]];
}

/**
 * World-frame directions of the two jaw halves: the jaws open symmetrically
 * by the jaw angle in the body x-y plane, so roll visibly rotates them.
 */
export function jawDirections(frame: TelemetryFrame): [Vec3, Vec3] {
  const r = quatToMatrix(frame.ee_quat);
  const half = frame.jaw / 2;
  const make = (sign: 1 | -1): Vec3 => {
    const bx = Math.cos(sign * half);
    const by = Math.sin(sign * half);
    return [
      r[0][0] * bx + r[0][1] * by,
      r[1][0] * bx + r[1][1] * by,
      r[2][0] * bx + r[2][1] * by,
    ];
  };
  return [make(1), make(-1)];
}

function hud(ctx: Draw2D, lines: string[], x: number, y: number): void {
  ctx.font = "13px monospace";
  ctx.fillStyle = "#cde3f7";
  lines.forEach((line, i) => ctx.fillText(line, x, y + 16 * i));
}

export function renderFrame(
  ctx: Draw2D,
  width: number,
  height: number,
  frame: TelemetryFrame | null,
  scene: SceneConfig,
  view: ViewState,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10161d";
  ctx.fillRect(0, 0, width, height);
  if (frame === null) {
    hud(ctx, ["no telemetry - connect to a session"], 12, 24);
    return;
  }
  if (view.mode === "endoscope") {
    renderEndoscope(ctx, width, height, frame, scene, view);
  } else {
    renderOrbit(ctx, width, height, frame, scene, view);
  }
  if (view.overlays.enableStatus) {
    ctx.fillStyle = frame.enabled ? "#2ecc71" : "#e74c3c";
    ctx.fillRect(12, 12, 14, 14);
    ctx.fillStyle = "#cde3f7";
    ctx.font = "13px monospace";
    ctx.fillText(frame.enabled ? "ENABLED" : "DISABLED (hold both pedals)", 34, 23);
  }
  const lines: string[] = [];
  if (view.overlays.driftReadout) {
    lines.push(`pivot drift ${(frame.rcm_drift * 1e6).toFixed(1)} um`);
  }
  lines.push(`clearance  ${(frame.clearance * 1e3).toFixed(2)} mm`);
  lines.push(`jaw        ${((frame.jaw * 180) / Math.PI).toFixed(1)} deg`);
  lines.push(`t          ${frame.t.toFixed(2)} s`);
  hud(ctx, lines, 12, height - 16 * lines.length - 8);
}

function renderEndoscope(
  ctx: Draw2D,
  width: number,
  height: number,
  frame: TelemetryFrame,
  scene: SceneConfig,
  view: ViewState,
): void {
  const cx = width / 2;
  const cy = height / 2;
  // fit the bore into ~70% of the viewport; screen right = +y, up = +z
  const scale = (0.35 * Math.min(width, height)) / scene.channelRadius;
  const px = (y: number, z: number): [number, number] => [cx + y * scale, cy - z * scale];

  // channel bore
  ctx.strokeStyle = "#3d5a73";
  ctx.lineWidth = 2;
  ctx.setLineDash([]);
  ctx.beginPath();
  ctx.arc(cx, cy, scene.channelRadius * scale, 0, Math.PI * 2);
  ctx.stroke();

  if (view.overlays.clearanceRing && frame.clearance < scene.channelRadius) {
    // ring at the worst shaft excursion: bore radius minus clearance
    ctx.strokeStyle = frame.clearance > 0 ? "#b8a632" : "#e74c3c";
    ctx.setLineDash([6, 6]);
    ctx.beginPath();
    ctx.arc(cx, cy, Math.max(0, scene.channelRadius - frame.clearance) * scale, 0, Math.PI * 2);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  if (view.overlays.rcmMarker) {
    const [mx, my] = px(scene.mouthPoint[1], scene.mouthPoint[2]);
    ctx.strokeStyle = "#7fd0ff";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(mx - 8, my);
    ctx.lineTo(mx + 8, my);
    ctx.moveTo(mx, my - 8);
    ctx.lineTo(mx, my + 8);
    ctx.stroke();
  }

  // shaft: from its mouth crossing to the tip
  const crossing = shaftMouthCrossing(frame, scene);
  const [tx, ty] = px(frame.tip[1], frame.tip[2]);
  ctx.strokeStyle = "#c9cfd6";
  ctx.lineWidth = 3;
  if (crossing !== null) {
    const [sx, sy] = px(crossing[0], crossing[1]);
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(tx, ty);
    ctx.stroke();
  }

  // jaws, angle-accurate, rolled with the tool
  const jawLenPx = 26;
  const [ja, jb] = jawDirections(frame);
  ctx.strokeStyle = "#f0f4f8";
  ctx.lineWidth = 2;
  for (const dir of [ja, jb]) {
    ctx.beginPath();
    ctx.moveTo(tx, ty);
    ctx.lineTo(tx + dir[1] * jawLenPx, ty - dir[2] * jawLenPx);
    ctx.stroke();
  }

  // tip marker
  ctx.fillStyle = frame.enabled ? "#9be89b" : "#e0b0b0";
  ctx.beginPath();
  ctx.arc(tx, ty, 4, 0, Math.PI * 2);
  ctx.fill();
}

function renderOrbit(
  ctx: Draw2D,
  width: number,
  height: number,
  frame: TelemetryFrame,
  scene: SceneConfig,
  view: ViewState,
): void {
  const { azimuth, elevation, zoom } = view.orbit;
  const ca = Math.cos(azimuth);
  const sa = Math.sin(azimuth);
  const ce = Math.cos(elevation);
  const se = Math.sin(elevation);
  const center: Vec3 = [scene.mouthPoint[0] + 0.05, scene.mouthPoint[1], scene.mouthPoint[2]];
  const scale = zoom * Math.min(width, height) * 2.2;
  const project = (p: Vec3): [number, number] => {
    const q = sub(p, center);
    const u = -sa * q[0] + ca * q[1];
    const v = -se * (ca * q[0] + sa * q[1]) + ce * q[2];
    return [width / 2 + u * scale, height / 2 - v * scale];
  };
  const line = (a: Vec3, b: Vec3) => {
    const [ax, ay] = project(a);
    const [bx, by] = project(b);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  };

  // channel cylinder wireframe from the mouth inward
  ctx.strokeStyle = "#3d5a73";
  ctx.lineWidth = 1;
  const ring = (x: number): Vec3[] => {
    const pts: Vec3[] = [];
    for (let i = 0; i <= 24; i++) {
      const a = (i / 24) * Math.PI * 2;
      pts.push([
        x,
        scene.mouthPoint[1] + scene.channelRadius * Math.cos(a),
        scene.mouthPoint[2] + scene.channelRadius * Math.sin(a),
      ]);
    }
    return pts;
  };
  for (const x of [scene.mouthPoint[0], scene.mouthPoint[0] + 0.1]) {
    const pts = ring(x);
    for (let i = 0; i + 1 < pts.length; i++) line(pts[i], pts[i + 1]);
  }
  for (let i = 0; i < 4; i++) {
    const a = (i / 4) * Math.PI * 2;
    const y = scene.mouthPoint[1] + scene.channelRadius * Math.cos(a);
    const z = scene.mouthPoint[2] + scene.channelRadius * Math.sin(a);
    line([scene.mouthPoint[0], y, z], [scene.mouthPoint[0] + 0.1, y, z]);
  }

  // shaft from base to tip
  const axis = shaftAxis(frame);
  const base: Vec3 = [
    frame.tip[0] - scene.shaftLength * axis[0],
    frame.tip[1] - scene.shaftLength * axis[1],
    frame.tip[2] - scene.shaftLength * axis[2],
  ];
  ctx.strokeStyle = "#c9cfd6";
  ctx.lineWidth = 3;
  line(base, frame.tip as Vec3);

  // jaws
  const [ja, jb] = jawDirections(frame);
  ctx.strokeStyle = "#f0f4f8";
  ctx.lineWidth = 2;
  const jawLen = 0.02;
  for (const dir of [ja, jb]) {
    line(frame.tip as Vec3, [
      frame.tip[0] + dir[0] * jawLen,
      frame.tip[1] + dir[1] * jawLen,
      frame.tip[2] + dir[2] * jawLen,
    ]);
  }

  if (view.overlays.rcmMarker) {
    ctx.strokeStyle = "#7fd0ff";
    ctx.lineWidth = 1;
    const m = scene.mouthPoint;
    const d = 0.004;
    line([m[0] - d, m[1], m[2]], [m[0] + d, m[1], m[2]]);
    line([m[0], m[1] - d, m[2]], [m[0], m[1] + d, m[2]]);
    line([m[0], m[1], m[2] - d], [m[0], m[1], m[2] + d]);
  }
}
