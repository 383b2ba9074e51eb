/**
 * Page wiring: connect form, canvas, input capture, render loop.
 *
 * Controls (defaults): hold F and J as the two pedals; drag on the view to
 * command lateral tip velocity; W/S insert/retract; Q/E roll; hold Space
 * to squeeze the jaws closed.  C toggles endoscope/orbit, arrow keys orbit.
 */

import { CockpitClient } from "./client.js";
import { DEFAULT_BINDING, InputState } from "./input.js";
import { DEFAULT_SCENE, defaultViewState, renderFrame } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("scene");
const ctx = canvas.getContext("2d");
if (ctx === null) throw new Error("no 2d context");

const input = new InputState(DEFAULT_BINDING);
const client = new CockpitClient(input);
const view = defaultViewState();
const scene = { ...DEFAULT_SCENE };

const endpoint = el<HTMLInputElement>("endpoint");
const connectBtn = el<HTMLButtonElement>("connect");
const statusEl = el<HTMLSpanElement>("status");
const statsEl = el<HTMLSpanElement>("stats");
const rcmOffset = el<HTMLInputElement>("rcm-offset");
const setRcmBtn = el<HTMLButtonElement>("set-rcm");

client.onStateChange = (state) => {
  statusEl.textContent = state;
  statusEl.className = `status-${state}`;
  connectBtn.textContent = state === "connected" || state === "connecting" ? "Disconnect" : "Connect";
};

connectBtn.addEventListener("click", () => {
  if (client.state === "connected" || client.state === "connecting") {
    client.disconnect();
  } else {
    client.connect(endpoint.value);
  }
});

setRcmBtn.addEventListener("click", () => {
  const value = Number(rcmOffset.value);
  if (Number.isFinite(value) && value > 0) client.setRcmOffset(value);
});

// keyboard: pedals, axes, gripper, view toggles
const ORBIT_STEP = 0.08;
window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  if (ev.code === "Space") ev.preventDefault();
  if (ev.repeat) return;
  if (ev.code === "KeyC") {
    view.mode = view.mode === "endoscope" ? "orbit" : "endoscope";
    return;
  }
  if (view.mode === "orbit") {
    if (ev.code === "ArrowLeft") view.orbit.azimuth -= ORBIT_STEP;
    if (ev.code === "ArrowRight") view.orbit.azimuth += ORBIT_STEP;
    if (ev.code === "ArrowUp") view.orbit.elevation += ORBIT_STEP;
    if (ev.code === "ArrowDown") view.orbit.elevation -= ORBIT_STEP;
  }
  input.keyDown(ev.code);
});
window.addEventListener("keyup", (ev) => input.keyUp(ev.code));
window.addEventListener("blur", () => input.releaseAll());

// mouse drag on the canvas commands lateral velocity
canvas.addEventListener("mousedown", () => input.setDragging(true));
window.addEventListener("mouseup", () => input.setDragging(false));
window.addEventListener("mousemove", (ev) => input.mouseMove(ev.movementX, ev.movementY));
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  input.wheel(-Math.sign(ev.deltaY));
});

function resize(): void {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
}
window.addEventListener("resize", resize);
resize();

function draw(): void {
  renderFrame(ctx!, canvas.width, canvas.height, client.lastFrame, scene, view);
  const s = client.getStats();
  const err = client.lastError ? `  last error: ${client.lastError.code}` : "";
  statsEl.textContent =
    `${s.fps.toFixed(0)} frames/s  rx ${s.framesReceived}  tx ${s.messagesSent}${err}`;
  requestAnimationFrame(draw);
}
requestAnimationFrame(draw);
