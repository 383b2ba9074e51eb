/**
 * Session client: owns the WebSocket, streams commands at a fixed client
 * rate while connected (zero-twist keep-alives when idle, so the server's
 * staleness decay never fights a deliberate hold-still), and hands every
 * received telemetry frame straight to the renderer.  The UI never
 * fabricates state: the only poses ever shown are poses the service sent.
 */

import { InputState } from "./input.js";
import {
  CommandKind,
  ServerMessage,
  TelemetryFrame,
  encodeCommand,
  parseServerMessage,
} from "./protocol.js";

/** Minimal WebSocket surface, injectable for tests. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  readyState: number;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionState = "idle" | "connecting" | "connected" | "closed";

export interface ClientStats {
  framesReceived: number;
  messagesSent: number;
  errorsReceived: number;
  /** telemetry frames per second over the last full second */
  fps: number;
}

export interface CockpitClientOptions {
  rateHz?: number;
  socketFactory?: SocketFactory;
  now?: () => number;
}

const OPEN = 1;

export class CockpitClient {
  readonly input: InputState;
  state: ConnectionState = "idle";
  lastFrame: TelemetryFrame | null = null;
  lastError: { code: string; detail: string } | null = null;
  onFrame: ((frame: TelemetryFrame) => void) | null = null;
  onStateChange: ((state: ConnectionState) => void) | null = null;

  private socket: SocketLike | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private seq = 0;
  private readonly rateHz: number;
  private readonly factory: SocketFactory;
  private readonly now: () => number;
  private lastPedals: [boolean, boolean] | null = null;
  private lastGripper: number | null = null;
  private stats: ClientStats = { framesReceived: 0, messagesSent: 0, errorsReceived: 0, fps: 0 };
  private fpsWindowStart = 0;
  private fpsWindowCount = 0;

  constructor(input: InputState, options: CockpitClientOptions = {}) {
    this.input = input;
    this.rateHz = options.rateHz ?? 60;
    this.factory =
      options.socketFactory ?? ((url: string) => new WebSocket(url) as unknown as SocketLike);
    this.now = options.now ?? (() => Date.now());
  }

  getStats(): ClientStats {
    return { ...this.stats };
  }

  connect(url: string): void {
    this.disconnect();
    this.setState("connecting");
    const socket = this.factory(url);
    this.socket = socket;
    socket.onopen = () => {
      this.setState("connected");
      this.fpsWindowStart = this.now();
      this.fpsWindowCount = 0;
      // make the safety state explicit immediately
      this.sendCommand("pedal", this.input.pedals());
      this.lastPedals = this.input.pedals();
      this.timer = setInterval(() => this.tick(), 1000 / this.rateHz);
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onclose = () => this.teardown("closed");
    socket.onerror = () => {
      /* onclose follows */
    };
  }

  disconnect(): void {
    if (this.socket !== null) {
      const socket = this.socket;
      this.socket = null;
      socket.onclose = null;
      socket.close();
    }
    this.teardown("idle");
  }

  /** One client tick: sample inputs, send state changes plus the twist. */
  tick(): void {
    if (this.socket === null || this.socket.readyState !== OPEN) return;
    const pedals = this.input.pedals();
    if (
      this.lastPedals === null ||
      pedals[0] !== this.lastPedals[0] ||
      pedals[1] !== this.lastPedals[1]
    ) {
      this.sendCommand("pedal", pedals);
      this.lastPedals = pedals;
    }
    const gripper = this.input.gripper();
    if (this.lastGripper === null || gripper !== this.lastGripper) {
      this.sendCommand("gripper", gripper);
      this.lastGripper = gripper;
    }
    // twist goes out every tick, zeros included (keep-alive)
    this.sendCommand("twist", this.input.sampleTwist(1.0 / this.rateHz));
  }

  setRcmOffset(offsetMeters: number): void {
    this.sendCommand("set_rcm", offsetMeters);
  }

  private sendCommand(kind: CommandKind, payload: unknown): void {
    if (this.socket === null || this.socket.readyState !== OPEN) return;
    this.socket.send(encodeCommand(kind, this.seq, payload, this.now()));
    this.seq += 1;
    this.stats.messagesSent += 1;
  }

  private handleMessage(data: string): void {
    const msg: ServerMessage | null = parseServerMessage(data);
    if (msg === null) return;
    if (msg.kind === "error") {
      this.stats.errorsReceived += 1;
      this.lastError = { code: msg.code, detail: msg.detail };
      return;
    }
    this.stats.framesReceived += 1;
    this.lastFrame = msg;
    const t = this.now();
    this.fpsWindowCount += 1;
    if (t - this.fpsWindowStart >= 1000) {
      this.stats.fps = (this.fpsWindowCount * 1000) / (t - this.fpsWindowStart);
      this.fpsWindowStart = t;
      this.fpsWindowCount = 0;
    }
    if (this.onFrame !== null) {
      this.onFrame(msg);
    }
  }

  private teardown(state: ConnectionState): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.socket = null;
    this.lastPedals = null;
    this.lastGripper = null;
    this.setState(state);
  }

  private setState(state: ConnectionState): void {
    this.state = state;
    if (this.onStateChange !== null) {
      this.onStateChange(state);
    }
  }
}
