/**
 * Wire schema for the teleoperation session service (WebSocket framing):
 * one JSON object per text message, mirroring the server's NDJSON payloads.
 */

export type TwistArray = [number, number, number, number, number, number];

export type CommandKind = "twist" | "gripper" | "pedal" | "set_rcm" | "set_config";

export interface CommandMessage {
  kind: CommandKind;
  seq: number;
  t_client: number;
  payload: unknown;
}

export interface TelemetryFrame {
  kind: "telemetry";
  t: number;
  tick: number;
  ee_pos: [number, number, number];
  ee_quat: [number, number, number, number]; // w, x, y, z
  tip: [number, number, number];
  jaw: number;
  rcm_drift: number;
  clearance: number;
  enabled: boolean;
  commanded_twist: TwistArray;
  gated_twist: TwistArray;
  last_seq_applied: number;
}

export interface ErrorReply {
  kind: "error";
  code: string;
  detail: string;
  seq?: number;
}

export type ServerMessage = TelemetryFrame | ErrorReply;

export const ZERO_TWIST: TwistArray = [0, 0, 0, 0, 0, 0];

export function encodeCommand(
  kind: CommandKind,
  seq: number,
  payload: unknown,
  now: number = Date.now(),
): string {
  return JSON.stringify({ kind, seq, t_client: now, payload });
}

function isVec(value: unknown, n: number): boolean {
  return Array.isArray(value) && value.length === n && value.every((v) => typeof v === "number");
}

/** Parse one server message; returns null for anything unrecognized. */
export function parseServerMessage(data: string): ServerMessage | null {
  let obj: Record<string, unknown>;
  try {
    obj = JSON.parse(data);
  } catch {
    return null;
  }
  if (obj === null || typeof obj !== "object") return null;
  if (obj.kind === "error" && typeof obj.code === "string") {
    return {
      kind: "error",
      code: obj.code,
      detail: String(obj.detail ?? ""),
      seq: typeof obj.seq === "number" ? obj.seq : undefined,
    };
  }
  if (obj.kind !== "telemetry") return null;
  if (
    !isVec(obj.ee_pos, 3) ||
    !isVec(obj.ee_quat, 4) ||
    !isVec(obj.tip, 3) ||
    !isVec(obj.commanded_twist, 6) ||
    !isVec(obj.gated_twist, 6) ||
    typeof obj.t !== "number" ||
    typeof obj.tick !== "number" ||
    typeof obj.jaw !== "number" ||
    typeof obj.rcm_drift !== "number" ||
    typeof obj.clearance !== "number" ||
    typeof obj.enabled !== "boolean"
  ) {
    return null;
  }
  return obj as unknown as TelemetryFrame;
}

/** Rotation matrix (row-major 3x3) from a wxyz unit quaternion. */
export function quatToMatrix(q: [number, number, number, number]): number[][] {
  const [w, x, y, z] = q;
  return [
    [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
    [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
    [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
  ];
}
