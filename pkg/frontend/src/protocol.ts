/** Wire format of the teleoperation session, consumer side.
 *
 * JSON text messages over one WebSocket. The client sends start, step,
 * reset, and end; the server answers every start, reset, and step with
 * exactly one frame, or with an error message that leaves the episode
 * untouched. Rasters travel as base64 text of a self-describing
 * payload: two little-endian u16 for (height, width), then the boolean
 * grid bit-packed row-major, most significant bit first. The vessel
 * raster rides only on the step-0 frame of each episode; every frame
 * carries the guidewire raster.
 */

export type ClientMessage =
  | { type: "start"; map_seed: number }
  | { type: "step"; action_id: number }
  | { type: "reset" }
  | { type: "end" };

export interface Hud {
  force: number;
  dist: number;
}

export interface FrameMessage {
  type: "frame";
  step: number;
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
  vessel?: string;
  guidewire: string;
  hud: Hud;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = FrameMessage | ErrorMessage;

/** Boolean grid, row-major, one byte per cell holding 0 or 1. */
export interface Raster {
  height: number;
  width: number;
  cells: Uint8Array;
}

export class ProtocolError extends Error {}

function base64Bytes(text: string): Uint8Array {
  let binary: string;
  try {
    binary = atob(text);
  } catch {
    throw new ProtocolError("raster payload is not valid base64");
  }
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
  return bytes;
}

export function decodeRaster(text: string): Raster {
  const payload = base64Bytes(text);
  if (payload.length < 4) {
    throw new ProtocolError("raster payload shorter than its header");
  }
  const height = payload[0] | (payload[1] << 8);
  const width = payload[2] | (payload[3] << 8);
  const need = Math.ceil((height * width) / 8);
  if (payload.length - 4 !== need) {
    throw new ProtocolError(
      `raster payload is ${payload.length - 4} bytes, ` +
        `${height}x${width} needs ${need}`,
    );
  }
  const cells = new Uint8Array(height * width);
  for (let i = 0; i < cells.length; i++) {
    cells[i] = (payload[4 + (i >> 3)] >> (7 - (i & 7))) & 1;
  }
  return { height, width, cells };
}

export function parseServerMessage(text: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("server message is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ProtocolError("server message must be a JSON object");
  }
  const msg = raw as Record<string, unknown>;
  if (msg.type === "error") {
    if (typeof msg.message !== "string") {
      throw new ProtocolError("error message lacks its text");
    }
    return { type: "error", message: msg.message };
  }
  if (msg.type !== "frame") {
    throw new ProtocolError(`unknown server message type ${String(msg.type)}`);
  }
  if (
    typeof msg.step !== "number" ||
    typeof msg.reward !== "number" ||
    typeof msg.done !== "boolean" ||
    typeof msg.guidewire !== "string" ||
    typeof msg.hud !== "object" ||
    msg.hud === null
  ) {
    throw new ProtocolError("frame is missing a required field");
  }
  const hud = msg.hud as Record<string, unknown>;
  if (typeof hud.force !== "number" || typeof hud.dist !== "number") {
    throw new ProtocolError("frame hud is missing force or dist");
  }
  if (msg.vessel !== undefined && typeof msg.vessel !== "string") {
    throw new ProtocolError("frame vessel field must be a string");
  }
  return {
    type: "frame",
    step: msg.step,
    reward: msg.reward,
    done: msg.done,
    info: (typeof msg.info === "object" && msg.info !== null
      ? msg.info
      : {}) as Record<string, unknown>,
    vessel: msg.vessel,
    guidewire: msg.guidewire,
    hud: { force: hud.force, dist: hud.dist },
  };
}
