/** Lockstep session state: at most one request awaiting its reply.
 *
 * The server answers every start, reset, and step with exactly one
 * frame, or with an error that leaves the episode untouched, so the
 * client keeps a single in-flight slot. The slot opens when a request
 * goes out and closes on the next frame or error; polled input turns
 * into a step message only while the slot is free and the episode is
 * live. A frame that fails to decode still closes the slot (the server
 * did reply; the payload arrived broken) and is dropped with a
 * diagnostic rather than wedging the session.
 */

import {
  decodeRaster,
  parseServerMessage,
  type ClientMessage,
  type FrameMessage,
  type Raster,
} from "./protocol.js";

export type Received =
  | { kind: "frame"; frame: FrameMessage; vessel: Raster | null; guidewire: Raster }
  | { kind: "error"; message: string }
  | { kind: "dropped"; detail: string };

export class SessionClient {
  private inflight = false;
  private live = false;
  private finished = false;

  constructor(private readonly send: (msg: ClientMessage) => void) {}

  get isInflight(): boolean {
    return this.inflight;
  }

  /** Episode started and not yet at a terminal step. */
  get isLive(): boolean {
    return this.live;
  }

  get isFinished(): boolean {
    return this.finished;
  }

  /** Request a fresh episode. Refused while a reply is pending or an
   * episode is live (the server would reject it; reset instead). */
  start(mapSeed: number): boolean {
    if (this.inflight || this.live) return false;
    this.inflight = true;
    this.send({ type: "start", map_seed: mapSeed });
    return true;
  }

  /** Abandon or follow a finished episode with a fresh one. */
  reset(): boolean {
    if (this.inflight) return false;
    this.inflight = true;
    this.live = false;
    this.finished = false;
    this.send({ type: "reset" });
    return true;
  }

  /** Close the session; the server hangs up unless saves are pending. */
  end(): void {
    this.live = false;
    this.send({ type: "end" });
  }

  /** Turn one polled action into a step when the lockstep allows it.
   * Null actions never send: no input, no step. */
  pollStep(action: number | null): boolean {
    if (action === null) return false;
    if (this.inflight || !this.live || this.finished) return false;
    this.inflight = true;
    this.send({ type: "step", action_id: action });
    return true;
  }

  /** Fold one server text message into the state machine. */
  receive(text: string): Received {
    let msg;
    try {
      msg = parseServerMessage(text);
    } catch (e) {
      this.inflight = false;
      return { kind: "dropped", detail: String(e) };
    }
    if (msg.type === "error") {
      this.inflight = false;
      return { kind: "error", message: msg.message };
    }
    let vessel: Raster | null = null;
    let guidewire: Raster;
    try {
      if (msg.vessel !== undefined) vessel = decodeRaster(msg.vessel);
      guidewire = decodeRaster(msg.guidewire);
    } catch (e) {
      this.inflight = false;
      return { kind: "dropped", detail: String(e) };
    }
    this.inflight = false;
    this.finished = msg.done;
    this.live = !msg.done;
    return { kind: "frame", frame: msg, vessel, guidewire };
  }

  /** Transport gone: nothing is live or pending any more. */
  disconnected(): void {
    this.inflight = false;
    this.live = false;
    this.finished = false;
  }
}
