import { describe, expect, it } from "vitest";

import type { ClientMessage } from "../src/protocol.js";
import { SessionClient } from "../src/session.js";

/** 2x2 raster with the first cell set: header (2,2) LE + one byte. */
const RASTER = btoa(String.fromCharCode(2, 0, 2, 0, 0x80));

function frameText(
  step: number,
  done: boolean,
  extra: Record<string, unknown> = {},
): string {
  return JSON.stringify({
    type: "frame",
    step,
    reward: step === 0 ? 0 : -0.1,
    done,
    info: {},
    guidewire: RASTER,
    hud: { force: 0.5, dist: 12.5 },
    ...extra,
  });
}

function harness() {
  const sent: ClientMessage[] = [];
  const client = new SessionClient((msg) => sent.push(msg));
  return { sent, client };
}

describe("lockstep", () => {
  it("keeps at most one request in flight", () => {
    const { sent, client } = harness();
    expect(client.start(3)).toBe(true);
    expect(sent).toEqual([{ type: "start", map_seed: 3 }]);

    expect(client.pollStep(0)).toBe(false);
    expect(client.start(3)).toBe(false);
    expect(sent).toHaveLength(1);

    const r0 = client.receive(frameText(0, false, { vessel: RASTER }));
    expect(r0.kind).toBe("frame");
    if (r0.kind === "frame") {
      expect(r0.vessel?.height).toBe(2);
      expect(Array.from(r0.guidewire.cells)).toEqual([1, 0, 0, 0]);
    }
    expect(client.isLive).toBe(true);

    expect(client.pollStep(4)).toBe(true);
    expect(client.pollStep(4)).toBe(false);
    expect(sent).toEqual([
      { type: "start", map_seed: 3 },
      { type: "step", action_id: 4 },
    ]);

    client.receive(frameText(1, false));
    expect(client.pollStep(4)).toBe(true);
    expect(sent).toHaveLength(3);
  });

  it("never sends a step for a null action", () => {
    const { sent, client } = harness();
    client.start(0);
    client.receive(frameText(0, false, { vessel: RASTER }));
    expect(client.pollStep(null)).toBe(false);
    expect(sent).toHaveLength(1);
  });

  it("stops stepping after the terminal frame until a reset", () => {
    const { sent, client } = harness();
    client.start(0);
    client.receive(frameText(0, false, { vessel: RASTER }));
    client.pollStep(0);
    client.receive(frameText(1, true, { info: { success: true } }));
    expect(client.isLive).toBe(false);
    expect(client.isFinished).toBe(true);
    expect(client.pollStep(0)).toBe(false);
    expect(sent).toHaveLength(2);

    expect(client.reset()).toBe(true);
    client.receive(frameText(0, false, { vessel: RASTER }));
    expect(client.pollStep(0)).toBe(true);
  });

  it("treats a server error as the reply it is", () => {
    const { client } = harness();
    client.start(0);
    client.receive(frameText(0, false, { vessel: RASTER }));
    client.pollStep(0);
    const err = client.receive(
      JSON.stringify({ type: "error", message: "nope" }),
    );
    expect(err.kind).toBe("error");
    expect(client.isInflight).toBe(false);
    expect(client.pollStep(1)).toBe(true);
  });

  it("drops an undecodable frame without wedging the slot", () => {
    const { client } = harness();
    client.start(0);
    client.receive(frameText(0, false, { vessel: RASTER }));
    client.pollStep(0);
    const dropped = client.receive(frameText(1, false, { guidewire: "@@@" }));
    expect(dropped.kind).toBe("dropped");
    expect(client.isInflight).toBe(false);
    expect(client.pollStep(0)).toBe(true);
  });

  it("survives a save-failure tail after the terminal frame", () => {
    const { client } = harness();
    client.start(0);
    client.receive(frameText(0, false, { vessel: RASTER }));
    client.pollStep(0);
    client.receive(frameText(1, true, { info: { success: false } }));
    const tail = client.receive(
      JSON.stringify({ type: "error", message: "episode save failed" }),
    );
    expect(tail.kind).toBe("error");
    expect(client.isFinished).toBe(true);
    expect(client.reset()).toBe(true);
  });

  it("clears everything on disconnect", () => {
    const { client } = harness();
    client.start(0);
    client.receive(frameText(0, false, { vessel: RASTER }));
    client.disconnected();
    expect(client.isLive).toBe(false);
    expect(client.pollStep(0)).toBe(false);
    expect(client.start(0)).toBe(true);
  });
});
