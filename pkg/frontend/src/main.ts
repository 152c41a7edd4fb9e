/** App entry: wires the DOM, the WebSocket, and the poll loop.
 *
 * One animation-frame loop reads keyboard and gamepad state, folds it
 * into at most one action per tick, and hands it to the lockstep
 * client; everything drawn on screen comes out of a server frame.
 */

import {
  bindingTable,
  gamepadState,
  keyboardState,
  pollAction,
  IDLE_INPUT,
  type InputState,
} from "./input.js";
import type { FrameMessage, Raster } from "./protocol.js";
import {
  BACKGROUND_RGBA,
  GUIDEWIRE_RGBA,
  VESSEL_RGBA,
  barFraction,
  fitScale,
  overlayPixels,
  rasterPixels,
} from "./render.js";
import { SessionClient } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const urlInput = el<HTMLInputElement>("url");
const operatorInput = el<HTMLInputElement>("operator");
const seedInput = el<HTMLInputElement>("map-seed");
const connectBtn = el<HTMLButtonElement>("connect");
const startBtn = el<HTMLButtonElement>("start");
const resetBtn = el<HTMLButtonElement>("reset");
const endBtn = el<HTMLButtonElement>("end");
const statusLine = el<HTMLDivElement>("status");
const banner = el<HTMLDivElement>("banner");
const logList = el<HTMLUListElement>("log");
const stage = el<HTMLDivElement>("stage");
const view = el<HTMLCanvasElement>("view");
const hudStep = el<HTMLSpanElement>("hud-step");
const hudReward = el<HTMLSpanElement>("hud-reward");
const hudTotal = el<HTMLSpanElement>("hud-total");
const hudDist = el<HTMLSpanElement>("hud-dist");
const hudForce = el<HTMLSpanElement>("hud-force");
const forceFill = el<HTMLDivElement>("force-fill");
const hudInput = el<HTMLSpanElement>("hud-input");

for (const row of bindingTable()) {
  const tr = document.createElement("tr");
  for (const cell of [row.action, row.keys, row.pad]) {
    const td = document.createElement("td");
    td.textContent = cell;
    tr.appendChild(td);
  }
  el<HTMLTableSectionElement>("bindings").appendChild(tr);
}

let socket: WebSocket | null = null;
let client: SessionClient | null = null;
let vesselCanvas: HTMLCanvasElement | null = null;
let wireCanvas: HTMLCanvasElement | null = null;
let totalReward = 0;
// Force readings have no client-side unit contract; the bar scale
// follows the largest value seen so the fill stays comparable.
let forceScale = 10;

function log(text: string, cls = ""): void {
  const item = document.createElement("li");
  item.textContent = text;
  if (cls) item.className = cls;
  logList.prepend(item);
  while (logList.childElementCount > 60) logList.lastElementChild?.remove();
}

function setStatus(text: string): void {
  statusLine.textContent = text;
}

function setBanner(text: string, cls = ""): void {
  banner.textContent = text;
  banner.className = cls;
  banner.hidden = text === "";
}

function setButtons(): void {
  const open = socket !== null && socket.readyState === WebSocket.OPEN;
  connectBtn.disabled = socket !== null && socket.readyState !== WebSocket.CLOSED;
  startBtn.disabled = !open || client === null || client.isLive;
  resetBtn.disabled = !open || client === null;
  endBtn.disabled = !open;
}

function offscreen(width: number, height: number): HTMLCanvasElement {
  const c = document.createElement("canvas");
  c.width = width;
  c.height = height;
  return c;
}

function paintRaster(
  canvas: HTMLCanvasElement,
  pixels: Uint8ClampedArray,
  width: number,
  height: number,
): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("2d canvas context unavailable");
  ctx.putImageData(new ImageData(pixels, width, height), 0, 0);
}

function composite(): void {
  if (vesselCanvas === null) return;
  const scale = fitScale(
    vesselCanvas.height,
    vesselCanvas.width,
    Math.max(64, stage.clientHeight || 640),
    Math.max(64, stage.clientWidth || 640),
  );
  view.width = vesselCanvas.width * scale;
  view.height = vesselCanvas.height * scale;
  const ctx = view.getContext("2d");
  if (ctx === null) throw new Error("2d canvas context unavailable");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(vesselCanvas, 0, 0, view.width, view.height);
  if (wireCanvas !== null) {
    ctx.drawImage(wireCanvas, 0, 0, view.width, view.height);
  }
}

function showFrame(frame: FrameMessage, vessel: Raster | null, wire: Raster): void {
  if (vessel !== null) {
    vesselCanvas = offscreen(vessel.width, vessel.height);
    paintRaster(
      vesselCanvas,
      rasterPixels(vessel, VESSEL_RGBA, BACKGROUND_RGBA),
      vessel.width,
      vessel.height,
    );
  }
  wireCanvas = offscreen(wire.width, wire.height);
  paintRaster(wireCanvas, overlayPixels(wire, GUIDEWIRE_RGBA), wire.width, wire.height);
  composite();

  if (frame.step === 0) {
    totalReward = 0;
    setBanner("");
  }
  totalReward += frame.reward;
  hudStep.textContent = String(frame.step);
  hudReward.textContent = frame.reward.toFixed(3);
  hudTotal.textContent = totalReward.toFixed(3);
  hudDist.textContent = frame.hud.dist < 0 ? "off map" : frame.hud.dist.toFixed(1);
  forceScale = Math.max(forceScale, frame.hud.force);
  hudForce.textContent = frame.hud.force.toFixed(2);
  forceFill.style.width = `${100 * barFraction(frame.hud.force, forceScale)}%`;

  const saved = frame.info.saved;
  if (Array.isArray(saved)) {
    for (const name of saved) log(`saved ${String(name)}`, "good");
  }
  if (frame.done) {
    const success = frame.info.success === true;
    setBanner(
      success
        ? `delivered in ${frame.step} steps, reward ${totalReward.toFixed(2)}`
        : `episode over without delivery (step ${frame.step})`,
      success ? "good" : "bad",
    );
    log(success ? "episode succeeded" : "episode failed");
  }
}

function connect(): void {
  const base = urlInput.value.trim();
  const operator = operatorInput.value.trim() || "anonymous";
  const url = `${base}${base.includes("?") ? "&" : "?"}operator=${encodeURIComponent(operator)}`;
  setStatus(`connecting to ${base}`);
  const ws = new WebSocket(url);
  socket = ws;
  const session = new SessionClient((msg) => ws.send(JSON.stringify(msg)));
  client = session;
  ws.onopen = () => {
    setStatus(`connected as ${operator}`);
    setBanner("");
    setButtons();
  };
  ws.onmessage = (event) => {
    if (typeof event.data !== "string") return;
    const received = session.receive(event.data);
    if (received.kind === "frame") {
      showFrame(received.frame, received.vessel, received.guidewire);
    } else if (received.kind === "error") {
      log(`server: ${received.message}`, "bad");
    } else {
      console.error(`frame dropped: ${received.detail}`);
      log("frame dropped (decode error)", "bad");
    }
    setButtons();
  };
  ws.onclose = () => {
    session.disconnected();
    if (socket === ws) {
      socket = null;
      client = null;
      setStatus("disconnected");
      setBanner("disconnected; reconnect to continue", "bad");
      setButtons();
    }
  };
  setButtons();
}

el<HTMLFormElement>("connect-form").addEventListener("submit", (event) => {
  event.preventDefault();
  if (socket === null) connect();
});
startBtn.addEventListener("click", () => {
  const seed = Math.max(0, Math.floor(Number(seedInput.value) || 0));
  client?.start(seed);
  setButtons();
});
resetBtn.addEventListener("click", () => {
  client?.reset();
  setButtons();
});
endBtn.addEventListener("click", () => {
  client?.end();
  setButtons();
});

const pressed = new Set<string>();
window.addEventListener("keydown", (event) => {
  if (event.code in { ArrowUp: 1, ArrowDown: 1, ArrowLeft: 1, ArrowRight: 1 }) {
    event.preventDefault();
  }
  pressed.add(event.code);
});
window.addEventListener("keyup", (event) => pressed.delete(event.code));
window.addEventListener("blur", () => pressed.clear());
window.addEventListener("resize", composite);

function padInput(): InputState {
  const pads = navigator.getGamepads ? navigator.getGamepads() : [];
  for (const pad of pads) {
    if (pad === null || !pad.connected) continue;
    return gamepadState(
      pad.axes,
      pad.buttons.map((b) => ({ pressed: b.pressed, value: b.value })),
    );
  }
  return IDLE_INPUT;
}

function mergeInput(a: InputState, b: InputState): InputState {
  return {
    forward: a.forward || b.forward,
    backward: a.backward || b.backward,
    ccw: a.ccw || b.ccw,
    cw: a.cw || b.cw,
    high: a.high || b.high,
  };
}

function tick(): void {
  const state = mergeInput(keyboardState(pressed), padInput());
  const action = pollAction(state);
  hudInput.textContent = action === null ? "idle" : `action ${action}`;
  client?.pollStep(action);
  requestAnimationFrame(tick);
}
requestAnimationFrame(tick);
setButtons();
setStatus("not connected");
