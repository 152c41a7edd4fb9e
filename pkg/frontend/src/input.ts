/** Keyboard and gamepad state folded into the 10-action set.
 *
 * Actions pair a translation with a tip rotation:
 * id = 5 * translation + rotation, translation 0 forward / 1 backward,
 * rotation 0 static / 1 ccw slow / 2 ccw fast / 3 cw slow / 4 cw fast.
 * Rotation only exists combined with translation, so rotation input
 * without a translation key held yields no action and no step message;
 * the operator paces the episode by holding or releasing translation.
 */

export interface Binding {
  translation: "forward" | "backward";
  rotation: "static" | "ccw" | "cw";
  /** Fast-rotation modifier; no effect while rotation is static. */
  high: boolean;
}

export const N_ACTIONS = 10;

export function bindingToAction(b: Binding): number {
  const t = b.translation === "forward" ? 0 : 1;
  let r = 0;
  if (b.rotation === "ccw") r = b.high ? 2 : 1;
  if (b.rotation === "cw") r = b.high ? 4 : 3;
  return 5 * t + r;
}

/** Canonical inverse of bindingToAction; static rotation reports
 * high=false since the modifier is meaningless there. */
export function actionToBinding(id: number): Binding {
  if (!Number.isInteger(id) || id < 0 || id >= N_ACTIONS) {
    throw new Error(`action id ${id} outside 0..${N_ACTIONS - 1}`);
  }
  const translation = id < 5 ? "forward" : "backward";
  const r = id % 5;
  const rotation = r === 0 ? "static" : r <= 2 ? "ccw" : "cw";
  return { translation, rotation, high: r === 2 || r === 4 };
}

/** The ten canonical input combinations, one per action id. */
export function boundSet(): Binding[] {
  const out: Binding[] = [];
  for (let id = 0; id < N_ACTIONS; id++) out.push(actionToBinding(id));
  return out;
}

/** Raw device state after one poll; direction pairs may conflict. */
export interface InputState {
  forward: boolean;
  backward: boolean;
  ccw: boolean;
  cw: boolean;
  high: boolean;
}

export const IDLE_INPUT: InputState = {
  forward: false,
  backward: false,
  ccw: false,
  cw: false,
  high: false,
};

/** One action id per poll, or null when no step should be sent.
 *
 * Opposed translation keys cancel to no action; opposed rotation keys
 * cancel to static rotation while translation continues.
 */
export function pollAction(s: InputState): number | null {
  const forward = s.forward && !s.backward;
  const backward = s.backward && !s.forward;
  if (!forward && !backward) return null;
  const ccw = s.ccw && !s.cw;
  const cw = s.cw && !s.ccw;
  const rotation = ccw ? "ccw" : cw ? "cw" : "static";
  return bindingToAction({
    translation: forward ? "forward" : "backward",
    rotation,
    high: s.high,
  });
}

/** KeyboardEvent.code values and the input channel each one drives. */
export const KEY_BINDINGS: Readonly<Record<string, keyof InputState>> = {
  KeyW: "forward",
  ArrowUp: "forward",
  KeyS: "backward",
  ArrowDown: "backward",
  KeyA: "ccw",
  ArrowLeft: "ccw",
  KeyD: "cw",
  ArrowRight: "cw",
  ShiftLeft: "high",
  ShiftRight: "high",
};

export function keyboardState(pressed: ReadonlySet<string>): InputState {
  const s: InputState = { ...IDLE_INPUT };
  for (const code of pressed) {
    const channel = KEY_BINDINGS[code];
    if (channel !== undefined) s[channel] = true;
  }
  return s;
}

/** Sticks are read as digital past half deflection: analog speed is not
 * part of the action set, the modifier is. */
export const STICK_THRESHOLD = 0.5;

export interface GamepadButtonState {
  pressed: boolean;
  value: number;
}

/** Standard-mapping pad: left stick vertical drives translation (up is
 * forward), right stick horizontal drives rotation (left is ccw), and
 * the lower right trigger holds the fast-rotation modifier. */
export function gamepadState(
  axes: ReadonlyArray<number>,
  buttons: ReadonlyArray<GamepadButtonState>,
): InputState {
  const vert = axes.length > 1 ? axes[1] : 0;
  const horiz = axes.length > 2 ? axes[2] : 0;
  const trigger = buttons.length > 7 ? buttons[7] : undefined;
  return {
    forward: vert < -STICK_THRESHOLD,
    backward: vert > STICK_THRESHOLD,
    ccw: horiz < -STICK_THRESHOLD,
    cw: horiz > STICK_THRESHOLD,
    high:
      trigger !== undefined &&
      (trigger.pressed || trigger.value > STICK_THRESHOLD),
  };
}

export interface BindingRow {
  action: string;
  keys: string;
  pad: string;
}

/** Help-panel table; derived from the same mapping the poller uses. */
export function bindingTable(): BindingRow[] {
  const keyNames: Record<keyof InputState, string[]> = {
    forward: [],
    backward: [],
    ccw: [],
    cw: [],
    high: [],
  };
  for (const [code, channel] of Object.entries(KEY_BINDINGS)) {
    keyNames[channel].push(code.replace(/^Key/, ""));
  }
  const join = (c: keyof InputState) => keyNames[c].join(" / ");
  return [
    { action: "translate forward", keys: join("forward"), pad: "left stick up" },
    { action: "translate backward", keys: join("backward"), pad: "left stick down" },
    { action: "rotate ccw (with translation)", keys: join("ccw"), pad: "right stick left" },
    { action: "rotate cw (with translation)", keys: join("cw"), pad: "right stick right" },
    { action: "fast rotation while held", keys: join("high"), pad: "lower right trigger" },
  ];
}
