// Operator input: keyboard state machine plus the pure mapping from
// stick axes to a magnet angular-velocity command. The mapping runs
// client-side only for responsiveness; the server clamps again anyway.

import type { FeedDirection } from "./protocol.js";
import { add, clampNorm, frameFrom, scale, type Vec3 } from "./vec.js";

export interface MapOptions {
  maxAngular: number;   // rad/s, from the hello frame
  sensitivity: number;  // 0..1 multiplier from the UI slider
  tipFrame: boolean;    // map axes into the chain-tip frame instead of world
  tipDirection: Vec3;   // latest tip approach direction (world)
}

const DEADZONE = 0.15;

function deadzone(x: number): number {
  if (Math.abs(x) < DEADZONE) return 0;
  // re-scale so the usable range still spans 0..1
  const sign = x < 0 ? -1 : 1;
  return sign * (Math.abs(x) - DEADZONE) / (1 - DEADZONE);
}

/** Map raw axes (-1..1 each) to an angular-velocity vector in rad/s.
 * In world mode channel i drives rotation about world axis i; in tip
 * mode the channels drive rotation about the tip-aligned basis. The
 * result never exceeds maxAngular in norm, and a single full-deflection
 * channel at sensitivity 1 lands exactly on maxAngular. */
export function mapAxes(axes: Vec3, opts: MapOptions): Vec3 {
  const a: Vec3 = [deadzone(axes[0]), deadzone(axes[1]), deadzone(axes[2])];
  const gain = opts.maxAngular * opts.sensitivity;
  let w: Vec3;
  if (opts.tipFrame) {
    const [t, n1, n2] = frameFrom(opts.tipDirection);
    w = add(add(scale(t, a[0] * gain), scale(n1, a[1] * gain)),
            scale(n2, a[2] * gain));
  } else {
    w = scale(a, gain);
  }
  return clampNorm(w, opts.maxAngular);
}

/** Keyboard state tracker. Feed `handleKey` from keydown/keyup events
 * (or directly in tests); poll `axes()` / `feed()` every loop and drain
 * one-shot actions with `takeEdges`. */
export class KeyboardInput {
  private down = new Set<string>();
  private edges: string[] = [];

  handleKey(key: string, pressed: boolean): void {
    const k = key.toLowerCase();
    if (pressed && !this.down.has(k) && ["r", "x", "t", "1", "2"].includes(k)) {
      this.edges.push(k);
    }
    if (pressed) this.down.add(k);
    else this.down.delete(k);
  }

  private axis(neg: string[], pos: string[]): number {
    let v = 0;
    if (neg.some((k) => this.down.has(k))) v -= 1;
    if (pos.some((k) => this.down.has(k))) v += 1;
    return v;
  }

  /** Channels: [about-x (q/e), about-y (s/w or down/up), about-z (a/d or left/right)]. */
  axes(): Vec3 {
    return [
      this.axis(["q"], ["e"]),
      this.axis(["s", "arrowdown"], ["w", "arrowup"]),
      this.axis(["a", "arrowleft"], ["d", "arrowright"]),
    ];
  }

  feed(): FeedDirection {
    if (this.down.has("f")) return "insert";
    if (this.down.has("v")) return "retract";
    return "hold";
  }

  /** One-shot key presses since the last call (r/x/t/1/2). */
  takeEdges(): string[] {
    const out = this.edges;
    this.edges = [];
    return out;
  }
}

/** Merge a gamepad snapshot into keyboard axes; keyboard wins when both
 * are active on a channel. Stick layout: left stick = about-z / about-y,
 * right stick x = about-x; right trigger feeds, left trigger retracts. */
export function mergeGamepad(
  keys: Vec3,
  pad: { axes: readonly number[]; buttons: readonly { value: number }[] } | null,
): { axes: Vec3; feed: FeedDirection | null } {
  if (!pad) return { axes: keys, feed: null };
  const axes: Vec3 = [
    keys[0] !== 0 ? keys[0] : (pad.axes[2] ?? 0),
    keys[1] !== 0 ? keys[1] : -(pad.axes[1] ?? 0),
    keys[2] !== 0 ? keys[2] : (pad.axes[0] ?? 0),
  ];
  let feed: FeedDirection | null = null;
  if ((pad.buttons[7]?.value ?? 0) > 0.5) feed = "insert";
  else if ((pad.buttons[6]?.value ?? 0) > 0.5) feed = "retract";
  return { axes, feed };
}
