// Pure view-model construction. A Scene is a plain-data description of
// everything drawn on screen, derived only from the hello frame, the
// latest state frame, and the frame's age. Rendering the same frames
// always yields the same Scene, which is what makes frame-log replay
// reproducible and testable.

import { parseFrame, type HelloFrame, type StateFrame } from "./protocol.js";

export interface ScenePoint {
  x: number;
  y: number;
}

export interface SceneBall extends ScenePoint {
  r: number;
  tip: boolean;
}

export interface SceneTarget extends ScenePoint {
  id: string;
  r: number;
  touched: boolean;
}

export interface SceneArrow {
  unit: string;
  x: number;
  y: number;
  dx: number;
  dy: number;
  reconfiguring: boolean;
}

export interface SceneView {
  label: string;
  x: number;
  y: number;
  width: number;
  height: number;
  balls: SceneBall[];
  chain: ScenePoint[];
  targets: SceneTarget[];
  base: ScenePoint;
  arrows: SceneArrow[];
}

export interface MetricsRow {
  id: string;
  touched: boolean;
  elapsed: string;
}

export interface Scene {
  tick: number;
  n: number;
  maxBalls: number;
  converged: boolean;
  stale: boolean;
  connected: boolean;
  reconfiguring: string | null;
  errorMsg: string | null;
  events: string[];
  touchedCount: number;
  targetCount: number;
  totalS: string;
  pathMm: string;
  views: SceneView[];
  rows: MetricsRow[];
}

export const STALE_MS = 1000;

// Two fixed orthographic cameras: top view projects world x-y, side view
// projects world x-z. ax/ay pick the world axes mapped to screen x/right
// and y/up.
const VIEWS = [
  { label: "top (x-y)", ax: 0, ay: 1 },
  { label: "side (x-z)", ax: 0, ay: 2 },
];

interface Box {
  min: [number, number, number];
  max: [number, number, number];
}

/** World-space bounds covering everything the chain can reach plus all
 * targets, in mm. Depends only on the hello frame, so the cameras never
 * move during a session. */
export function worldBox(hello: HelloFrame): Box {
  const reach = hello.max_balls * hello.ball_diameter_mm * 1.1;
  const min: [number, number, number] = [0, 0, 0];
  const max: [number, number, number] = [0, 0, 0];
  for (let i = 0; i < 3; i++) {
    min[i] = hello.base_mm[i] - reach;
    max[i] = hello.base_mm[i] + reach;
  }
  for (const t of hello.targets) {
    for (let i = 0; i < 3; i++) {
      min[i] = Math.min(min[i], t.position_mm[i] - 4 * t.radius_mm);
      max[i] = Math.max(max[i], t.position_mm[i] + 4 * t.radius_mm);
    }
  }
  return { min, max };
}

function fmtSeconds(s: number | null): string {
  return s === null ? "—" : `${s.toFixed(1)} s`;
}

export interface BuildOptions {
  ageMs: number;
  connected: boolean;
  width: number;
  height: number;
}

export function buildScene(hello: HelloFrame, state: StateFrame,
                           opts: BuildOptions): Scene {
  const box = worldBox(hello);
  const pad = 14;
  const panelW = Math.floor(opts.width / VIEWS.length);
  const panelH = opts.height;

  const views: SceneView[] = VIEWS.map((spec, vi) => {
    const spanX = box.max[spec.ax] - box.min[spec.ax];
    const spanY = box.max[spec.ay] - box.min[spec.ay];
    const s = Math.min((panelW - 2 * pad) / spanX, (panelH - 2 * pad) / spanY);
    const x0 = vi * panelW;
    // center the world box inside the panel, screen y pointing down
    const offX = x0 + (panelW - s * spanX) / 2;
    const offY = (panelH - s * spanY) / 2;
    const px = (p: number[]): ScenePoint => ({
      x: offX + s * (p[spec.ax] - box.min[spec.ax]),
      y: panelH - offY - s * (p[spec.ay] - box.min[spec.ay]),
    });

    const ballR = Math.max(2, (s * hello.ball_diameter_mm) / 2);
    const balls: SceneBall[] = state.positions_mm.map((p, i) => ({
      ...px(p),
      r: ballR,
      tip: i === state.positions_mm.length - 1,
    }));
    const targets: SceneTarget[] = hello.targets.map((t) => ({
      id: t.id,
      ...px(t.position_mm),
      r: Math.max(3, s * t.radius_mm),
      touched: state.touched.includes(t.id),
    }));
    const arrows: SceneArrow[] = hello.units.map((uid, ui) => {
      const d = state.dipoles[uid] ?? [0, 0, 1];
      return {
        unit: uid,
        x: x0 + panelW - 34,
        y: 34 + ui * 56,
        dx: 24 * d[spec.ax],
        dy: -24 * d[spec.ay],
        reconfiguring: state.reconfiguring === uid,
      };
    });
    return {
      label: spec.label,
      x: x0,
      y: 0,
      width: panelW,
      height: panelH,
      balls,
      chain: balls.map((b) => ({ x: b.x, y: b.y })),
      targets,
      base: px(hello.base_mm),
      arrows,
    };
  });

  const rows: MetricsRow[] = state.metrics.targets.map((t) => ({
    id: t.id,
    touched: t.touch_tick !== null,
    elapsed: fmtSeconds(t.elapsed_s),
  }));

  return {
    tick: state.tick,
    n: state.n,
    maxBalls: hello.max_balls,
    converged: state.converged,
    stale: opts.ageMs > STALE_MS,
    connected: opts.connected,
    reconfiguring: state.reconfiguring,
    errorMsg: state.error,
    events: state.events,
    touchedCount: state.touched.length,
    targetCount: hello.targets.length,
    totalS: fmtSeconds(state.metrics.total_s),
    pathMm: `${state.metrics.tip_path_length.toFixed(1)} mm`,
    views,
    rows,
  };
}

/** Rebuild the Scene for every state frame in a raw frame log. Replay
 * is deterministic: the same lines always produce the same scenes. */
export function replayScenes(lines: string[], width: number,
                             height: number): Scene[] {
  let hello: HelloFrame | null = null;
  const scenes: Scene[] = [];
  for (const line of lines) {
    const frame = parseFrame(line);
    if (frame.type === "hello") {
      hello = frame;
    } else if (frame.type === "state" && hello !== null) {
      scenes.push(buildScene(hello, frame,
                             { ageMs: 0, connected: true, width, height }));
    }
  }
  return scenes;
}
