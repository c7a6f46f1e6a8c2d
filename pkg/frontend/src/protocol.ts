// Wire types for the teleoperation service. The server is authoritative:
// the UI only ever renders what arrives in these frames and talks back
// through ClientCommand objects.

export interface TargetInfo {
  id: string;
  position_mm: number[];
  radius_mm: number;
}

export interface HelloFrame {
  type: "hello";
  scenario: string;
  tick_dt: number;
  ball_diameter_mm: number;
  max_balls: number;
  units: string[];
  targets: TargetInfo[];
  max_angular_velocity: number;
  base_mm: number[];
}

export interface TargetTiming {
  id: string;
  touch_tick: number | null;
  elapsed_s: number | null;
}

export interface MetricsInfo {
  targets: TargetTiming[];
  total_s: number | null;
  tip_path_length: number;
  complete: boolean;
}

export interface StateFrame {
  type: "state";
  tick: number;
  n: number;
  positions_mm: number[][];
  tip_mm: number[];
  dipoles: Record<string, number[]>;
  touched: string[];
  converged: boolean;
  energy: number;
  events: string[];
  reconfiguring: string | null;
  error: string | null;
  metrics: MetricsInfo;
}

export interface EventFrame {
  type: "event";
  name: string;
  tick: number;
}

export interface ErrorFrame {
  type: "error";
  message: string;
}

export type ServerFrame = HelloFrame | StateFrame | EventFrame | ErrorFrame;

export type FeedDirection = "insert" | "retract" | "hold";

export type ClientCommand =
  | { type: "velocity"; unit: string; w: [number, number, number] }
  | { type: "feed"; direction: FeedDirection }
  | { type: "reconfigure"; unit: string }
  | { type: "reset" };

function isVec(x: unknown, len: number): boolean {
  return Array.isArray(x) && x.length === len &&
    x.every((c) => typeof c === "number" && Number.isFinite(c));
}

/** Parse and sanity-check one frame off the socket. Throws on anything
 * that does not look like a frame the server would send. */
export function parseFrame(text: string): ServerFrame {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new Error("frame is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("frame must be a JSON object");
  }
  const frame = doc as Record<string, unknown>;
  switch (frame.type) {
    case "hello": {
      if (typeof frame.scenario !== "string" || !Array.isArray(frame.units) ||
          !Array.isArray(frame.targets) || !isVec(frame.base_mm, 3) ||
          typeof frame.max_balls !== "number") {
        throw new Error("malformed hello frame");
      }
      return frame as unknown as HelloFrame;
    }
    case "state": {
      if (typeof frame.tick !== "number" || typeof frame.n !== "number" ||
          !Array.isArray(frame.positions_mm) || !isVec(frame.tip_mm, 3) ||
          !Array.isArray(frame.touched)) {
        throw new Error("malformed state frame");
      }
      return frame as unknown as StateFrame;
    }
    case "event": {
      if (typeof frame.name !== "string") {
        throw new Error("malformed event frame");
      }
      return frame as unknown as EventFrame;
    }
    case "error": {
      if (typeof frame.message !== "string") {
        throw new Error("malformed error frame");
      }
      return frame as unknown as ErrorFrame;
    }
    default:
      throw new Error(`unknown frame type ${String(frame.type)}`);
  }
}
