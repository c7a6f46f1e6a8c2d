import { describe, expect, it } from "vitest";

import { helloLine, stateLine } from "./fixtures.js";
import { parseFrame, type ClientCommand } from "./protocol.js";

describe("parseFrame", () => {
  it("accepts a hello frame", () => {
    const frame = parseFrame(helloLine());
    expect(frame.type).toBe("hello");
    if (frame.type === "hello") {
      expect(frame.units).toEqual(["U1"]);
      expect(frame.targets).toHaveLength(2);
      expect(frame.max_balls).toBe(6);
    }
  });

  it("accepts a state frame", () => {
    const frame = parseFrame(stateLine({ tick: 7, touched: ["T1"] }));
    expect(frame.type).toBe("state");
    if (frame.type === "state") {
      expect(frame.tick).toBe(7);
      expect(frame.positions_mm).toHaveLength(3);
      expect(frame.touched).toEqual(["T1"]);
      expect(frame.metrics.targets[0].touch_tick).toBe(7);
    }
  });

  it("accepts event and error frames", () => {
    expect(parseFrame('{"type": "event", "name": "reconfigured", "tick": 3}'))
      .toMatchObject({ type: "event", name: "reconfigured" });
    expect(parseFrame('{"type": "error", "message": "unknown unit"}'))
      .toMatchObject({ type: "error", message: "unknown unit" });
  });

  it("rejects garbage", () => {
    expect(() => parseFrame("not json")).toThrow(/not valid JSON/);
    expect(() => parseFrame("[1, 2]")).toThrow(/JSON object/);
    expect(() => parseFrame("{}")).toThrow(/unknown frame type/);
    expect(() => parseFrame('{"type": "telemetry"}')).toThrow(/unknown frame/);
    expect(() => parseFrame('{"type": "state", "tick": 1}'))
      .toThrow(/malformed state/);
    expect(() => parseFrame('{"type": "hello"}')).toThrow(/malformed hello/);
  });
});

describe("command serialization", () => {
  it("matches the wire schema the server expects", () => {
    const velocity: ClientCommand =
      { type: "velocity", unit: "U1", w: [0.1, 0, -0.5] };
    expect(JSON.parse(JSON.stringify(velocity))).toEqual({
      type: "velocity", unit: "U1", w: [0.1, 0, -0.5],
    });
    const feed: ClientCommand = { type: "feed", direction: "insert" };
    expect(JSON.stringify(feed))
      .toBe('{"type":"feed","direction":"insert"}');
  });
});
