import { describe, expect, it } from "vitest";

import { KeyboardInput, mapAxes, mergeGamepad, type MapOptions } from "./input.js";
import { norm, type Vec3 } from "./vec.js";

const WORLD: MapOptions = {
  maxAngular: 2.0,
  sensitivity: 1.0,
  tipFrame: false,
  tipDirection: [1, 0, 0],
};

describe("mapAxes", () => {
  it("maps no input to zero velocity (hold)", () => {
    expect(mapAxes([0, 0, 0], WORLD)).toEqual([0, 0, 0]);
  });

  it("puts one full-deflection channel exactly at the max rate", () => {
    expect(mapAxes([1, 0, 0], WORLD)).toEqual([2.0, 0, 0]);
    expect(mapAxes([0, -1, 0], WORLD)).toEqual([0, -2.0, 0]);
  });

  it("never exceeds the max rate in norm", () => {
    const w = mapAxes([1, 1, 1], WORLD);
    expect(norm(w)).toBeCloseTo(2.0, 12);
  });

  it("swallows gamepad drift inside the deadzone", () => {
    expect(mapAxes([0.1, -0.12, 0.05], WORLD)).toEqual([0, 0, 0]);
  });

  it("scales with the sensitivity setting", () => {
    const w = mapAxes([1, 0, 0], { ...WORLD, sensitivity: 0.25 });
    expect(w[0]).toBeCloseTo(0.5, 12);
  });

  it("tip-frame mapping equals world mapping in the home pose", () => {
    const axes: Vec3 = [0.7, -0.4, 0.9];
    const world = mapAxes(axes, WORLD);
    const tip = mapAxes(axes, { ...WORLD, tipFrame: true });
    for (let i = 0; i < 3; i++) expect(tip[i]).toBeCloseTo(world[i], 12);
  });

  it("tip-frame mapping follows the tip direction", () => {
    const opts: MapOptions =
      { ...WORLD, tipFrame: true, tipDirection: [0, 1, 0] };
    const w = mapAxes([1, 0, 0], opts);
    expect(w[0]).toBeCloseTo(0, 12);
    expect(w[1]).toBeCloseTo(2.0, 12);
    expect(w[2]).toBeCloseTo(0, 12);
  });

  it("tip-frame mapping preserves the commanded rate", () => {
    const axes: Vec3 = [0.3, 0.8, -0.5];
    const world = mapAxes(axes, WORLD);
    const tilted = mapAxes(axes,
      { ...WORLD, tipFrame: true, tipDirection: [0.2, -0.7, 0.4] });
    expect(norm(tilted)).toBeCloseTo(norm(world), 12);
  });
});

describe("KeyboardInput", () => {
  it("tracks held steering keys per channel", () => {
    const kb = new KeyboardInput();
    kb.handleKey("d", true);
    expect(kb.axes()).toEqual([0, 0, 1]);
    kb.handleKey("ArrowUp", true);
    expect(kb.axes()).toEqual([0, 1, 1]);
    kb.handleKey("d", false);
    kb.handleKey("ArrowUp", false);
    expect(kb.axes()).toEqual([0, 0, 0]);
  });

  it("opposing keys cancel", () => {
    const kb = new KeyboardInput();
    kb.handleKey("q", true);
    kb.handleKey("e", true);
    expect(kb.axes()[0]).toBe(0);
  });

  it("feed keys are held, not latched", () => {
    const kb = new KeyboardInput();
    expect(kb.feed()).toBe("hold");
    kb.handleKey("f", true);
    expect(kb.feed()).toBe("insert");
    kb.handleKey("f", false);
    kb.handleKey("v", true);
    expect(kb.feed()).toBe("retract");
    kb.handleKey("v", false);
    expect(kb.feed()).toBe("hold");
  });

  it("one-shot keys appear once per press", () => {
    const kb = new KeyboardInput();
    kb.handleKey("r", true);
    kb.handleKey("r", true); // key repeat while held
    expect(kb.takeEdges()).toEqual(["r"]);
    expect(kb.takeEdges()).toEqual([]);
    kb.handleKey("r", false);
    kb.handleKey("r", true);
    expect(kb.takeEdges()).toEqual(["r"]);
  });
});

describe("mergeGamepad", () => {
  const pad = (axes: number[], rt = 0, lt = 0) => ({
    axes,
    buttons: [0, 0, 0, 0, 0, 0, lt, rt].map((value) => ({ value })),
  });

  it("passes keyboard through when no pad is connected", () => {
    expect(mergeGamepad([0, 1, 0], null)).toEqual({
      axes: [0, 1, 0], feed: null,
    });
  });

  it("maps stick axes onto the three channels", () => {
    const { axes } = mergeGamepad([0, 0, 0], pad([0.5, -0.25, 0.75]));
    expect(axes).toEqual([0.75, 0.25, 0.5]);
  });

  it("keyboard wins on a contested channel", () => {
    const { axes } = mergeGamepad([0, -1, 0], pad([0.5, 0.9, 0]));
    expect(axes[1]).toBe(-1);
    expect(axes[2]).toBe(0.5);
  });

  it("triggers feed and retract", () => {
    expect(mergeGamepad([0, 0, 0], pad([0, 0, 0], 1)).feed).toBe("insert");
    expect(mergeGamepad([0, 0, 0], pad([0, 0, 0], 0, 1)).feed).toBe("retract");
  });
});
