// Canned server frames for tests, shaped exactly like the Python
// service's output (mm positions rounded to 0.01, metrics snapshot in
// every state frame).

export interface StateOverrides {
  tick?: number;
  n?: number;
  positions_mm?: number[][];
  touched?: string[];
  dipole?: number[];
  reconfiguring?: string | null;
  events?: string[];
  converged?: boolean;
}

export function helloLine(): string {
  return JSON.stringify({
    type: "hello",
    scenario: "ui-test",
    tick_dt: 0.05,
    ball_diameter_mm: 3.18,
    max_balls: 6,
    units: ["U1"],
    targets: [
      { id: "T1", position_mm: [9.0, 3.0, 0.0], radius_mm: 2.5 },
      { id: "T2", position_mm: [12.0, -3.0, 0.0], radius_mm: 2.5 },
    ],
    max_angular_velocity: 2.0,
    base_mm: [0.0, 0.0, 0.0],
  });
}

export function stateLine(over: StateOverrides = {}): string {
  const n = over.n ?? 3;
  const positions = over.positions_mm ??
    Array.from({ length: n }, (_, i) => [i * 3.18, 0.0, 0.0]);
  const touched = over.touched ?? [];
  const tick = over.tick ?? 1;
  return JSON.stringify({
    type: "state",
    tick,
    n: positions.length,
    positions_mm: positions,
    tip_mm: positions[positions.length - 1],
    dipoles: { U1: over.dipole ?? [0.0, 0.0, -1.0] },
    touched,
    converged: over.converged ?? true,
    energy: -1.23e-4,
    events: over.events ?? [],
    reconfiguring: over.reconfiguring ?? null,
    error: null,
    metrics: {
      targets: [
        { id: "T1", touch_tick: touched.includes("T1") ? tick : null,
          elapsed_s: touched.includes("T1") ? tick * 0.05 : null },
        { id: "T2", touch_tick: touched.includes("T2") ? tick : null,
          elapsed_s: touched.includes("T2") ? 0.0 : null },
      ],
      total_s: touched.length > 0 ? tick * 0.05 : null,
      tip_path_length: 4.2,
      complete: touched.length === 2,
    },
  });
}
