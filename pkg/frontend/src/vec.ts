// Minimal 3-vector helpers; everything works on plain number triples.

export type Vec3 = [number, number, number];

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

export function normalize(a: Vec3, fallback: Vec3 = [1, 0, 0]): Vec3 {
  const n = norm(a);
  return n > 0 ? scale(a, 1 / n) : ([...fallback] as Vec3);
}

export function clampNorm(a: Vec3, max: number): Vec3 {
  const n = norm(a);
  return n > max ? scale(a, max / n) : a;
}

/** Right-handed orthonormal basis [t, n1, n2] with t along `direction`,
 * built against world z as the up reference (x when t is vertical).
 * Used by the tip-frame input mapping: stick channels become components
 * along the chain's approach direction instead of world axes, and for a
 * tip pointing along +x the basis coincides with the world axes. */
export function frameFrom(direction: Vec3): [Vec3, Vec3, Vec3] {
  const t = normalize(direction);
  const up: Vec3 = Math.hypot(t[0], t[1]) > 1e-9 ? [0, 0, 1] : [1, 0, 0];
  const n1 = normalize(cross(up, t));
  const n2 = cross(t, n1);
  return [t, n1, n2];
}
