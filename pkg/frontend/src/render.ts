// Canvas drawing of a Scene. Only the small slice of the 2D context API
// actually used is required, so tests can pass a recording stub and
// assert that identical scenes produce identical draw calls.

import type { Scene, SceneView } from "./scene.js";

export interface Ctx {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign | string;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

const COLORS = {
  background: "#10141a",
  frame: "#2c3440",
  label: "#8a94a3",
  chain: "#e8ecf2",
  tip: "#ffb454",
  base: "#5c6676",
  target: "#46505e",
  touched: "#3fb950",
  arrow: "#58a6ff",
  arrowBusy: "#d29922",
  banner: "#f85149",
};

const TAU = 2 * Math.PI;

function circle(ctx: Ctx, x: number, y: number, r: number): void {
  ctx.beginPath();
  ctx.arc(x, y, r, 0, TAU);
}

function drawView(ctx: Ctx, view: SceneView): void {
  ctx.strokeStyle = COLORS.frame;
  ctx.lineWidth = 1;
  ctx.strokeRect(view.x + 0.5, view.y + 0.5, view.width - 1, view.height - 1);
  ctx.fillStyle = COLORS.label;
  ctx.font = "12px monospace";
  ctx.textAlign = "left";
  ctx.fillText(view.label, view.x + 8, view.y + 16);

  for (const t of view.targets) {
    if (t.touched) {
      ctx.fillStyle = COLORS.touched;
      ctx.globalAlpha = 0.35;
      circle(ctx, t.x, t.y, t.r);
      ctx.fill();
      ctx.globalAlpha = 1;
    }
    ctx.strokeStyle = t.touched ? COLORS.touched : COLORS.target;
    ctx.lineWidth = 1.5;
    circle(ctx, t.x, t.y, t.r);
    ctx.stroke();
  }

  // sheath exit marker
  ctx.strokeStyle = COLORS.base;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(view.base.x - 6, view.base.y - 6);
  ctx.lineTo(view.base.x + 6, view.base.y + 6);
  ctx.moveTo(view.base.x - 6, view.base.y + 6);
  ctx.lineTo(view.base.x + 6, view.base.y - 6);
  ctx.stroke();

  if (view.chain.length > 1) {
    ctx.strokeStyle = COLORS.chain;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(view.chain[0].x, view.chain[0].y);
    for (const p of view.chain.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  }
  for (const b of view.balls) {
    ctx.fillStyle = b.tip ? COLORS.tip : COLORS.chain;
    circle(ctx, b.x, b.y, b.r);
    ctx.fill();
  }

  for (const a of view.arrows) {
    const color = a.reconfiguring ? COLORS.arrowBusy : COLORS.arrow;
    ctx.strokeStyle = color;
    ctx.lineWidth = 1;
    circle(ctx, a.x, a.y, 26);
    ctx.stroke();
    ctx.lineWidth = 2.5;
    ctx.beginPath();
    ctx.moveTo(a.x, a.y);
    ctx.lineTo(a.x + a.dx, a.y + a.dy);
    ctx.stroke();
    ctx.fillStyle = color;
    circle(ctx, a.x + a.dx, a.y + a.dy, 3);
    ctx.fill();
    ctx.font = "10px monospace";
    ctx.textAlign = "center";
    ctx.fillText(a.unit, a.x, a.y + 38);
  }
}

function banner(ctx: Ctx, text: string, width: number, height: number): void {
  ctx.fillStyle = COLORS.banner;
  ctx.globalAlpha = 0.85;
  ctx.fillRect(0, height / 2 - 22, width, 44);
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#ffffff";
  ctx.font = "16px monospace";
  ctx.textAlign = "center";
  ctx.fillText(text, width / 2, height / 2 + 5);
}

export function render(ctx: Ctx, scene: Scene, width: number,
                       height: number): void {
  ctx.globalAlpha = 1;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);
  for (const view of scene.views) drawView(ctx, view);

  ctx.fillStyle = scene.converged ? COLORS.label : COLORS.banner;
  ctx.font = "12px monospace";
  ctx.textAlign = "left";
  const solver = scene.converged ? "solver ok" : "solver struggling";
  ctx.fillText(
    `tick ${scene.tick}  balls ${scene.n}/${scene.maxBalls}  ${solver}`,
    8, height - 8);

  if (scene.reconfiguring !== null) {
    banner(ctx, `reconfiguring ${scene.reconfiguring} — commands ignored`,
           width, height);
  }
  if (!scene.connected) {
    banner(ctx, "DISCONNECTED", width, height);
  } else if (scene.stale) {
    banner(ctx, "STALE FEED — no frames for over 1 s", width, height);
  }
}
