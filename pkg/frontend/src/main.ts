// Browser entry point: wires the socket, input devices, canvas, and the
// metrics side panel together. All simulation state is server-side; this
// file only forwards commands and draws the latest frame.

import { KeyboardInput, mapAxes, mergeGamepad } from "./input.js";
import { Client, serviceUrl } from "./net.js";
import type { FeedDirection, HelloFrame, StateFrame } from "./protocol.js";
import { buildScene, replayScenes } from "./scene.js";
import { render, type Ctx } from "./render.js";
import { normalize, sub, type Vec3 } from "./vec.js";

const LOOP_MS = 50;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("scene");
const ctx = canvas.getContext("2d") as unknown as Ctx;
const statusEl = el<HTMLSpanElement>("status");
const unitSelect = el<HTMLSelectElement>("unit");
const sensitivity = el<HTMLInputElement>("sensitivity");
const tipFrameBox = el<HTMLInputElement>("tip-frame");
const metricsBody = el<HTMLTableSectionElement>("metrics");
const eventsEl = el<HTMLDivElement>("events");
const errorEl = el<HTMLDivElement>("error");

let hello: HelloFrame | null = null;
let state: StateFrame | null = null;
let lastFrameAt = -Infinity;
let renderedTick = -1;
const keyboard = new KeyboardInput();
const events: string[] = [];

function tipDirection(): Vec3 {
  if (state === null || state.positions_mm.length < 2) return [1, 0, 0];
  const p = state.positions_mm;
  return normalize(sub(p[p.length - 1] as Vec3, p[p.length - 2] as Vec3));
}

function pushEvent(text: string): void {
  events.push(text);
  if (events.length > 6) events.shift();
  eventsEl.textContent = events.join("\n");
}

const client = new Client(serviceUrl(window.location), {
  onFrame(frame) {
    if (frame.type === "hello") {
      hello = frame;
      el<HTMLSpanElement>("scenario").textContent = frame.scenario;
      unitSelect.innerHTML = "";
      for (const uid of frame.units) {
        const opt = document.createElement("option");
        opt.value = uid;
        opt.textContent = uid;
        unitSelect.appendChild(opt);
      }
      unitSelect.disabled = frame.units.length === 0;
    } else if (frame.type === "state") {
      state = frame;
      lastFrameAt = performance.now();
      for (const name of frame.events) pushEvent(`t${frame.tick} ${name}`);
    } else if (frame.type === "event") {
      pushEvent(`t${frame.tick} ${frame.name}`);
    } else {
      errorEl.textContent = frame.message;
      window.setTimeout(() => { errorEl.textContent = ""; }, 3000);
    }
  },
  onStatus(connected) {
    statusEl.textContent = connected ? "connected" : "disconnected";
    statusEl.className = connected ? "ok" : "bad";
  },
});
client.connect();

// expose the raw frame log + replay helper for console debugging
(window as unknown as Record<string, unknown>).frameLog = client.log;
(window as unknown as Record<string, unknown>).replayScenes = replayScenes;

document.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  keyboard.handleKey(ev.key, true);
});
document.addEventListener("keyup", (ev) => keyboard.handleKey(ev.key, false));

let feedButtonHeld: FeedDirection | null = null;

function heldFeed(): FeedDirection {
  const fromKeys = keyboard.feed();
  if (fromKeys !== "hold") return fromKeys;
  if (feedButtonHeld !== null) return feedButtonHeld;
  return "hold";
}
for (const [id, dir] of [["feed-in", "insert"], ["feed-out", "retract"]] as
     [string, FeedDirection][]) {
  const button = el<HTMLButtonElement>(id);
  button.addEventListener("pointerdown", () => { feedButtonHeld = dir; });
  button.addEventListener("pointerup", () => { feedButtonHeld = null; });
  button.addEventListener("pointerleave", () => { feedButtonHeld = null; });
}
el<HTMLButtonElement>("reconfigure").addEventListener("click", () => {
  if (unitSelect.value) client.send({ type: "reconfigure", unit: unitSelect.value });
});
el<HTMLButtonElement>("reset").addEventListener("click", () => {
  client.send({ type: "reset" });
});

let lastFeedSent: FeedDirection = "hold";

window.setInterval(() => {
  if (hello === null) return;

  for (const key of keyboard.takeEdges()) {
    if (key === "r" && unitSelect.value) {
      client.send({ type: "reconfigure", unit: unitSelect.value });
    } else if (key === "x") {
      client.send({ type: "reset" });
    } else if (key === "t") {
      tipFrameBox.checked = !tipFrameBox.checked;
    } else if (key === "1" || key === "2") {
      const idx = Number(key) - 1;
      if (idx < unitSelect.options.length) unitSelect.selectedIndex = idx;
    }
  }

  const pads = typeof navigator.getGamepads === "function"
    ? navigator.getGamepads() : [];
  const pad = pads.find((p) => p !== null) ?? null;
  const merged = mergeGamepad(keyboard.axes(), pad);

  if (unitSelect.value) {
    const w = mapAxes(merged.axes, {
      maxAngular: hello.max_angular_velocity,
      sensitivity: Number(sensitivity.value) / 100,
      tipFrame: tipFrameBox.checked,
      tipDirection: tipDirection(),
    });
    client.send({ type: "velocity", unit: unitSelect.value, w });
  }

  const feed = merged.feed ?? heldFeed();
  if (feed !== "hold" || lastFeedSent !== "hold") {
    client.send({ type: "feed", direction: feed });
  }
  lastFeedSent = feed;
}, LOOP_MS);

function updatePanel(): void {
  if (state === null) return;
  metricsBody.innerHTML = "";
  for (const row of state.metrics.targets) {
    const tr = document.createElement("tr");
    tr.className = row.touch_tick !== null ? "touched" : "";
    const elapsed = row.elapsed_s === null ? "—" : `${row.elapsed_s.toFixed(1)} s`;
    tr.innerHTML = `<td>${row.id}</td><td>${elapsed}</td>`;
    metricsBody.appendChild(tr);
  }
  const total = state.metrics.total_s;
  el<HTMLSpanElement>("totals").textContent =
    `${state.touched.length}/${hello?.targets.length ?? 0} targets` +
    (total === null ? "" : ` — ${total.toFixed(1)} s`) +
    (state.metrics.complete ? " — complete" : "");
}

function frame(): void {
  if (hello !== null && state !== null) {
    const scene = buildScene(hello, state, {
      ageMs: performance.now() - lastFrameAt,
      connected: client.connected,
      width: canvas.width,
      height: canvas.height,
    });
    render(ctx, scene, canvas.width, canvas.height);
    if (state.tick !== renderedTick) {
      renderedTick = state.tick;
      updatePanel();
    }
  }
  window.requestAnimationFrame(frame);
}
window.requestAnimationFrame(frame);
