"""Real-time bridge between the session engine and the browser UI.

One asyncio task owns the session and steps it at the scenario tick
rate; any number of WebSocket clients send commands and receive full
state snapshots.  Safety rules: velocities are clamped server-side, a
250 ms dead-man timeout reverts to hold when a client goes silent, and
a slow client only ever loses frames (latest-wins queue of depth one),
never delays the tick loop or receives frames out of order.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import session as ss

DEADMAN_S = 0.25
MAX_FEED_PULSES = 32


def _round3(vec, scale=1.0, digits=6):
    return [round(float(x) * scale, digits) for x in vec]


def hello_frame(scenario):
    return {
        "type": "hello",
        "scenario": scenario.name,
        "tick_dt": scenario.tick_dt,
        "ball_diameter_mm": scenario.chain.ball.diameter * 1e3,
        "max_balls": scenario.max_balls,
        "units": list(scenario.unit_ids),
        "targets": [{"id": t.id, "position_mm": _round3(t.position, 1e3, 2),
                     "radius_mm": round(t.radius * 1e3, 2)}
                    for t in scenario.targets],
        "max_angular_velocity": scenario.max_angular_velocity,
        "base_mm": _round3(scenario.chain.base_position, 1e3, 2),
    }


def state_frame(state, scenario):
    metrics = ss.compute_metrics(state, scenario)
    return {
        "type": "state",
        "tick": state.tick,
        "n": state.exposed,
        "positions_mm": [_round3(p, 1e3, 2) for p in state.shape.positions],
        "tip_mm": _round3(state.shape.tip_position, 1e3, 2),
        "dipoles": {uid: _round3(R @ u.neutral_dipole)
                    for uid, u, R in zip(scenario.unit_ids, scenario.units,
                                         state.rotations)},
        "touched": list(state.touched),
        "converged": state.converged,
        "energy": state.energy,
        "events": list(state.events),
        "reconfiguring": (None if state.reconfiguring is None
                          else scenario.unit_ids[state.reconfiguring]),
        "error": state.error,
        "metrics": metrics.to_dict(),
    }


class _Hub:
    """Single-writer session owner plus per-client broadcast queues."""

    def __init__(self, scenario, log_file=None, deadman_s=DEADMAN_S):
        self.scenario = scenario
        self.state = ss.new_session(scenario)
        self.log_file = log_file
        self.deadman_s = deadman_s
        self.clients = {}
        self.velocity = {}
        self.velocity_at = float("-inf")
        self.feed_pulses = 0
        self.pending_reconfigure = None
        self.pending_reset = False
        self.tick_seconds = 0.0
        self._log(self.state, None)

    def ingest(self, msg, now):
        """Apply one wire command; raises ValueError on malformed input."""
        if not isinstance(msg, dict):
            raise ValueError("command must be a JSON object")
        kind = msg.get("type")
        if kind == "velocity":
            uid = msg.get("unit")
            if uid not in self.scenario.unit_ids:
                raise ValueError(f"unknown unit {uid!r}")
            w = np.asarray(msg.get("w", ()), dtype=float).reshape(3)
            if not np.all(np.isfinite(w)):
                raise ValueError("velocity components must be finite")
            speed = float(np.linalg.norm(w))
            limit = self.scenario.max_angular_velocity
            if speed > limit:
                w = w * (limit / speed)
            self.velocity[uid] = w
            self.velocity_at = now
        elif kind == "feed":
            direction = msg.get("direction")
            if direction == "insert":
                self.feed_pulses = min(self.feed_pulses + 1, MAX_FEED_PULSES)
            elif direction == "retract":
                self.feed_pulses = max(self.feed_pulses - 1, -MAX_FEED_PULSES)
            elif direction == "hold":
                self.feed_pulses = 0
            else:
                raise ValueError(f"bad feed direction {direction!r}")
        elif kind == "reconfigure":
            uid = msg.get("unit")
            if uid not in self.scenario.unit_ids:
                raise ValueError(f"unknown unit {uid!r}")
            self.pending_reconfigure = uid
        elif kind == "reset":
            self.pending_reset = True
        else:
            raise ValueError(f"unknown command type {kind!r}")

    def next_command(self, now):
        if now - self.velocity_at > self.deadman_s:
            self.velocity = {}
        if self.feed_pulses > 0:
            feed = "insert"
            self.feed_pulses -= 1
        elif self.feed_pulses < 0:
            feed = "retract"
            self.feed_pulses += 1
        else:
            feed = "hold"
        reconfigure = None
        if (self.pending_reconfigure is not None
                and self.state.reconfiguring is None):
            reconfigure = self.pending_reconfigure
            self.pending_reconfigure = None
        return ss.TeleopCommand(
            angular_velocity={uid: w.copy() for uid, w in self.velocity.items()},
            feed=feed, reconfigure=reconfigure)

    def _log(self, state, cmd):
        if self.log_file is not None:
            self.log_file.write(
                ss.record_line(ss.state_record(state, self.scenario, cmd)) + "\n")

    def advance(self, cmd):
        self.state = ss.step(self.state, cmd, self.scenario)
        self._log(self.state, cmd)
        return self.state

    def broadcast(self, text):
        for queue in self.clients.values():
            if queue.full():
                with contextlib.suppress(asyncio.QueueEmpty):
                    queue.get_nowait()
            queue.put_nowait(text)


async def _tick_loop(hub):
    loop = asyncio.get_running_loop()
    while True:
        started = loop.time()
        if hub.pending_reset:
            hub.pending_reset = False
            hub.state = ss.new_session(hub.scenario)
            hub.state.events.append("reset")
            hub._log(hub.state, None)
        cmd = hub.next_command(started)
        state = await asyncio.to_thread(hub.advance, cmd)
        hub.tick_seconds = loop.time() - started
        hub.broadcast(json.dumps(state_frame(state, hub.scenario)))
        if "reconfigured" in state.events:
            hub.broadcast(json.dumps({"type": "event", "name": "reconfigured",
                                      "tick": state.tick}))
        await asyncio.sleep(max(0.0, hub.scenario.tick_dt
                                - (loop.time() - started)))


async def _sender(websocket, queue):
    while True:
        await websocket.send_text(await queue.get())


def build_app(scenario, *, log_path=None, static_dir=None,
              deadman_s=DEADMAN_S):
    """FastAPI app exposing /ws, /health and optionally the UI bundle."""

    @contextlib.asynccontextmanager
    async def lifespan(app):
        log_file = open(log_path, "a") if log_path else None
        hub = _Hub(scenario, log_file=log_file, deadman_s=deadman_s)
        app.state.hub = hub
        task = asyncio.create_task(_tick_loop(hub))
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task
            if log_file is not None:
                log_file.flush()
                log_file.close()

    app = FastAPI(title="ballchain teleoperation", lifespan=lifespan)

    @app.get("/health")
    async def health():
        hub = app.state.hub
        return JSONResponse({
            "status": "ok",
            "scenario": hub.scenario.name,
            "tick": hub.state.tick,
            "tick_dt": hub.scenario.tick_dt,
            "last_tick_seconds": hub.tick_seconds,
            "converged": hub.state.converged,
            "clients": len(hub.clients),
        })

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        hub = app.state.hub
        queue = asyncio.Queue(maxsize=1)
        hub.clients[websocket] = queue
        loop = asyncio.get_running_loop()
        sender = asyncio.create_task(_sender(websocket, queue))
        try:
            await websocket.send_text(json.dumps(hello_frame(scenario)))
            while True:
                text = await websocket.receive_text()
                try:
                    hub.ingest(json.loads(text), loop.time())
                except (ValueError, TypeError) as exc:
                    await websocket.send_text(json.dumps(
                        {"type": "error", "message": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            hub.clients.pop(websocket, None)

    if static_dir is not None:
        root = Path(static_dir)
        if root.is_dir():
            app.mount("/", StaticFiles(directory=root, html=True), name="ui")
    return app


def serve(scenario, bind="127.0.0.1:8000", log_path=None, static_dir=None):
    """Run the service until interrupted."""
    import uvicorn

    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind must be HOST:PORT, got {bind!r}")
    app = build_app(scenario, log_path=log_path, static_dir=static_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
