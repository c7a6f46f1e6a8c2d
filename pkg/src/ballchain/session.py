"""Quasi-static teleoperation sessions and batch studies.

A session owns one chain plus one or two actuation units.  Every tick
integrates the commanded magnet rotations, feeds or retracts balls,
re-solves the chain equilibrium warm-started from the previous shape,
and latches target touches.  Chain inertia and flow forces are ignored;
each tick is a fresh static equilibrium.

Batch entry points (`sweep_workspace`, `run_alignment_study`) reuse the
same solver with per-step continuation so neighbouring field angles stay
on the same solution branch.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from shapely.geometry import Polygon
from shapely.ops import unary_union

from . import units as uq
from .actuation import (ActuationUnit, alignment_velocity,
                        estimate_dipole_direction, integrate_rotation,
                        sensor_reading)
from .chain import (BallSpec, ChainConfig, ChainShape, EnvField, SleeveSpec,
                    SolverConfig, adapt_shape, alignment_angle,
                    solve_equilibrium)
from .magnetics import Dipole, cylinder_moment


# ---------------------------------------------------------------------------
# scenario model


@dataclass
class Target:
    """A touch target: sphere of given radius around a point."""

    id: str
    position: np.ndarray
    radius: float = 2.5e-3

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        if self.radius <= 0.0:
            raise ValueError("target radius must be positive")


@dataclass
class Scenario:
    """Resolved session setup: chain, actuation units, targets, limits."""

    name: str
    chain: ChainConfig                      # n here is max_balls
    units: list
    unit_ids: list
    targets: list
    field_mode: str = "sources"             # "sources" | "uniform"
    uniform_field: np.ndarray | None = None
    tick_dt: float = 0.05
    start_balls: int = 4
    feed_interval: float = 0.2
    max_angular_velocity: float = 2.0       # rad/s
    reconfigure_tolerance: float = np.deg2rad(0.5)
    description: str = ""

    @property
    def max_balls(self):
        return self.chain.n

    def unit_index(self, unit_id):
        try:
            return self.unit_ids.index(unit_id)
        except ValueError:
            raise KeyError(f"unknown unit id {unit_id!r}") from None

    def describe(self):
        """Plain-data snapshot (SI units) for manifests and hello frames."""
        doc = {
            "name": self.name,
            "tick_dt": self.tick_dt,
            "field_mode": self.field_mode,
            "max_balls": self.max_balls,
            "start_balls": self.start_balls,
            "feed_interval": self.feed_interval,
            "max_angular_velocity": self.max_angular_velocity,
            "ball_diameter": self.chain.ball.diameter,
            "sleeve": self.chain.sleeve is not None,
            "base_position": [float(x) for x in self.chain.base_position],
            "base_tangent": [float(x) for x in self.chain.base_tangent],
            "units": [
                {
                    "id": uid,
                    "position": [float(x) for x in u.position],
                    "moment_magnitude": float(u.moment_magnitude),
                    "gain": float(u.gain),
                }
                for uid, u in zip(self.unit_ids, self.units)
            ],
            "targets": [
                {
                    "id": t.id,
                    "position": [float(x) for x in t.position],
                    "radius": float(t.radius),
                }
                for t in self.targets
            ],
        }
        if self.uniform_field is not None:
            doc["uniform_field"] = [float(x) for x in self.uniform_field]
        return doc


class ScenarioError(ValueError):
    """Scenario document failed validation; .errors lists every problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__(
            "scenario validation failed:\n  " + "\n  ".join(self.errors))


def _floats(value, size, path, errors):
    if not isinstance(value, (list, tuple)) or len(value) != size:
        errors.append(f"{path}: expected {size} numbers")
        return None
    try:
        return np.array([float(c) for c in value])
    except (TypeError, ValueError):
        errors.append(f"{path}: expected {size} numbers")
        return None


def _quantity(value, kind, path, errors, minimum=None):
    try:
        out = uq.parse_quantity(value, kind)
    except ValueError as exc:
        errors.append(f"{path}: {exc}")
        return None
    if minimum is not None and out <= minimum:
        errors.append(f"{path}: must be > {minimum}")
        return None
    return out


def _check_keys(doc, allowed, path, errors):
    for key in doc:
        if key not in allowed:
            errors.append(f"{path}: unknown key {key!r}")


def _build_chain(doc, errors):
    _check_keys(doc, {"ball_diameter", "remanence", "max_balls", "start_balls",
                      "base_position", "base_tangent", "gravity", "sleeve"},
                "chain", errors)
    diameter = _quantity(doc.get("ball_diameter", 3.175e-3), "length",
                         "chain.ball_diameter", errors, minimum=0.0)
    remanence = doc.get("remanence", 1.45)
    if not isinstance(remanence, (int, float)) or remanence <= 0.0:
        errors.append("chain.remanence: must be a positive number")
        remanence = None
    max_balls = doc.get("max_balls", 16)
    if not isinstance(max_balls, int) or max_balls < 1:
        errors.append("chain.max_balls: must be an integer >= 1")
        max_balls = None
    start = doc.get("start_balls", min(4, max_balls or 4))
    if not isinstance(start, int) or start < 1 or (max_balls and start > max_balls):
        errors.append("chain.start_balls: must be an integer in [1, max_balls]")
        start = None
    base_p = doc.get("base_position", [0.0, 0.0, 0.0])
    base_p = ([uq.parse_quantity(c, "length") for c in base_p]
              if isinstance(base_p, (list, tuple)) and len(base_p) == 3
              else _floats(base_p, 3, "chain.base_position", errors))
    base_t = _floats(doc.get("base_tangent", [1.0, 0.0, 0.0]), 3,
                     "chain.base_tangent", errors)
    if base_t is not None and np.linalg.norm(base_t) == 0.0:
        errors.append("chain.base_tangent: must be nonzero")
        base_t = None
    gravity = _floats(doc.get("gravity", [0.0, 0.0, 0.0]), 3,
                      "chain.gravity", errors)

    sleeve = None
    sdoc = doc.get("sleeve")
    if sdoc is not None:
        if not isinstance(sdoc, dict):
            errors.append("chain.sleeve: expected an object")
        else:
            _check_keys(sdoc, {"enabled", "elastic_modulus", "outer_diameter",
                               "inner_diameter"}, "chain.sleeve", errors)
            if sdoc.get("enabled", True):
                modulus = _quantity(sdoc.get("elastic_modulus", 340.0e3),
                                    "pressure", "chain.sleeve.elastic_modulus",
                                    errors, minimum=0.0)
                outer = _quantity(sdoc.get("outer_diameter", 3.5e-3), "length",
                                  "chain.sleeve.outer_diameter", errors,
                                  minimum=0.0)
                inner = _quantity(sdoc.get("inner_diameter", 3.0e-3), "length",
                                  "chain.sleeve.inner_diameter", errors,
                                  minimum=0.0)
                if all(p is not None for p in (modulus, outer, inner)):
                    if inner >= outer:
                        errors.append("chain.sleeve: inner_diameter must be "
                                      "smaller than outer_diameter")
                    else:
                        sleeve = SleeveSpec.from_tube(outer, inner, modulus)

    parts = (diameter, remanence, max_balls, start, base_p, base_t, gravity)
    if any(p is None for p in parts):
        return None, None
    ball = BallSpec.from_material(diameter, remanence)
    config = ChainConfig(max_balls, ball, sleeve=sleeve,
                         base_position=np.asarray(base_p, dtype=float),
                         base_tangent=base_t, gravity=gravity)
    return config, start


def _build_unit(doc, index, errors):
    path = f"units[{index}]"
    if not isinstance(doc, dict):
        errors.append(f"{path}: expected an object")
        return None, None
    _check_keys(doc, {"id", "position", "magnet", "moment", "neutral_dipole",
                      "gain", "sensor_distance", "rotation"}, path, errors)
    uid = doc.get("id")
    if not isinstance(uid, str) or not uid:
        errors.append(f"{path}.id: required non-empty string")
        uid = None
    position = doc.get("position")
    if isinstance(position, (list, tuple)) and len(position) == 3:
        try:
            position = np.array([uq.parse_quantity(c, "length") for c in position])
        except ValueError as exc:
            errors.append(f"{path}.position: {exc}")
            position = None
    else:
        errors.append(f"{path}.position: required 3-vector")
        position = None

    moment = doc.get("moment")
    mdoc = doc.get("magnet")
    if moment is not None and mdoc is not None:
        errors.append(f"{path}: give either magnet geometry or moment, not both")
        moment = None
    elif mdoc is not None:
        if not isinstance(mdoc, dict):
            errors.append(f"{path}.magnet: expected an object")
            moment = None
        else:
            _check_keys(mdoc, {"diameter", "height", "remanence"},
                        f"{path}.magnet", errors)
            dm = _quantity(mdoc.get("diameter", 76.2e-3), "length",
                           f"{path}.magnet.diameter", errors, minimum=0.0)
            hm = _quantity(mdoc.get("height", 38.1e-3), "length",
                           f"{path}.magnet.height", errors, minimum=0.0)
            br = mdoc.get("remanence", 1.45)
            if dm is not None and hm is not None:
                moment = cylinder_moment(dm, hm, br)
    elif moment is None:
        moment = cylinder_moment(76.2e-3, 38.1e-3, 1.45)
    elif not isinstance(moment, (int, float)) or moment <= 0.0:
        errors.append(f"{path}.moment: must be a positive number (A m^2)")
        moment = None

    neutral = _floats(doc.get("neutral_dipole", [0.0, 0.0, 1.0]), 3,
                      f"{path}.neutral_dipole", errors)
    gain = doc.get("gain", 10.0)
    if not isinstance(gain, (int, float)) or gain <= 0.0:
        errors.append(f"{path}.gain: must be a positive number (1/s)")
        gain = None
    sensor = _quantity(doc.get("sensor_distance", 0.12), "length",
                       f"{path}.sensor_distance", errors, minimum=0.0)
    rotation = np.eye(3)
    if "rotation" in doc:
        rot = doc["rotation"]
        flat = _floats([c for row in rot for c in row] if isinstance(rot, list)
                       and all(isinstance(r, list) for r in rot) else rot,
                       9, f"{path}.rotation", errors)
        rotation = flat.reshape(3, 3) if flat is not None else None

    parts = (uid, position, moment, neutral, gain, sensor, rotation)
    if any(p is None for p in parts):
        return uid, None
    try:
        unit = ActuationUnit(moment_magnitude=float(moment), position=position,
                             rotation=rotation, neutral_dipole=neutral,
                             gain=float(gain), sensor_distance=sensor)
    except ValueError as exc:
        errors.append(f"{path}: {exc}")
        return uid, None
    return uid, unit


def _build_targets(docs, errors):
    targets = []
    seen = set()
    for i, tdoc in enumerate(docs):
        path = f"targets[{i}]"
        if not isinstance(tdoc, dict):
            errors.append(f"{path}: expected an object")
            continue
        _check_keys(tdoc, {"id", "position", "radius"}, path, errors)
        tid = tdoc.get("id")
        if not isinstance(tid, str) or not tid:
            errors.append(f"{path}.id: required non-empty string")
            continue
        if tid in seen:
            errors.append(f"{path}.id: duplicate target id {tid!r}")
            continue
        seen.add(tid)
        pos = tdoc.get("position")
        if not (isinstance(pos, (list, tuple)) and len(pos) == 3):
            errors.append(f"{path}.position: required 3-vector")
            continue
        try:
            pos = np.array([uq.parse_quantity(c, "length") for c in pos])
        except ValueError as exc:
            errors.append(f"{path}.position: {exc}")
            continue
        radius = _quantity(tdoc.get("radius", 2.5e-3), "length",
                           f"{path}.radius", errors, minimum=0.0)
        if radius is None:
            continue
        targets.append(Target(tid, pos, radius))
    return targets


def scenario_from_dict(doc):
    """Validate a scenario document and build the Scenario.

    Raises ScenarioError listing every problem found, not just the first.
    """
    errors = []
    if not isinstance(doc, dict):
        raise ScenarioError(["document root must be an object"])
    _check_keys(doc, {"name", "description", "tick_dt", "chain", "field_mode",
                      "uniform_field", "units", "targets", "limits"},
                "document", errors)
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        errors.append("name: must be a string")
        name = "scenario"
    tick_dt = _quantity(doc.get("tick_dt", 0.05), "time", "tick_dt", errors,
                        minimum=0.0)

    if "chain" not in doc or not isinstance(doc.get("chain"), dict):
        errors.append("chain: required object")
        config, start = None, None
    else:
        config, start = _build_chain(doc["chain"], errors)

    mode = doc.get("field_mode", "sources")
    if mode not in ("sources", "uniform"):
        errors.append("field_mode: must be 'sources' or 'uniform'")
        mode = "sources"

    unit_ids, unit_objs = [], []
    uniform = None
    if mode == "uniform":
        if doc.get("units"):
            errors.append("units: must be empty in uniform field mode")
        fdoc = doc.get("uniform_field")
        if not isinstance(fdoc, dict):
            errors.append("uniform_field: required object with magnitude "
                          "and direction")
        else:
            _check_keys(fdoc, {"magnitude", "direction"}, "uniform_field", errors)
            mag = _quantity(fdoc.get("magnitude"), "field",
                            "uniform_field.magnitude", errors)
            direction = _floats(fdoc.get("direction"), 3,
                                "uniform_field.direction", errors)
            if direction is not None and np.linalg.norm(direction) == 0.0:
                errors.append("uniform_field.direction: must be nonzero")
                direction = None
            if mag is not None and direction is not None:
                uniform = mag * direction / np.linalg.norm(direction)
    else:
        udocs = doc.get("units")
        if not isinstance(udocs, list) or not 1 <= len(udocs) <= 2:
            errors.append("units: required list of 1 or 2 actuation units")
        else:
            for i, udoc in enumerate(udocs):
                uid, unit = _build_unit(udoc, i, errors)
                if uid is not None and uid in unit_ids:
                    errors.append(f"units[{i}].id: duplicate unit id {uid!r}")
                elif unit is not None:
                    unit_ids.append(uid)
                    unit_objs.append(unit)

    tdocs = doc.get("targets", [])
    if not isinstance(tdocs, list):
        errors.append("targets: expected a list")
        targets = []
    else:
        targets = _build_targets(tdocs, errors)

    limits = doc.get("limits", {})
    max_w, feed_int, recon_tol = 2.0, 0.2, np.deg2rad(0.5)
    if not isinstance(limits, dict):
        errors.append("limits: expected an object")
    else:
        _check_keys(limits, {"max_angular_velocity", "feed_interval",
                             "reconfigure_tolerance"}, "limits", errors)
        if "max_angular_velocity" in limits:
            max_w = _quantity(limits["max_angular_velocity"], "angular_velocity",
                              "limits.max_angular_velocity", errors, minimum=0.0)
        if "feed_interval" in limits:
            feed_int = _quantity(limits["feed_interval"], "time",
                                 "limits.feed_interval", errors, minimum=0.0)
        if "reconfigure_tolerance" in limits:
            recon_tol = _quantity(limits["reconfigure_tolerance"], "angle",
                                  "limits.reconfigure_tolerance", errors,
                                  minimum=0.0)

    if errors:
        raise ScenarioError(errors)
    return Scenario(name=name, chain=config, units=unit_objs, unit_ids=unit_ids,
                    targets=targets, field_mode=mode, uniform_field=uniform,
                    tick_dt=tick_dt, start_balls=start, feed_interval=feed_int,
                    max_angular_velocity=max_w, reconfigure_tolerance=recon_tol,
                    description=doc.get("description", ""))


def bundled_scenarios():
    """Names of the scenario documents shipped with the package."""
    root = resources.files("ballchain") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(source):
    """Load a Scenario from a dict, a bundled name, or a JSON file path."""
    if isinstance(source, dict):
        return scenario_from_dict(source)
    text = None
    name = str(source)
    if "/" not in name and not name.endswith(".json"):
        bundled = resources.files("ballchain") / "scenarios" / f"{name}.json"
        if bundled.is_file():
            text = bundled.read_text()
    if text is None:
        path = Path(source)
        if not path.is_file():
            raise ScenarioError(
                [f"no bundled scenario or file named {name!r} "
                 f"(bundled: {', '.join(bundled_scenarios())})"])
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"invalid JSON: {exc}"]) from None
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# session state and stepping


@dataclass
class TeleopCommand:
    """One tick of operator input.

    angular_velocity maps unit id to a world-frame rad/s vector; feed is
    "insert", "retract" or "hold"; reconfigure names a unit to slew back
    to its neutral dipole axis.
    """

    angular_velocity: dict = field(default_factory=dict)
    feed: str = "hold"
    reconfigure: str | None = None

    def is_hold(self):
        return (not self.angular_velocity and self.feed == "hold"
                and self.reconfigure is None)


def command_to_dict(cmd):
    return {
        "w": {uid: [float(x) for x in np.asarray(w, dtype=float)]
              for uid, w in cmd.angular_velocity.items()},
        "feed": cmd.feed,
        "reconfigure": cmd.reconfigure,
    }


def command_from_dict(doc):
    w = {uid: np.asarray(v, dtype=float) for uid, v in (doc.get("w") or {}).items()}
    return TeleopCommand(angular_velocity=w, feed=doc.get("feed", "hold"),
                         reconfigure=doc.get("reconfigure"))


@dataclass
class SessionState:
    tick: int
    exposed: int
    shape: ChainShape
    rotations: list
    touched: dict                      # target id -> touch tick, insertion = order
    feed_credit: float = 0.0
    reconfiguring: int | None = None   # unit index while slewing, else None
    path_length: float = 0.0
    energy: float = 0.0
    converged: bool = True
    events: list = field(default_factory=list)
    error: str | None = None

    @property
    def tip_position(self):
        return self.shape.tip_position


def _field_for(scenario, rotations):
    if scenario.field_mode == "uniform":
        return EnvField.uniform(scenario.uniform_field)
    sources = [Dipole(u.position, u.moment_magnitude * (R @ u.neutral_dipole))
               for u, R in zip(scenario.units, rotations)]
    return EnvField.from_sources(sources)


def _solve(scenario, exposed, env, warm=None):
    config = scenario.chain.with_n(exposed)
    solver = SolverConfig(warm_start=warm)
    return solve_equilibrium(config, env, solver)


def new_session(scenario):
    """Solve the entry equilibrium and return the initial state."""
    rotations = [u.rotation.copy() for u in scenario.units]
    env = _field_for(scenario, rotations)
    result = _solve(scenario, scenario.start_balls, env)
    if not result.converged:
        raise RuntimeError("entry equilibrium did not converge; "
                           "check the scenario field strength")
    state = SessionState(tick=0, exposed=scenario.start_balls,
                         shape=result.shape, rotations=rotations,
                         touched={}, energy=result.energy,
                         converged=True)
    check_targets(state.shape.tip_position, scenario.targets, state.touched, 0)
    return state


def check_targets(tip, targets, touched, tick):
    """Latch targets whose sphere contains the tip; returns the dict."""
    tip = np.asarray(tip, dtype=float)
    for target in targets:
        if target.id in touched:
            continue
        if np.linalg.norm(tip - target.position) <= target.radius:
            touched[target.id] = tick
    return touched


def _reconfigure_tick(scenario, state, rots, events, rng):
    """One control step of the neutral-axis slew; returns the finished flag."""
    idx = state.reconfiguring
    unit = scenario.units[idx]
    work = dataclasses.replace(unit, rotation=rots[idx])
    b = sensor_reading(work, rng=rng)
    m_hat = estimate_dipole_direction(b, work)
    c = unit.neutral_dipole
    angle = float(np.arctan2(np.linalg.norm(np.cross(m_hat, c)),
                             float(m_hat @ c)))
    if angle <= scenario.reconfigure_tolerance:
        events.append("reconfigured")
        return True
    omega = alignment_velocity(m_hat, c, work)
    rots[idx] = integrate_rotation(rots[idx], omega, scenario.tick_dt)
    return False


def step(state, cmd, scenario, rng=None):
    """Advance the session by one tick; returns a new SessionState.

    While a reconfiguration is in flight, velocity and feed input is
    ignored ("command-ignored" event) until the slew converges.  A
    solver failure preserves the previous pose, drops the command and
    surfaces the error.
    """
    if cmd is None:
        cmd = TeleopCommand()
    dt = scenario.tick_dt
    tick = state.tick + 1
    events = []
    rots = [R.copy() for R in state.rotations]
    exposed = state.exposed
    credit = state.feed_credit
    reconfiguring = state.reconfiguring

    if reconfiguring is not None:
        if not cmd.is_hold():
            events.append("command-ignored")
        if _reconfigure_tick(scenario, state, rots, events, rng):
            reconfiguring = None
    elif cmd.reconfigure is not None:
        reconfiguring = scenario.unit_index(cmd.reconfigure)
        events.append("reconfigure-started")
    else:
        for uid, w in cmd.angular_velocity.items():
            idx = scenario.unit_index(uid)
            w = np.asarray(w, dtype=float).reshape(3)
            speed = np.linalg.norm(w)
            if speed > scenario.max_angular_velocity:
                w = w * (scenario.max_angular_velocity / speed)
                events.append("velocity-clamped")
            if speed > 0.0:
                rots[idx] = integrate_rotation(rots[idx], w, dt)
        if cmd.feed == "insert":
            credit = max(credit, 0.0) + dt
        elif cmd.feed == "retract":
            credit = min(credit, 0.0) - dt
        else:
            credit = 0.0
        if credit >= scenario.feed_interval:
            credit -= scenario.feed_interval
            if exposed < scenario.max_balls:
                exposed += 1
            else:
                events.append("feed-at-max")
        elif credit <= -scenario.feed_interval:
            credit += scenario.feed_interval
            if exposed > 1:
                exposed -= 1
            else:
                events.append("feed-at-min")

    env = _field_for(scenario, rots)
    warm = adapt_shape(state.shape, exposed, scenario.chain.ball.diameter,
                       scenario.chain.base_tangent)
    result = _solve(scenario, exposed, env, warm=warm)
    if not result.converged:
        return dataclasses.replace(
            state, tick=tick, events=["solver-failed"],
            error=f"equilibrium solve failed at tick {tick} "
                  f"(gradient {result.gradient_norm:.2e})")

    touched = dict(state.touched)
    check_targets(result.shape.tip_position, scenario.targets, touched, tick)
    path = state.path_length + float(
        np.linalg.norm(result.shape.tip_position - state.shape.tip_position))
    return SessionState(tick=tick, exposed=exposed, shape=result.shape,
                        rotations=rots, touched=touched, feed_credit=credit,
                        reconfiguring=reconfiguring, path_length=path,
                        energy=result.energy, converged=True, events=events,
                        error=None)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class TargetTiming:
    id: str
    touch_tick: int | None
    elapsed_s: float | None            # since the previous target's touch


@dataclass
class Metrics:
    targets: list
    total_s: float | None
    tip_path_length: float
    complete: bool

    def to_dict(self):
        return {
            "targets": [{"id": t.id, "touch_tick": t.touch_tick,
                         "elapsed_s": t.elapsed_s} for t in self.targets],
            "total_s": self.total_s,
            "tip_path_length": self.tip_path_length,
            "complete": self.complete,
        }


def compute_metrics(state, scenario):
    """Per-target touch timings in scenario order, plus totals.

    elapsed_s for the first target counts from session start; later
    targets count from the previous target's touch.  Untouched targets
    get None entries and mark the session incomplete.
    """
    dt = scenario.tick_dt
    rows = []
    prev_tick = 0
    complete = True
    last_touch = None
    for target in scenario.targets:
        tick = state.touched.get(target.id)
        if tick is None:
            rows.append(TargetTiming(target.id, None, None))
            complete = False
            continue
        rows.append(TargetTiming(target.id, tick, (tick - prev_tick) * dt))
        prev_tick = tick
        last_touch = tick if last_touch is None else max(last_touch, tick)
    total = None if last_touch is None else last_touch * dt
    return Metrics(targets=rows, total_s=total,
                   tip_path_length=state.path_length,
                   complete=complete and bool(scenario.targets))


# ---------------------------------------------------------------------------
# session logs


def state_record(state, scenario, cmd=None):
    """One JSON-ready log record; key order is fixed for reproducibility."""
    rec = {
        "tick": state.tick,
        "cmd": None if cmd is None else command_to_dict(cmd),
        "n": state.exposed,
        "tip": [float(x) for x in state.shape.tip_position],
        "dipoles": {uid: [float(x) for x in (R @ u.neutral_dipole)]
                    for uid, u, R in zip(scenario.unit_ids, scenario.units,
                                         state.rotations)},
        "touched": list(state.touched),
        "energy": float(state.energy),
        "converged": bool(state.converged),
        "reconfiguring": (None if state.reconfiguring is None
                          else scenario.unit_ids[state.reconfiguring]),
        "events": list(state.events),
    }
    if state.error is not None:
        rec["error"] = state.error
    return rec


def record_line(rec):
    return json.dumps(rec, separators=(",", ":"))


def run_command_log(scenario, commands):
    """Run a command sequence from a fresh session; returns JSON-lines.

    The first line is the entry state (cmd null); each following line
    carries the command consumed that tick plus the resulting state, so
    a log can be replayed byte-for-byte with commands_from_log.
    """
    state = new_session(scenario)
    lines = [record_line(state_record(state, scenario))]
    for cmd in commands:
        state = step(state, cmd, scenario)
        lines.append(record_line(state_record(state, scenario, cmd)))
    return lines


def commands_from_log(lines):
    """Recover the command sequence from a session log."""
    commands = []
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("cmd") is not None:
            commands.append(command_from_dict(rec["cmd"]))
    return commands


# ---------------------------------------------------------------------------
# batch studies


@dataclass
class SweepResult:
    lengths: tuple
    angles_deg: np.ndarray
    tips: dict                        # length -> (n_angles, 3), NaN if skipped
    skipped: list                     # (length, angle_deg) pairs
    area: float                       # m^2
    polygon: object | None


def _plane_basis(points):
    """Best-fit plane through the points: (origin, e1, e2)."""
    pts = np.asarray(points, dtype=float)
    center = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - center, full_matrices=False)
    return center, vt[0], vt[1]


def _trace_polygon(base, tips_by_length):
    """Union of the per-length fans [base, tip_0, ..., tip_k]."""
    cloud = [base] + [row for tips in tips_by_length for row in tips]
    center, e1, e2 = _plane_basis(cloud)

    def project(p):
        return ((p - center) @ e1, (p - center) @ e2)

    fans = []
    for tips in tips_by_length:
        rows = [t for t in tips if not np.any(np.isnan(t))]
        if len(rows) < 2:
            continue
        poly = Polygon([project(base)] + [project(t) for t in rows])
        if not poly.is_valid:
            poly = poly.buffer(0.0)
        fans.append(poly)
    if not fans:
        return None, 0.0
    union = unary_union(fans)
    return union, float(union.area)


def sweep_workspace(config, source_position, moment_magnitude, angles_deg,
                    lengths=(4, 9, 16), plane=None):
    """Trace the tip while a dipole source rotates through the given angles.

    The source moment points along cos(a) e1 + sin(a) e2 for each angle a
    (degrees); the default rotation plane is x-y.  For each chain length
    the solve continues from the previous angle's shape so the trace
    stays on one equilibrium branch.  Returns the tip traces plus the
    area of the union of tip fans (projected onto their best-fit plane).
    """
    e1, e2 = plane if plane is not None else (np.array([1.0, 0, 0]),
                                              np.array([0.0, 1.0, 0]))
    source_position = np.asarray(source_position, dtype=float).reshape(3)
    angles_deg = np.asarray(angles_deg, dtype=float)
    tips = {}
    skipped = []
    for n in lengths:
        cfg = config.with_n(n)
        rows = np.full((len(angles_deg), 3), np.nan)
        warm = None
        for k, a in enumerate(np.deg2rad(angles_deg)):
            moment = moment_magnitude * (np.cos(a) * e1 + np.sin(a) * e2)
            env = EnvField.from_sources([Dipole(source_position, moment)])
            res = solve_equilibrium(cfg, env, SolverConfig(warm_start=warm))
            if not res.converged:
                skipped.append((n, float(angles_deg[k])))
                continue
            warm = res.shape
            rows[k] = res.shape.tip_position
        tips[n] = rows
    polygon, area = _trace_polygon(config.base_position,
                                   [tips[n] for n in lengths])
    return SweepResult(lengths=tuple(lengths), angles_deg=angles_deg,
                       tips=tips, skipped=skipped, area=area, polygon=polygon)


def run_alignment_study(lengths=None, field_magnitude=0.023, angles_deg=None,
                        ball=None, sleeve=None, gravity=None):
    """Tip alignment against a rotating uniform field, per chain length.

    For each length the field sweeps through the given in-plane angles
    with continuation from the previous solution.  Returns rows of
    (length, angle_deg, alignment_deg).
    """
    lengths = list(lengths) if lengths is not None else list(range(1, 17))
    angles_deg = (np.asarray(angles_deg, dtype=float) if angles_deg is not None
                  else np.arange(0.0, 180.1, 22.5))
    ball = ball if ball is not None else BallSpec.from_material(3.175e-3)
    gravity = np.zeros(3) if gravity is None else np.asarray(gravity, float)
    rows = []
    for n in lengths:
        cfg = ChainConfig(n, ball, sleeve=sleeve, gravity=gravity)
        warm = None
        for a in angles_deg:
            ang = np.deg2rad(a)
            b = field_magnitude * np.array([np.cos(ang), np.sin(ang), 0.0])
            res = solve_equilibrium(cfg, EnvField.uniform(b),
                                    SolverConfig(warm_start=warm))
            if not res.converged:
                raise RuntimeError(
                    f"alignment study solve failed at n={n}, angle={a}")
            warm = res.shape
            mis = alignment_angle(b, res.shape.dipole_dirs[-1])
            rows.append((n, float(a), float(np.rad2deg(mis))))
    return rows


def alignment_csv(rows):
    """CSV text for alignment study rows, header included."""
    lines = ["length,angle_deg,alignment_deg"]
    for n, a, deg in rows:
        lines.append(f"{n},{a:g},{deg:.9g}")
    return "\n".join(lines) + "\n"
