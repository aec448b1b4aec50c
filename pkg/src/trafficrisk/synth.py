"""Parameterized synthetic scenes with closed-form expected metrics.

Vehicles follow piecewise-constant acceleration profiles (optionally with
instantaneous velocity resets at segment starts), integrated exactly per
frame interval, so every expected metric value is plain arithmetic on the
construction parameters. A scripted reaction rule can make the ego brake a
fixed delay after its own risk crosses a threshold, planting an exactly
recoverable lag between risk changes and jerk.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import ModelConfig, parse_model_id
from .errors import InvalidSpec
from .trajectory import (
    Lane,
    LaneDirection,
    LaneLayout,
    Scene,
    VehicleClass,
    VehicleTrack,
)

LANE_WIDTH = 3.6
DEFAULT_LAYOUT = LaneLayout(
    [
        Lane(1, 0.0, LANE_WIDTH, LaneDirection.POSITIVE_X),
        Lane(2, LANE_WIDTH, 2 * LANE_WIDTH, LaneDirection.POSITIVE_X),
        Lane(3, 2 * LANE_WIDTH, 3 * LANE_WIDTH, LaneDirection.POSITIVE_X),
    ]
)

SCENARIO_KINDS = ("CarFollowing", "CutIn", "Overtake", "Tailgate", "Empty")


@dataclass(frozen=True, slots=True)
class Segment:
    """Constant-acceleration stretch; optional velocity reset at its start."""

    duration: float
    ax: float = 0.0
    ay: float = 0.0
    set_vx: float | None = None
    set_vy: float | None = None


@dataclass(frozen=True, slots=True)
class VehicleSpec:
    vehicle_id: int
    x0: float
    y0: float
    vx0: float
    vy0: float = 0.0
    vehicle_class: VehicleClass = VehicleClass.CAR
    width: float = 2.0
    length: float = 4.5
    segments: tuple[Segment, ...] = ()


@dataclass(frozen=True, slots=True)
class ReactionRule:
    """Brake while the (delayed) own risk exceeds a threshold.

    `noise_ax` adds white acceleration noise to the reacting driver, which
    spreads the per-ego correlation strengths without moving the planted lag.
    """

    ego_id: int
    threshold: float = 0.05
    delay: float = 0.25  # s, quantized to whole frames
    brake: float = 1.5  # m/s^2
    model_id: str = "2a"
    noise_ax: float = 0.0  # m/s^2


@dataclass(frozen=True, slots=True)
class ScenarioSpec:
    kind: str
    duration: float
    frame_rate: float
    vehicles: tuple[VehicleSpec, ...]
    reaction: ReactionRule | None = None
    noise_std: float = 0.0
    layout: LaneLayout = DEFAULT_LAYOUT
    name: str = "synthetic"

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise InvalidSpec(f"unknown scenario kind {self.kind!r}")
        if self.duration <= 0 or self.frame_rate <= 0:
            raise InvalidSpec("duration and frame_rate must be positive")
        for v in self.vehicles:
            covered = sum(s.duration for s in v.segments)
            if covered + 1e-9 < self.duration:
                raise InvalidSpec(
                    f"vehicle {v.vehicle_id}: profile covers {covered} s "
                    f"< duration {self.duration} s"
                )


def _integrate(spec: ScenarioSpec, v: VehicleSpec, n: int, dt: float):
    """Exact per-frame integration of a piecewise-constant profile."""
    ax = np.zeros(n)
    ay = np.zeros(n)
    sets: dict[int, tuple[float | None, float | None]] = {}
    t = 0.0
    for seg in v.segments:
        k = int(round(t / dt))
        if k < n:
            k_end = min(n, int(round((t + seg.duration) / dt)))
            ax[k:k_end] = seg.ax
            ay[k:k_end] = seg.ay
            if seg.set_vx is not None or seg.set_vy is not None:
                sets[k] = (seg.set_vx, seg.set_vy)
        t += seg.duration
    x = np.empty(n)
    y = np.empty(n)
    vx = np.empty(n)
    vy = np.empty(n)
    x[0], y[0], vx[0], vy[0] = v.x0, v.y0, v.vx0, v.vy0
    for i in range(n):
        if i in sets:
            sx, sy = sets[i]
            if sx is not None:
                vx[i] = sx
            if sy is not None:
                vy[i] = sy
        if i + 1 < n:
            x[i + 1] = x[i] + vx[i] * dt + 0.5 * ax[i] * dt * dt
            y[i + 1] = y[i] + vy[i] * dt + 0.5 * ay[i] * dt * dt
            vx[i + 1] = vx[i] + ax[i] * dt
            vy[i + 1] = vy[i] + ay[i] * dt
    return x, y, vx, vy, ax, ay


def _build_track(
    spec: ScenarioSpec, v: VehicleSpec, n: int, dt: float, rng: np.random.Generator
) -> VehicleTrack:
    x, y, vx, vy, ax, ay = _integrate(spec, v, n, dt)
    if spec.noise_std > 0.0:
        x = x + rng.normal(0.0, spec.noise_std, size=n)
        y = y + rng.normal(0.0, spec.noise_std, size=n)
    lane_ids = np.array(
        [spec.layout.lane_id_at(float(yy), LaneDirection.POSITIVE_X) for yy in y],
        dtype=np.int64,
    )
    return VehicleTrack(
        v.vehicle_id,
        v.vehicle_class,
        v.width,
        v.length,
        spec.frame_rate,
        0,
        x,
        y,
        vx,
        vy,
        ax,
        ay,
        lane_ids,
        canonical=True,
    )


def generate(spec: ScenarioSpec, seed: int = 0) -> Scene:
    """Build the scene; with a reaction rule the ego's profile is re-integrated
    with braking injected a fixed delay after its risk crosses the threshold."""
    ids = [v.vehicle_id for v in spec.vehicles]
    if len(set(ids)) != len(ids):
        raise InvalidSpec("duplicate vehicle ids")
    dt = 1.0 / spec.frame_rate
    n = int(round(spec.duration * spec.frame_rate))
    if n < 2:
        raise InvalidSpec("duration too short for the frame rate")
    rng = np.random.default_rng(seed)
    tracks = {v.vehicle_id: _build_track(spec, v, n, dt, rng) for v in spec.vehicles}
    scene = Scene(spec.name, spec.layout, tracks, spec.frame_rate)
    if spec.reaction is None:
        return scene

    rule = spec.reaction
    if rule.ego_id not in tracks:
        raise InvalidSpec(f"reaction ego {rule.ego_id} not in scenario")
    from .risk import risk_timeseries  # deferred: synth is otherwise dependency-free

    pos_w, ssm_w = parse_model_id(rule.model_id)
    base = risk_timeseries(scene, rule.ego_id, ssm_w, pos_w, cfg=ModelConfig())
    mask = base.overall >= rule.threshold
    shift = int(round(rule.delay * spec.frame_rate))
    shifted = np.zeros(n, dtype=bool)
    if shift < n:
        shifted[shift:] = mask[: n - shift]

    ego_spec = next(v for v in spec.vehicles if v.vehicle_id == rule.ego_id)
    x, y, vx, vy, ax, ay = _integrate(spec, ego_spec, n, dt)
    ax = np.where(shifted, -rule.brake, ax)
    if rule.noise_ax > 0.0:
        ax = ax + rng.normal(0.0, rule.noise_ax, size=n)
    for i in range(n - 1):
        x[i + 1] = x[i] + vx[i] * dt + 0.5 * ax[i] * dt * dt
        vx[i + 1] = vx[i] + ax[i] * dt
    lane_ids = tracks[rule.ego_id].lane_id
    tracks = dict(tracks)
    tracks[rule.ego_id] = VehicleTrack(
        ego_spec.vehicle_id,
        ego_spec.vehicle_class,
        ego_spec.width,
        ego_spec.length,
        spec.frame_rate,
        0,
        x,
        y,
        vx,
        vy,
        ax,
        ay,
        lane_ids,
        canonical=True,
    )
    return Scene(spec.name, spec.layout, tracks, spec.frame_rate)


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    """Declarative form of a scenario, JSON-ready."""
    data = {
        "kind": spec.kind,
        "name": spec.name,
        "duration": spec.duration,
        "frame_rate": spec.frame_rate,
        "noise_std": spec.noise_std,
        "lanes": [
            {
                "lane_id": l.lane_id,
                "lower": l.lower,
                "upper": l.upper,
                "direction": l.direction.value,
            }
            for l in spec.layout.lanes
        ],
        "vehicles": [
            {
                "vehicle_id": v.vehicle_id,
                "x0": v.x0,
                "y0": v.y0,
                "vx0": v.vx0,
                "vy0": v.vy0,
                "vehicle_class": v.vehicle_class.value,
                "width": v.width,
                "length": v.length,
                "segments": [
                    {
                        "duration": s.duration,
                        "ax": s.ax,
                        "ay": s.ay,
                        **({"set_vx": s.set_vx} if s.set_vx is not None else {}),
                        **({"set_vy": s.set_vy} if s.set_vy is not None else {}),
                    }
                    for s in v.segments
                ],
            }
            for v in spec.vehicles
        ],
    }
    if spec.reaction is not None:
        r = spec.reaction
        data["reaction"] = {
            "ego_id": r.ego_id,
            "threshold": r.threshold,
            "delay": r.delay,
            "brake": r.brake,
            "model_id": r.model_id,
            "noise_ax": r.noise_ax,
        }
    return data


def scenario_from_dict(data: dict) -> ScenarioSpec:
    try:
        layout = (
            LaneLayout(
                [
                    Lane(
                        int(l["lane_id"]),
                        float(l["lower"]),
                        float(l["upper"]),
                        LaneDirection(l["direction"]),
                    )
                    for l in data["lanes"]
                ]
            )
            if "lanes" in data
            else DEFAULT_LAYOUT
        )
        vehicles = tuple(
            VehicleSpec(
                vehicle_id=int(v["vehicle_id"]),
                x0=float(v["x0"]),
                y0=float(v["y0"]),
                vx0=float(v["vx0"]),
                vy0=float(v.get("vy0", 0.0)),
                vehicle_class=VehicleClass(v.get("vehicle_class", "Car")),
                width=float(v.get("width", 2.0)),
                length=float(v.get("length", 4.5)),
                segments=tuple(
                    Segment(
                        duration=float(s["duration"]),
                        ax=float(s.get("ax", 0.0)),
                        ay=float(s.get("ay", 0.0)),
                        set_vx=None if s.get("set_vx") is None else float(s["set_vx"]),
                        set_vy=None if s.get("set_vy") is None else float(s["set_vy"]),
                    )
                    for s in v.get("segments", ())
                ),
            )
            for v in data["vehicles"]
        )
        reaction = None
        if data.get("reaction") is not None:
            r = data["reaction"]
            reaction = ReactionRule(
                ego_id=int(r["ego_id"]),
                threshold=float(r.get("threshold", 0.05)),
                delay=float(r.get("delay", 0.25)),
                brake=float(r.get("brake", 1.5)),
                model_id=str(r.get("model_id", "2a")),
                noise_ax=float(r.get("noise_ax", 0.0)),
            )
        return ScenarioSpec(
            kind=str(data["kind"]),
            duration=float(data["duration"]),
            frame_rate=float(data["frame_rate"]),
            vehicles=vehicles,
            reaction=reaction,
            noise_std=float(data.get("noise_std", 0.0)),
            layout=layout,
            name=str(data.get("name", "synthetic")),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidSpec(f"bad scenario file: {e}") from None


# ---------------------------------------------------------------------------
# scenario builders

EGO_ID = 1
OTHER_ID = 2
LEAD_ID = 3


def _steady(duration: float) -> tuple[Segment, ...]:
    return (Segment(duration=duration),)


def car_following(
    gap: float,
    v_follower: float,
    v_leader: float,
    duration: float = 20.0,
    frame_rate: float = 25.0,
    name: str = "car_following",
) -> ScenarioSpec:
    """Ego follows a leader in one lane; `gap` is bumper-to-bumper at t=0."""
    ego = VehicleSpec(EGO_ID, x0=0.0, y0=1.5 * LANE_WIDTH, vx0=v_follower,
                      segments=_steady(duration))
    lead = VehicleSpec(
        OTHER_ID,
        x0=gap + 0.5 * (ego.length + 4.5),
        y0=1.5 * LANE_WIDTH,
        vx0=v_leader,
        segments=_steady(duration),
    )
    return ScenarioSpec("CarFollowing", duration, frame_rate, (ego, lead), name=name)


def tailgate(
    headway: float,
    speed: float = 30.0,
    duration: float = 20.0,
    frame_rate: float = 25.0,
    name: str = "tailgate",
) -> ScenarioSpec:
    """Ego tailgates at a fixed time headway (gap = headway * speed)."""
    spec = car_following(headway * speed, speed, speed, duration, frame_rate, name)
    return replace(spec, kind="Tailgate")


def cut_in(
    ahead: float = 15.0,
    speed: float = 30.0,
    drift_start: float = 8.0,
    drift_duration: float = 1.2,
    drift_vy: float = 0.8,
    lateral_clearance: float = 2.0,
    duration: float = 20.0,
    frame_rate: float = 20.0,
    reaction_delay: float | None = 0.25,
    brake: float = 1.5,
    driver_noise: float = 0.0,
    cutter_class: VehicleClass = VehicleClass.TRUCK,
    lead_gap: float | None = None,
    lead_dv: float = 1.0,
    name: str = "cut_in",
) -> ScenarioSpec:
    """A left-lane vehicle drifts toward the ego lane ahead of the ego.

    The drifting vehicle starts `lateral_clearance` above the shared lane
    boundary and never actually crosses it, so the interaction lives entirely
    in the projected-entry metrics. Defaults keep it a truck: the scripted
    ego stays the scene's only car, which keeps corpus-level evaluation
    focused on scripted drivers. With equal speeds the projected-entry PET is
    `ahead / speed` for every drift frame.

    `lead_gap` adds a slightly faster lane-keeping truck ahead of the ego,
    giving the scene safe in-lane frames (autoencoder training material)
    without disturbing the drift-driven risk pulse.
    """
    if drift_vy * drift_duration >= lateral_clearance:
        raise InvalidSpec("drift would cross the lane boundary; shorten it")
    ego = VehicleSpec(
        EGO_ID, x0=100.0, y0=1.5 * LANE_WIDTH, vx0=speed, segments=_steady(duration)
    )
    cutter = VehicleSpec(
        OTHER_ID,
        x0=100.0 + ahead,
        y0=2.0 * LANE_WIDTH + lateral_clearance,
        vx0=speed,
        vehicle_class=cutter_class,
        width=2.5,
        length=8.0 if cutter_class is VehicleClass.TRUCK else 4.5,
        segments=(
            Segment(duration=drift_start),
            Segment(duration=drift_duration, set_vy=-drift_vy),
            Segment(duration=duration - drift_start - drift_duration, set_vy=0.0),
        ),
    )
    vehicles = [ego, cutter]
    if lead_gap is not None:
        vehicles.append(
            VehicleSpec(
                LEAD_ID,
                x0=ego.x0 + lead_gap + 0.5 * (ego.length + 8.0),
                y0=1.5 * LANE_WIDTH,
                vx0=speed + lead_dv,
                vehicle_class=VehicleClass.TRUCK,
                width=2.5,
                length=8.0,
                segments=_steady(duration),
            )
        )
    reaction = (
        ReactionRule(
            ego_id=EGO_ID, delay=reaction_delay, brake=brake, noise_ax=driver_noise
        )
        if reaction_delay is not None
        else None
    )
    return ScenarioSpec(
        "CutIn", duration, frame_rate, tuple(vehicles), reaction=reaction, name=name
    )


def merge_behind(
    behind: float = 45.0,
    speed: float = 30.0,
    drift_start: float = 8.0,
    drift_duration: float = 1.2,
    drift_vy: float = 0.8,
    lateral_clearance: float = 2.0,
    duration: float = 20.0,
    frame_rate: float = 25.0,
    name: str = "merge_behind",
) -> ScenarioSpec:
    """A left-lane vehicle behind the ego drifts toward the ego lane.

    With equal speeds the projected-entry PET is `behind / speed` at every
    drift frame.
    """
    spec = cut_in(
        ahead=-behind,
        speed=speed,
        drift_start=drift_start,
        drift_duration=drift_duration,
        drift_vy=drift_vy,
        lateral_clearance=lateral_clearance,
        duration=duration,
        frame_rate=frame_rate,
        reaction_delay=None,
        name=name,
    )
    return replace(spec, kind="Overtake")


def empty_scene(
    speed: float = 30.0,
    duration: float = 20.0,
    frame_rate: float = 25.0,
    name: str = "empty",
) -> ScenarioSpec:
    ego = VehicleSpec(
        EGO_ID, x0=0.0, y0=1.5 * LANE_WIDTH, vx0=speed, segments=_steady(duration)
    )
    return ScenarioSpec("Empty", duration, frame_rate, (ego,), name=name)


# ---------------------------------------------------------------------------
# golden oracle corpus


@dataclass(frozen=True, slots=True)
class GoldenCase:
    """A scene plus closed-form expected metrics for one ego-neighbor pair."""

    name: str
    scene: Scene
    ego_id: int
    neighbor_id: int
    pos: np.ndarray  # (n,) expected position codes (kernels.POS_*)
    pet: np.ndarray  # (n,) expected metric series, NaN where unclassified
    ittc: np.ndarray
    drac: np.ndarray


def _lv_case(
    name: str, gap0: float, v_f: float, v_l: float, duration: float, frame_rate: float
) -> GoldenCase:
    from . import kernels

    spec = car_following(gap0, v_f, v_l, duration, frame_rate, name)
    scene = generate(spec)
    n = scene.tracks[EGO_ID].n_frames
    t = np.arange(n) / frame_rate
    d = gap0 - (v_f - v_l) * t
    pos = np.full(n, kernels.POS_LV, dtype=np.int8)
    pet = d / v_f if v_f > 0 else np.full(n, np.inf)
    dv = v_f - v_l
    if dv > 0:
        ittc = dv / d
        drac = dv * dv / d
    else:
        ittc = np.zeros(n)
        drac = np.zeros(n)
    return GoldenCase(name, scene, EGO_ID, OTHER_ID, pos, pet, ittc, drac)


def _drift_case(
    name: str, offset: float, speed: float, frame_rate: float = 25.0
) -> GoldenCase:
    """Adjacent-lane drift toward the ego lane; PET = |offset| / speed."""
    from . import kernels

    drift_start, drift_duration = 8.0, 1.2
    builder = cut_in if offset > 0 else merge_behind
    spec = builder(
        abs(offset),
        speed=speed,
        drift_start=drift_start,
        drift_duration=drift_duration,
        frame_rate=frame_rate,
        name=name,
        **({"reaction_delay": None} if offset > 0 else {}),
    )
    scene = generate(spec)
    n = scene.tracks[EGO_ID].n_frames
    k0 = int(round(drift_start * frame_rate))
    k1 = int(round((drift_start + drift_duration) * frame_rate))
    pos = np.zeros(n, dtype=np.int8)
    pos[k0:k1] = kernels.POS_PL if offset > 0 else kernels.POS_PF
    pet = np.full(n, np.nan)
    pet[k0:k1] = abs(offset) / speed
    ittc = np.full(n, np.nan)
    drac = np.full(n, np.nan)
    ittc[k0:k1] = 0.0  # equal speeds: never closing
    drac[k0:k1] = 0.0
    return GoldenCase(name, scene, EGO_ID, OTHER_ID, pos, pet, ittc, drac)


def golden_corpus(seed: int = 0) -> list[GoldenCase]:
    """Fixed battery of scenes with analytically known metric series."""
    rng = np.random.default_rng(seed)
    v = float(rng.uniform(25.0, 32.0))
    cases = [
        _lv_case("steady_follow", 50.0, 25.0, 25.0, 20.0, 25.0),
        _lv_case("tailgate_03", 0.3 * 30.0, 30.0, 30.0, 20.0, 25.0),
        _lv_case("closing_gap", 80.0, v + 10.0, v, 6.0, 25.0),
        _lv_case("opening_gap", 30.0, v, v + 5.0, 10.0, 25.0),
        _drift_case("pl_drift_0.43", 0.43 * 30.0, 30.0),
        _drift_case("pf_merge_1.5", -1.5 * 30.0, 30.0),
    ]
    return cases


# ---------------------------------------------------------------------------
# evaluation corpora


def responsive_corpus(
    n_scenes: int, seed: int = 0, frame_rate: float = 20.0
) -> list[Scene]:
    """Scenes whose single (car) ego brakes a known delay after a drift event."""
    rng = np.random.default_rng(seed)
    scenes = []
    for i in range(n_scenes):
        delay_frames = int(rng.integers(3, 13))
        spec = cut_in(
            ahead=float(rng.uniform(12.0, 18.0)),
            speed=float(rng.uniform(27.0, 33.0)),
            drift_start=float(rng.uniform(6.0, 9.0)),
            drift_duration=float(rng.uniform(0.9, 1.6)),
            frame_rate=frame_rate,
            reaction_delay=delay_frames / frame_rate,
            brake=float(rng.uniform(1.0, 2.5)),
            driver_noise=0.05,
            lead_gap=float(rng.uniform(55.0, 75.0)),
            lead_dv=float(rng.uniform(0.5, 1.5)),
            name=f"responsive_{i:03d}",
        )
        scenes.append(generate(spec, seed=seed + i))
    return scenes


def constant_corpus(n_scenes: int, seed: int = 0) -> list[Scene]:
    """Constant-velocity followers: flat risk, flat jerk, nothing to correlate."""
    rng = np.random.default_rng(seed)
    scenes = []
    for i in range(n_scenes):
        v = float(rng.uniform(24.0, 33.0))
        spec = car_following(
            float(rng.uniform(40.0, 70.0)), v, v, name=f"constant_{i:03d}"
        )
        scenes.append(generate(spec, seed=seed + i))
    return scenes
