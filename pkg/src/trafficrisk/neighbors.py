"""Per-frame neighbor identification around an ego vehicle.

Four neighbor classes are distinguished: the nearest in-lane vehicle ahead
(LV) and behind (FV), plus vehicles in the adjacent lanes whose lateral
motion would carry them into the ego lane, split by whether the projected
entry point lies ahead of (PL) or behind (PF) the ego.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import kernels
from .errors import NotAdjacent
from .trajectory import FrameState, LaneLayout, Scene

DEFAULT_VY_MIN = 0.05  # m/s, lateral-velocity floor filtering sensor noise
DEFAULT_HORIZON = 10.0  # s, ignore projected lane entries further out
DEFAULT_EPS_GAP = 0.1  # m, lower clamp for bumper-to-bumper gaps


class RelativePosition(Enum):
    LV = "LV"
    FV = "FV"
    PL = "PL"
    PF = "PF"


class Side(Enum):
    LEFT = "Left"
    RIGHT = "Right"


@dataclass(frozen=True, slots=True)
class Encroachment:
    """Projected entry of an adjacent-lane vehicle into the ego lane.

    `t_cross` is the time until the vehicle's lateral center reaches the ego
    lane boundary under constant velocity (at which instant half its width is
    inside); `x_enc` is the longitudinal position of that entry point.
    """

    t_cross: float
    x_enc: float
    side: Side


@dataclass(frozen=True, slots=True)
class NeighborSet:
    """All classified neighbors of one ego at one frame."""

    ego_id: int
    frame_index: int
    lv: tuple[int, float] | None = None  # (vehicle_id, gap m)
    fv: tuple[int, float] | None = None
    pl: tuple[tuple[int, Encroachment], ...] = field(default_factory=tuple)
    pf: tuple[tuple[int, Encroachment], ...] = field(default_factory=tuple)


def encroachment_point(
    ego: FrameState,
    other: FrameState,
    layout: LaneLayout,
    vy_min: float = DEFAULT_VY_MIN,
    horizon: float = DEFAULT_HORIZON,
) -> Encroachment | None:
    """Project `other` into the ego lane under constant velocity.

    Returns None when the lateral velocity points away from the ego lane, is
    below `vy_min`, or the crossing lies beyond `horizon`. States must be in
    the canonical frame.
    """
    left_id, right_id = layout.adjacent(ego.lane_id)
    if other.lane_id == left_id:
        side = Side.LEFT
        boundary = layout.canonical_bounds(ego.lane_id)[1]
        toward = other.vy <= -vy_min
    elif other.lane_id == right_id:
        side = Side.RIGHT
        boundary = layout.canonical_bounds(ego.lane_id)[0]
        toward = other.vy >= vy_min
    else:
        raise NotAdjacent(
            f"lane {other.lane_id} is not adjacent to ego lane {ego.lane_id}"
        )
    if not toward:
        return None
    t_cross = (boundary - other.y) / other.vy
    if t_cross <= 0.0 or t_cross > horizon:
        return None
    return Encroachment(t_cross=t_cross, x_enc=other.x + other.vx * t_cross, side=side)


def classify_parallel(enc: Encroachment, ego: FrameState) -> RelativePosition:
    """PL when the entry point lies ahead of the ego's position at crossing time.

    An exact tie goes to PF: a merge precisely at the ego's nose is already
    the conservative PET=0 case.
    """
    ego_at_cross = ego.x + ego.vx * enc.t_cross
    if enc.x_enc > ego_at_cross:
        return RelativePosition.PL
    return RelativePosition.PF


def classify_neighbors(
    scene: Scene,
    ego_id: int,
    frame_index: int,
    vy_min: float = DEFAULT_VY_MIN,
    horizon: float = DEFAULT_HORIZON,
    eps_gap: float = DEFAULT_EPS_GAP,
) -> NeighborSet:
    """Identify LV/FV/PL/PF neighbors of `ego_id` at one frame."""
    res = kernels.sweep_ego(
        scene,
        ego_id,
        vy_min=vy_min,
        horizon=horizon,
        eps_gap=eps_gap,
        frame_index=frame_index,
    )
    pos = res.pos[0]
    lv = fv = None
    pl: list[tuple[int, Encroachment]] = []
    pf: list[tuple[int, Encroachment]] = []
    ego_lane = int(scene.tracks[ego_id].lane_id[frame_index - scene.tracks[ego_id].start_frame])
    left_id, _ = scene.layout.adjacent(ego_lane)
    for j, code in enumerate(pos):
        if code == kernels.POS_NONE:
            continue
        vid = int(res.candidate_ids[j])
        if code == kernels.POS_LV:
            lv = (vid, float(res.gap[0, j]))
        elif code == kernels.POS_FV:
            fv = (vid, float(res.gap[0, j]))
        else:
            other = scene.tracks[vid]
            other_lane = int(other.lane_id[frame_index - other.start_frame])
            side = Side.LEFT if other_lane == left_id else Side.RIGHT
            enc = Encroachment(
                t_cross=float(res.tcross[0, j]),
                x_enc=float(res.xenc[0, j]),
                side=side,
            )
            if code == kernels.POS_PL:
                pl.append((vid, enc))
            else:
                pf.append((vid, enc))
    return NeighborSet(
        ego_id=int(ego_id),
        frame_index=int(frame_index),
        lv=lv,
        fv=fv,
        pl=tuple(pl),
        pf=tuple(pf),
    )
