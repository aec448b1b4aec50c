"""Scalar safety metrics for one ego-neighbor pair at one frame.

Three measures are computed per pair: a time margin (headway for in-lane
pairs, projected-entry PET for parallel ones), the inverse time-to-collision,
and the deceleration required to avoid collision. Values grow more dangerous
as PET shrinks and as ITTC/DRAC grow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NonPositiveGap
from .neighbors import Encroachment, NeighborSet, RelativePosition
from .trajectory import FrameState, Scene


@dataclass(frozen=True, slots=True)
class SsmSample:
    """Metric triple for one ego-neighbor pair at one frame.

    `pet` carries headway semantics for LV/FV neighbors and projected-entry
    PET semantics for PL/PF ones; +inf means no approach. `gap_clamped`
    flags pairs whose bumper gap hit the numerical lower clamp.
    """

    pet: float
    ittc: float
    drac: float
    relative_position: RelativePosition
    neighbor_id: int
    frame_index: int
    gap: float = float("nan")
    gap_clamped: bool = False


def time_headway(d: float, v_follower: float) -> float:
    """Time for the follower to cover the gap; +inf when not advancing."""
    if d <= 0:
        raise NonPositiveGap(f"gap must be positive, got {d}")
    if v_follower <= 0:
        return float("inf")
    return d / v_follower


def ittc(v_follower: float, v_leader: float, d: float) -> float:
    """Inverse time-to-collision: closing speed over gap, 0 when not closing."""
    if d <= 0:
        raise NonPositiveGap(f"gap must be positive, got {d}")
    dv = v_follower - v_leader
    if dv <= 0:
        return 0.0
    return dv / d


def drac(v_follower: float, v_leader: float, d: float) -> float:
    """Deceleration required to avoid collision, 0 when not closing."""
    if d <= 0:
        raise NonPositiveGap(f"gap must be positive, got {d}")
    dv = v_follower - v_leader
    if dv <= 0:
        return 0.0
    return dv * dv / d


def pet_parallel(
    enc: Encroachment, ego: FrameState, relative_position: RelativePosition
) -> float:
    """Time between the two vehicles' arrivals at the projected entry point.

    For PL the merging vehicle occupies the point first (at t_cross) and the
    ego arrives second; for PF the roles swap. Negative separations from the
    extrapolation (simultaneous occupancy) clamp to 0; +inf when the second
    vehicle never reaches the point.
    """
    if relative_position is RelativePosition.PL:
        if ego.vx <= 0:
            return float("inf")
        t2 = (enc.x_enc - ego.x) / ego.vx
        pet = t2 - enc.t_cross
    elif relative_position is RelativePosition.PF:
        # ego not advancing: its pass time is unobservable, measure from now
        t1 = (enc.x_enc - ego.x) / ego.vx if ego.vx > 0 else 0.0
        pet = enc.t_cross - t1
    else:
        raise ValueError("relative_position must be PL or PF")
    return max(pet, 0.0)


def ssm_for_pair(
    scene: Scene,
    ego_id: int,
    neighbors: NeighborSet,
    neighbor_id: int,
) -> SsmSample:
    """Metric triple for one classified neighbor from a NeighborSet.

    LV: the ego follows. FV: the neighbor follows. PL/PF: the time margin is
    the projected-entry PET while ITTC/DRAC are taken along the longitudinal
    axis with the rear vehicle as follower.
    """
    frame_index = neighbors.frame_index
    res = kernels.sweep_ego(scene, ego_id, frame_index=frame_index)
    try:
        j = int(np.flatnonzero(res.candidate_ids == neighbor_id)[0])
    except IndexError:
        raise KeyError(
            f"vehicle {neighbor_id} is not a candidate at frame {frame_index}"
        ) from None
    code = int(res.pos[0, j])
    if code == kernels.POS_NONE:
        raise KeyError(
            f"vehicle {neighbor_id} is not a classified neighbor at frame {frame_index}"
        )
    return SsmSample(
        pet=float(res.pet[0, j]),
        ittc=float(res.ittc[0, j]),
        drac=float(res.drac[0, j]),
        relative_position=_code_to_position(code),
        neighbor_id=int(neighbor_id),
        frame_index=int(frame_index),
        gap=float(res.gap[0, j]),
        gap_clamped=bool(res.clamped[0, j]),
    )


def _code_to_position(code: int) -> RelativePosition:
    return {
        kernels.POS_LV: RelativePosition.LV,
        kernels.POS_FV: RelativePosition.FV,
        kernels.POS_PL: RelativePosition.PL,
        kernels.POS_PF: RelativePosition.PF,
    }[code]
