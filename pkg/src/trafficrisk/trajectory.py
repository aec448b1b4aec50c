"""Kinematic data model: frame states, tracks, lane layouts, scenes.

All downstream geometry operates in a canonical frame where longitudinal x
increases in the direction of travel and lateral y increases toward the
driver's left. Tracks recorded on carriageways that run in the negative-x
world direction are rotated 180 degrees into that frame by `canonicalize`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SeriesTooShort, UnknownLane

# Shared lane boundaries must coincide to this tolerance to count as adjacent.
_BOUNDARY_TOL = 1e-6


class VehicleClass(Enum):
    CAR = "Car"
    TRUCK = "Truck"


class LaneDirection(Enum):
    POSITIVE_X = "PositiveX"
    NEGATIVE_X = "NegativeX"


@dataclass(frozen=True, slots=True)
class FrameState:
    """Kinematic state of one vehicle at one frame."""

    frame_index: int
    x: float
    y: float
    vx: float
    vy: float
    ax: float
    ay: float
    lane_id: int


@dataclass(frozen=True, slots=True)
class Lane:
    """One lane: lateral interval [lower, upper] in world coordinates."""

    lane_id: int
    lower: float
    upper: float
    direction: LaneDirection


class LaneLayout:
    """Ordered set of lanes with adjacency derived from shared boundaries.

    Lanes of opposite travel directions are never adjacent. Canonical bounds
    are the world bounds for PositiveX lanes and the negated, swapped bounds
    for NegativeX lanes, matching the coordinates of canonicalized tracks.
    """

    def __init__(self, lanes: Sequence[Lane]):
        if not lanes:
            raise ValueError("layout needs at least one lane")
        by_id: dict[int, Lane] = {}
        for lane in lanes:
            if lane.upper <= lane.lower:
                raise ValueError(f"lane {lane.lane_id}: upper bound must exceed lower")
            if lane.lane_id in by_id:
                raise ValueError(f"duplicate lane_id {lane.lane_id}")
            by_id[lane.lane_id] = lane
        for direction in LaneDirection:
            group = sorted(
                (l for l in lanes if l.direction is direction), key=lambda l: l.lower
            )
            for a, b in zip(group, group[1:]):
                if b.lower < a.upper - _BOUNDARY_TOL:
                    raise ValueError(
                        f"lanes {a.lane_id} and {b.lane_id} overlap laterally"
                    )
        self.lanes: tuple[Lane, ...] = tuple(
            sorted(lanes, key=lambda l: (l.direction.value, l.lower))
        )
        self._by_id = by_id
        self._canonical = {
            l.lane_id: (
                (l.lower, l.upper)
                if l.direction is LaneDirection.POSITIVE_X
                else (-l.upper, -l.lower)
            )
            for l in self.lanes
        }
        # left/right neighbors in the canonical frame (left = higher canonical y)
        self._left: dict[int, int | None] = {}
        self._right: dict[int, int | None] = {}
        for lane in self.lanes:
            lo, hi = self._canonical[lane.lane_id]
            left = right = None
            for other in self.lanes:
                if other.lane_id == lane.lane_id or other.direction is not lane.direction:
                    continue
                olo, ohi = self._canonical[other.lane_id]
                if abs(olo - hi) <= _BOUNDARY_TOL:
                    left = other.lane_id
                elif abs(ohi - lo) <= _BOUNDARY_TOL:
                    right = other.lane_id
            self._left[lane.lane_id] = left
            self._right[lane.lane_id] = right

    def lane(self, lane_id: int) -> Lane:
        try:
            return self._by_id[lane_id]
        except KeyError:
            raise UnknownLane(f"lane_id {lane_id} not in layout") from None

    def __contains__(self, lane_id: int) -> bool:
        return lane_id in self._by_id

    def canonical_bounds(self, lane_id: int) -> tuple[float, float]:
        self.lane(lane_id)
        return self._canonical[lane_id]

    def left_of(self, lane_id: int) -> int | None:
        self.lane(lane_id)
        return self._left[lane_id]

    def right_of(self, lane_id: int) -> int | None:
        self.lane(lane_id)
        return self._right[lane_id]

    def adjacent(self, lane_id: int) -> tuple[int | None, int | None]:
        return self.left_of(lane_id), self.right_of(lane_id)

    def lane_id_at(self, y: float, direction: LaneDirection) -> int | None:
        """World-frame containment lookup; nearest lane of the direction if outside."""
        best = None
        best_dist = np.inf
        for lane in self.lanes:
            if lane.direction is not direction:
                continue
            if lane.lower <= y <= lane.upper:
                return lane.lane_id
            dist = min(abs(y - lane.lower), abs(y - lane.upper))
            if dist < best_dist:
                best_dist = dist
                best = lane.lane_id
        return best

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LaneLayout):
            return NotImplemented
        return self.lanes == other.lanes

    def __repr__(self) -> str:
        return f"LaneLayout({list(self.lanes)!r})"


class VehicleTrack:
    """Per-vehicle time series at a fixed frame rate, stored columnar.

    Frames are contiguous: state i is at frame `start_frame + i`. The
    `canonical` flag records whether coordinates are already in the canonical
    frame; `canonicalize` is a no-op on such tracks.
    """

    __slots__ = (
        "vehicle_id",
        "vehicle_class",
        "width",
        "length",
        "frame_rate",
        "start_frame",
        "x",
        "y",
        "vx",
        "vy",
        "ax",
        "ay",
        "lane_id",
        "canonical",
        "_states",
    )

    def __init__(
        self,
        vehicle_id: int,
        vehicle_class: VehicleClass,
        width: float,
        length: float,
        frame_rate: float,
        start_frame: int,
        x: np.ndarray,
        y: np.ndarray,
        vx: np.ndarray,
        vy: np.ndarray,
        ax: np.ndarray,
        ay: np.ndarray,
        lane_id: np.ndarray,
        canonical: bool = False,
    ):
        if width <= 0 or length <= 0:
            raise ValueError(f"vehicle {vehicle_id}: width and length must be positive")
        if frame_rate <= 0:
            raise ValueError(f"vehicle {vehicle_id}: frame_rate must be positive")
        if start_frame < 0:
            raise ValueError(f"vehicle {vehicle_id}: start_frame must be non-negative")
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.vx = np.ascontiguousarray(vx, dtype=np.float64)
        self.vy = np.ascontiguousarray(vy, dtype=np.float64)
        self.ax = np.ascontiguousarray(ax, dtype=np.float64)
        self.ay = np.ascontiguousarray(ay, dtype=np.float64)
        self.lane_id = np.ascontiguousarray(lane_id, dtype=np.int64)
        n = self.x.shape[0]
        if n == 0:
            raise ValueError(f"vehicle {vehicle_id}: track must be non-empty")
        for name in ("y", "vx", "vy", "ax", "ay", "lane_id"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"vehicle {vehicle_id}: column {name} length mismatch")
        self.vehicle_id = int(vehicle_id)
        self.vehicle_class = vehicle_class
        self.width = float(width)
        self.length = float(length)
        self.frame_rate = float(frame_rate)
        self.start_frame = int(start_frame)
        self.canonical = bool(canonical)
        self._states: tuple[FrameState, ...] | None = None

    @classmethod
    def from_states(
        cls,
        vehicle_id: int,
        vehicle_class: VehicleClass,
        width: float,
        length: float,
        frame_rate: float,
        states: Iterable[FrameState],
        canonical: bool = False,
    ) -> "VehicleTrack":
        states = list(states)
        if not states:
            raise ValueError(f"vehicle {vehicle_id}: track must be non-empty")
        frames = [s.frame_index for s in states]
        for a, b in zip(frames, frames[1:]):
            if b != a + 1:
                raise ValueError(
                    f"vehicle {vehicle_id}: frames not contiguous at {a} -> {b}"
                )
        return cls(
            vehicle_id,
            vehicle_class,
            width,
            length,
            frame_rate,
            frames[0],
            np.array([s.x for s in states]),
            np.array([s.y for s in states]),
            np.array([s.vx for s in states]),
            np.array([s.vy for s in states]),
            np.array([s.ax for s in states]),
            np.array([s.ay for s in states]),
            np.array([s.lane_id for s in states]),
            canonical=canonical,
        )

    @property
    def n_frames(self) -> int:
        return self.x.shape[0]

    @property
    def end_frame(self) -> int:
        """Last frame index (inclusive)."""
        return self.start_frame + self.n_frames - 1

    @property
    def frames(self) -> np.ndarray:
        return self.start_frame + np.arange(self.n_frames, dtype=np.int64)

    @property
    def states(self) -> tuple[FrameState, ...]:
        if self._states is None:
            self._states = tuple(
                FrameState(
                    self.start_frame + i,
                    float(self.x[i]),
                    float(self.y[i]),
                    float(self.vx[i]),
                    float(self.vy[i]),
                    float(self.ax[i]),
                    float(self.ay[i]),
                    int(self.lane_id[i]),
                )
                for i in range(self.n_frames)
            )
        return self._states

    def state_at(self, frame_index: int) -> FrameState:
        i = frame_index - self.start_frame
        if i < 0 or i >= self.n_frames:
            raise IndexError(
                f"vehicle {self.vehicle_id}: frame {frame_index} outside "
                f"[{self.start_frame}, {self.end_frame}]"
            )
        return self.states[i]

    def covers_frame(self, frame_index: int) -> bool:
        return self.start_frame <= frame_index <= self.end_frame

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VehicleTrack):
            return NotImplemented
        return (
            self.vehicle_id == other.vehicle_id
            and self.vehicle_class is other.vehicle_class
            and self.width == other.width
            and self.length == other.length
            and self.frame_rate == other.frame_rate
            and self.start_frame == other.start_frame
            and self.canonical == other.canonical
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("x", "y", "vx", "vy", "ax", "ay", "lane_id")
            )
        )

    def __repr__(self) -> str:
        return (
            f"VehicleTrack(id={self.vehicle_id}, class={self.vehicle_class.value}, "
            f"frames=[{self.start_frame}..{self.end_frame}])"
        )


class Scene:
    """One recording: lane layout plus all vehicle tracks at a shared frame rate."""

    def __init__(
        self,
        recording_id: str,
        layout: LaneLayout,
        tracks: Mapping[int, VehicleTrack],
        frame_rate: float,
    ):
        if frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        for vid, track in tracks.items():
            if track.frame_rate != frame_rate:
                raise ValueError(
                    f"vehicle {vid}: frame_rate {track.frame_rate} != scene {frame_rate}"
                )
            for lid in np.unique(track.lane_id):
                if int(lid) not in layout:
                    raise UnknownLane(
                        f"vehicle {vid} references lane {int(lid)} missing from layout"
                    )
        self.recording_id = str(recording_id)
        self.layout = layout
        self.tracks: dict[int, VehicleTrack] = dict(tracks)
        self.frame_rate = float(frame_rate)
        self._arrays = None  # lazy kernel-ready packing, see kernels.scene_arrays

    @property
    def frame_range(self) -> tuple[int, int]:
        starts = [t.start_frame for t in self.tracks.values()]
        ends = [t.end_frame for t in self.tracks.values()]
        if not starts:
            return 0, -1
        return min(starts), max(ends)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            self.recording_id == other.recording_id
            and self.layout == other.layout
            and self.frame_rate == other.frame_rate
            and self.tracks == other.tracks
        )

    def __repr__(self) -> str:
        return (
            f"Scene({self.recording_id!r}, {len(self.tracks)} tracks, "
            f"{self.frame_rate} Hz)"
        )


def canonicalize(track: VehicleTrack, layout: LaneLayout) -> VehicleTrack:
    """Express a track in the canonical frame (x forward, y leftward).

    Idempotent: already-canonical tracks are returned unchanged. All lanes a
    track visits must share one travel direction.
    """
    if track.canonical:
        return track
    directions = set()
    for lid in np.unique(track.lane_id):
        directions.add(layout.lane(int(lid)).direction)
    if len(directions) > 1:
        raise ValueError(
            f"vehicle {track.vehicle_id} spans lanes of opposing directions"
        )
    direction = directions.pop()
    if direction is LaneDirection.POSITIVE_X:
        return VehicleTrack(
            track.vehicle_id,
            track.vehicle_class,
            track.width,
            track.length,
            track.frame_rate,
            track.start_frame,
            track.x,
            track.y,
            track.vx,
            track.vy,
            track.ax,
            track.ay,
            track.lane_id,
            canonical=True,
        )
    return VehicleTrack(
        track.vehicle_id,
        track.vehicle_class,
        track.width,
        track.length,
        track.frame_rate,
        track.start_frame,
        -track.x,
        -track.y,
        -track.vx,
        -track.vy,
        -track.ax,
        -track.ay,
        track.lane_id,
        canonical=True,
    )


def decanonicalize(track: VehicleTrack, layout: LaneLayout) -> VehicleTrack:
    """Inverse of `canonicalize`: restore world-frame coordinates."""
    if not track.canonical:
        return track
    direction = layout.lane(int(track.lane_id[0])).direction
    sign = 1.0 if direction is LaneDirection.POSITIVE_X else -1.0
    return VehicleTrack(
        track.vehicle_id,
        track.vehicle_class,
        track.width,
        track.length,
        track.frame_rate,
        track.start_frame,
        sign * track.x,
        sign * track.y,
        sign * track.vx,
        sign * track.vy,
        sign * track.ax,
        sign * track.ay,
        track.lane_id,
        canonical=False,
    )


def derivative(series: np.ndarray, dt: float) -> np.ndarray:
    """Time derivative: central differences inside, one-sided at the ends."""
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if s.shape[0] < 3:
        raise SeriesTooShort(f"need at least 3 samples, got {s.shape[0]}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return np.gradient(s, dt)


def jerk_of(track: VehicleTrack) -> np.ndarray:
    """Jerk series (m/s^3): derivative of longitudinal acceleration."""
    return derivative(track.ax, 1.0 / track.frame_rate)
