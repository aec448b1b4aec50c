"""Parsers for trajectory tables into scenes.

Two entry formats are supported: the drone-recorded highway dataset's
three-file recording layout (tracks, per-track metadata, recording metadata)
and a single-file generic CSV with the header::

    frame,vehicle_id,x,y,vx,vy,ax,ay,width,length,lane_id,vehicle_class

Generic rows are world-frame, units m / m/s / m/s^2, '.' decimal separator.
Parsers never drop rows silently: a row either parses or raises.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import IO, Iterable

import numpy as np
import pandas as pd

from .errors import FrameGap, MalformedRow, MissingColumn, UnknownLane
from .trajectory import (
    Lane,
    LaneDirection,
    LaneLayout,
    Scene,
    VehicleClass,
    VehicleTrack,
    canonicalize,
    decanonicalize,
)

GENERIC_HEADER = [
    "frame",
    "vehicle_id",
    "x",
    "y",
    "vx",
    "vy",
    "ax",
    "ay",
    "width",
    "length",
    "lane_id",
    "vehicle_class",
]

_TRACKS_COLUMNS = [
    "frame",
    "id",
    "x",
    "y",
    "width",
    "height",
    "xVelocity",
    "yVelocity",
    "xAcceleration",
    "yAcceleration",
    "laneId",
]
_TRACKS_META_COLUMNS = ["id", "width", "height", "class"]
_RECORDING_META_COLUMNS = [
    "id",
    "frameRate",
    "upperLaneMarkings",
    "lowerLaneMarkings",
]


def _as_text(stream: str | Path | IO[bytes] | IO[str]) -> IO[str]:
    if isinstance(stream, (str, Path)):
        return open(stream, "r", encoding="utf-8", newline="")
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def parse_generic(
    stream: str | Path | IO[bytes] | IO[str],
    layout: LaneLayout,
    frame_rate: float,
    recording_id: str = "generic",
) -> Scene:
    """Parse the one-file generic CSV into a canonicalized scene."""
    fh = _as_text(stream)
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow("empty file") from None
    if header != GENERIC_HEADER:
        missing = [c for c in GENERIC_HEADER if c not in header]
        if missing:
            raise MissingColumn(f"missing columns: {', '.join(missing)}")
        raise MalformedRow(f"unexpected header order: {header}")

    rows: dict[int, list[tuple]] = {}
    meta: dict[int, tuple[float, float, VehicleClass]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(GENERIC_HEADER):
            raise MalformedRow(f"line {lineno}: expected {len(GENERIC_HEADER)} fields")
        try:
            frame = int(row[0])
            vid = int(row[1])
            nums = [float(v) for v in row[2:10]]
            lane_id = int(row[10])
            vclass = VehicleClass(row[11])
        except ValueError as e:
            raise MalformedRow(f"line {lineno}: {e}") from None
        if not all(math.isfinite(v) for v in nums):
            raise MalformedRow(f"line {lineno}: non-finite value")
        if vid in meta:
            if meta[vid][2] is not vclass:
                raise MalformedRow(f"line {lineno}: vehicle {vid} changes class")
        else:
            meta[vid] = (nums[6], nums[7], vclass)  # width, length
        rows.setdefault(vid, []).append((frame, *nums[:6], lane_id))

    tracks: dict[int, VehicleTrack] = {}
    for vid in sorted(rows):
        recs = sorted(rows[vid], key=lambda r: r[0])
        frames = [r[0] for r in recs]
        if len(set(frames)) != len(frames):
            raise MalformedRow(f"vehicle {vid}: duplicate frame")
        for a, b in zip(frames, frames[1:]):
            if b != a + 1:
                raise FrameGap(f"vehicle {vid}: gap between frames {a} and {b}")
        width, length, vclass = meta[vid]
        arr = np.array([r[1:7] for r in recs], dtype=np.float64)
        try:
            track = VehicleTrack(
                vid,
                vclass,
                width,
                length,
                frame_rate,
                frames[0],
                arr[:, 0],
                arr[:, 1],
                arr[:, 2],
                arr[:, 3],
                arr[:, 4],
                arr[:, 5],
                np.array([r[7] for r in recs], dtype=np.int64),
            )
        except ValueError as e:
            raise MalformedRow(f"vehicle {vid}: {e}") from None
        tracks[vid] = canonicalize(track, layout)
    return Scene(recording_id, layout, tracks, frame_rate)


def write_generic(scene: Scene, path: str | Path) -> None:
    """Write a scene to the generic CSV in world-frame coordinates.

    Floats use shortest round-trip formatting, so parse(write(scene))
    reproduces the scene field-exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GENERIC_HEADER)
        for vid in sorted(scene.tracks):
            track = decanonicalize(scene.tracks[vid], scene.layout)
            for i in range(track.n_frames):
                writer.writerow(
                    [
                        track.start_frame + i,
                        vid,
                        repr(float(track.x[i])),
                        repr(float(track.y[i])),
                        repr(float(track.vx[i])),
                        repr(float(track.vy[i])),
                        repr(float(track.ax[i])),
                        repr(float(track.ay[i])),
                        repr(track.width),
                        repr(track.length),
                        int(track.lane_id[i]),
                        track.vehicle_class.value,
                    ]
                )


def layout_to_dict(layout: LaneLayout) -> dict:
    return {
        "lanes": [
            {
                "lane_id": l.lane_id,
                "lower": l.lower,
                "upper": l.upper,
                "direction": l.direction.value,
            }
            for l in layout.lanes
        ]
    }


def layout_from_dict(data: dict) -> LaneLayout:
    return LaneLayout(
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


def write_scene_meta(scene: Scene, path: str | Path) -> None:
    """Sidecar JSON holding recording id, frame rate, and the lane layout."""
    data = {
        "recording_id": scene.recording_id,
        "frame_rate": scene.frame_rate,
        **layout_to_dict(scene.layout),
    }
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", "utf-8")


def read_scene_meta(path: str | Path) -> tuple[str, float, LaneLayout]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return str(data["recording_id"]), float(data["frame_rate"]), layout_from_dict(data)


def load_generic_scene(csv_path: str | Path, meta_path: str | Path | None = None) -> Scene:
    """Load a generic CSV with its sidecar meta JSON (``<name>.meta.json``)."""
    csv_path = Path(csv_path)
    if meta_path is None:
        meta_path = csv_path.parent / (csv_path.stem + ".meta.json")
    recording_id, frame_rate, layout = read_scene_meta(meta_path)
    return parse_generic(csv_path, layout, frame_rate, recording_id=recording_id)


def _require_columns(df: pd.DataFrame, required: Iterable[str], what: str) -> None:
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise MissingColumn(f"{what}: missing columns {', '.join(missing)}")


def assign_lanes(
    y: np.ndarray, layout: LaneLayout, direction: LaneDirection
) -> np.ndarray:
    """Vectorized lane assignment by lateral center, nearest lane if outside.

    Matches `LaneLayout.lane_id_at` elementwise; used on the bulk ingestion
    path where a per-state Python loop would dominate parsing time.
    """
    group = sorted(
        (l for l in layout.lanes if l.direction is direction), key=lambda l: l.lower
    )
    if not group:
        raise UnknownLane(f"layout has no {direction.value} lanes")
    lowers = np.array([l.lower for l in group])
    uppers = np.array([l.upper for l in group])
    ids = np.array([l.lane_id for l in group], dtype=np.int64)
    y = np.asarray(y, dtype=np.float64)
    # side="left" keeps shared-boundary points in the lower lane, matching
    # the first-containing-lane rule of LaneLayout.lane_id_at
    idx = np.clip(np.searchsorted(lowers, y, side="left") - 1, 0, len(group) - 1)
    # y above the containing candidate's upper bound: the next lane may be closer
    above = y > uppers[idx]
    has_next = idx + 1 < len(group)
    bump = above & has_next & (lowers[np.minimum(idx + 1, len(group) - 1)] - y < y - uppers[idx])
    return ids[idx + bump.astype(np.int64)]


def _first_bad_line(values: pd.Series) -> int:
    bad = np.flatnonzero(~np.isfinite(pd.to_numeric(values, errors="coerce")))
    return int(bad[0]) + 2  # header + 1-based


def parse_highd(
    tracks_csv: str | Path | IO,
    tracks_meta_csv: str | Path | IO,
    recording_meta_csv: str | Path | IO,
) -> Scene:
    """Parse one drone-dataset recording (three CSVs) into a scene.

    Bounding-box (x, y) anchors are converted to geometric centers, the image
    y-axis (growing downward) is flipped into the world frame, lane intervals
    are rebuilt from the marking positions, and each state's lane is
    re-derived from its lateral center. Tracks come out canonicalized.
    """
    rec = pd.read_csv(recording_meta_csv, dtype={"id": str})
    _require_columns(rec, _RECORDING_META_COLUMNS, "recording meta")
    if len(rec) != 1:
        raise MalformedRow(f"recording meta: expected 1 row, got {len(rec)}")
    frame_rate = float(rec["frameRate"].iloc[0])
    recording_id = str(rec["id"].iloc[0])
    upper = _parse_markings(rec["upperLaneMarkings"].iloc[0], "upperLaneMarkings")
    lower = _parse_markings(rec["lowerLaneMarkings"].iloc[0], "lowerLaneMarkings")

    meta = pd.read_csv(tracks_meta_csv)
    _require_columns(meta, _TRACKS_META_COLUMNS, "tracks meta")
    classes: dict[int, VehicleClass] = {}
    # in the source schema the bounding box "width" is the vehicle length
    # (longitudinal extent) and "height" its width (lateral extent)
    dims: dict[int, tuple[float, float]] = {}
    for _, row in meta.iterrows():
        vid = int(row["id"])
        try:
            classes[vid] = VehicleClass(str(row["class"]))
        except ValueError:
            raise MalformedRow(
                f"tracks meta: vehicle {vid}: unknown class {row['class']!r}"
            ) from None
        dims[vid] = (float(row["height"]), float(row["width"]))  # (width, length)

    df = pd.read_csv(tracks_csv)
    _require_columns(df, _TRACKS_COLUMNS, "tracks")
    for col in _TRACKS_COLUMNS:
        values = pd.to_numeric(df[col], errors="coerce")
        if not np.isfinite(values.to_numpy(dtype=np.float64, na_value=np.nan)).all():
            raise MalformedRow(f"tracks: line {_first_bad_line(df[col])}: bad {col}")
        df[col] = values

    # image frame -> world frame (y up): flip y-like quantities
    cx = (df["x"] + df["width"] / 2.0).to_numpy()
    cy = (df["y"] + df["height"] / 2.0).to_numpy()
    wy = -cy
    wvy = (-df["yVelocity"]).to_numpy()
    wvx = df["xVelocity"].to_numpy()
    way = (-df["yAcceleration"]).to_numpy()
    wax = df["xAcceleration"].to_numpy()
    frames = df["frame"].to_numpy(dtype=np.int64)
    ids = df["id"].to_numpy(dtype=np.int64)

    upper_span = (-upper[-1], -upper[0])
    lower_span = (-lower[-1], -lower[0])
    upper_dir = _group_direction(wy, wvx, upper_span, LaneDirection.NEGATIVE_X)
    lower_dir = _group_direction(wy, wvx, lower_span, LaneDirection.POSITIVE_X)

    lanes: list[Lane] = []
    next_id = 2  # id 1 is reserved for the area beyond the upper road edge
    for i in range(len(upper) - 1):
        lanes.append(Lane(next_id + i, -upper[i + 1], -upper[i], upper_dir))
    next_id += len(upper) - 1 + 1  # skip one id for the median strip
    for i in range(len(lower) - 1):
        lanes.append(Lane(next_id + i, -lower[i + 1], -lower[i], lower_dir))
    layout = LaneLayout(lanes)

    tracks: dict[int, VehicleTrack] = {}
    order = np.lexsort((frames, ids))
    bounds = np.flatnonzero(np.diff(ids[order])) + 1
    for chunk in np.split(order, bounds):
        vid = int(ids[chunk[0]])
        if vid not in classes:
            raise MalformedRow(f"tracks: vehicle {vid} missing from tracks meta")
        fseq = frames[chunk]
        gaps = np.flatnonzero(np.diff(fseq) != 1)
        if gaps.size:
            raise FrameGap(
                f"vehicle {vid}: gap between frames {int(fseq[gaps[0]])} "
                f"and {int(fseq[gaps[0] + 1])}"
            )
        y_chunk = wy[chunk]
        group_dir = (
            upper_dir
            if _span_distance(float(np.mean(y_chunk)), upper_span)
            <= _span_distance(float(np.mean(y_chunk)), lower_span)
            else lower_dir
        )
        lane_ids = assign_lanes(y_chunk, layout, group_dir)
        width, length = dims[vid]
        track = VehicleTrack(
            vid,
            classes[vid],
            width,
            length,
            frame_rate,
            int(fseq[0]),
            cx[chunk],
            y_chunk,
            wvx[chunk],
            wvy[chunk],
            wax[chunk],
            way[chunk],
            lane_ids,
        )
        tracks[vid] = canonicalize(track, layout)
    return Scene(recording_id, layout, tracks, frame_rate)


def _parse_markings(raw, what: str) -> list[float]:
    try:
        values = [float(v) for v in str(raw).split(";") if v != ""]
    except ValueError:
        raise MalformedRow(f"recording meta: bad {what}: {raw!r}") from None
    if len(values) < 2 or sorted(values) != values:
        raise MalformedRow(f"recording meta: {what} needs >= 2 sorted positions")
    return values


def _span_distance(y: float, span: tuple[float, float]) -> float:
    lo, hi = span
    if lo <= y <= hi:
        return 0.0
    return min(abs(y - lo), abs(y - hi))


def _group_direction(
    wy: np.ndarray,
    wvx: np.ndarray,
    span: tuple[float, float],
    default: LaneDirection,
) -> LaneDirection:
    inside = (wy >= span[0]) & (wy <= span[1])
    if not inside.any():
        return default
    med = float(np.median(wvx[inside]))
    if med == 0.0:
        return default
    return LaneDirection.POSITIVE_X if med > 0 else LaneDirection.NEGATIVE_X


def exclude_truck_lane_changes(scene: Scene) -> Scene:
    """Drop every truck whose lane changes at any frame; cars are untouched."""
    kept = {
        vid: track
        for vid, track in scene.tracks.items()
        if not (
            track.vehicle_class is VehicleClass.TRUCK
            and np.unique(track.lane_id).size > 1
        )
    }
    return Scene(scene.recording_id, scene.layout, kept, scene.frame_rate)
