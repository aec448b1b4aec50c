import numpy as np
import pytest

from trafficrisk.trajectory import (
    Lane,
    LaneDirection,
    LaneLayout,
    Scene,
    VehicleClass,
    VehicleTrack,
)

LANE_W = 3.6


@pytest.fixture
def layout3():
    """Three same-direction lanes: 1 (right), 2 (middle), 3 (left)."""
    return LaneLayout(
        [
            Lane(1, 0.0, LANE_W, LaneDirection.POSITIVE_X),
            Lane(2, LANE_W, 2 * LANE_W, LaneDirection.POSITIVE_X),
            Lane(3, 2 * LANE_W, 3 * LANE_W, LaneDirection.POSITIVE_X),
        ]
    )


def make_track(
    vid,
    n,
    x0,
    y,
    vx,
    vy=0.0,
    ax=0.0,
    frame_rate=25.0,
    vehicle_class=VehicleClass.CAR,
    length=4.5,
    width=2.0,
    layout=None,
    start_frame=0,
):
    """Constant-velocity (optionally accelerating/drifting) canonical track."""
    dt = 1.0 / frame_rate
    t = np.arange(n) * dt
    xs = x0 + vx * t + 0.5 * ax * t * t
    ys = y + vy * t
    vxs = vx + ax * t
    vys = np.full(n, vy)
    if layout is None:
        lane_ids = np.full(n, 1 + np.clip(ys // LANE_W, 0, 2).astype(np.int64))
    else:
        lane_ids = np.array(
            [layout.lane_id_at(float(yy), LaneDirection.POSITIVE_X) for yy in ys],
            dtype=np.int64,
        )
    return VehicleTrack(
        vid,
        vehicle_class,
        width,
        length,
        frame_rate,
        start_frame,
        xs,
        ys,
        vxs,
        vys,
        np.full(n, ax),
        np.zeros(n),
        lane_ids,
        canonical=True,
    )


def make_scene(layout, tracks, frame_rate=25.0, recording_id="test"):
    return Scene(recording_id, layout, {t.vehicle_id: t for t in tracks}, frame_rate)


def random_scene(rng, layout, n_vehicles=5, n_frames=60, frame_rate=25.0):
    """Vehicles with random lanes, speeds, and lateral drifts."""
    tracks = []
    for vid in range(1, n_vehicles + 1):
        lane = int(rng.integers(1, 4))
        y = (lane - 0.5) * LANE_W + float(rng.uniform(-1.0, 1.0))
        vy = float(rng.uniform(-1.2, 1.2)) if rng.random() < 0.6 else 0.0
        # keep the drift inside the lane so lane ids stay constant
        span = n_frames / frame_rate
        y = float(np.clip(y, (lane - 1) * LANE_W + 0.2, lane * LANE_W - 0.2))
        max_vy = ((lane - 1) * LANE_W, lane * LANE_W)
        if vy < 0:
            vy = max(vy, (max_vy[0] + 0.05 - y) / span)
        else:
            vy = min(vy, (max_vy[1] - 0.05 - y) / span)
        tracks.append(
            make_track(
                vid,
                n_frames,
                x0=float(rng.uniform(0, 300)),
                y=y,
                vx=float(rng.uniform(18, 38)),
                vy=vy,
                frame_rate=frame_rate,
                vehicle_class=VehicleClass.CAR if rng.random() < 0.8 else VehicleClass.TRUCK,
            )
        )
    return make_scene(layout, tracks, frame_rate)
