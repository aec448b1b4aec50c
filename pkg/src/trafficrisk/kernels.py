"""Hot-path neighbor/metric sweep kernels.

For one ego vehicle the sweep scans every frame of its life against every
candidate vehicle and emits, per (frame, candidate) cell: the relative
position class, the bumper-to-bumper gap, and the three safety metrics
(headway-or-encroachment time, inverse time-to-collision, required
deceleration). Two interchangeable implementations exist:

* a numba ``@njit`` loop kernel (default), and
* a pure-numpy vectorized fallback.

Set ``TRAFFICRISK_NO_NUMBA=1`` to force the numpy path (also used
automatically when numba is unavailable). Both paths compute identical
IEEE-754 results; ``benchmarks/bench_sweep.py`` compares their speed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .trajectory import Scene

# Position codes shared by both kernel paths and the risk engine.
POS_NONE = 0
POS_LV = 1
POS_FV = 2
POS_PL = 3
POS_PF = 4

_ENV_FLAG = "TRAFFICRISK_NO_NUMBA"


def numba_enabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() not in ("1", "true", "yes") and (
        _sweep_njit is not None
    )


@dataclass
class SceneArrays:
    """Kernel-ready columnar packing of one scene's canonical tracks."""

    vehicle_ids: np.ndarray  # (nv,) int64, sorted
    start: np.ndarray  # (nv,) int64 first frame per vehicle
    length: np.ndarray  # (nv,) int64 frame count per vehicle
    offset: np.ndarray  # (nv,) int64 offset into the flat arrays
    body_length: np.ndarray  # (nv,) float64
    body_width: np.ndarray  # (nv,) float64
    is_car: np.ndarray  # (nv,) bool
    x: np.ndarray  # flat float64
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    lane: np.ndarray  # flat int64
    lane_dense: np.ndarray  # (max_lane_id+1,) int64, -1 for absent ids
    lane_lo: np.ndarray  # (L,) float64 canonical lower bound per dense lane
    lane_hi: np.ndarray  # (L,) float64
    lane_left: np.ndarray  # (L,) int64 dense index of canonical-left lane, -1 if none
    lane_right: np.ndarray  # (L,) int64
    lane_id_of_dense: np.ndarray  # (L,) int64

    def index_of(self, vehicle_id: int) -> int:
        i = int(np.searchsorted(self.vehicle_ids, vehicle_id))
        if i >= len(self.vehicle_ids) or self.vehicle_ids[i] != vehicle_id:
            raise KeyError(vehicle_id)
        return i


def scene_arrays(scene: Scene) -> SceneArrays:
    """Build (and cache on the scene) the columnar packing used by the sweep."""
    if scene._arrays is not None:
        return scene._arrays
    from .trajectory import VehicleClass  # local to keep module deps one-way

    vids = np.array(sorted(scene.tracks), dtype=np.int64)
    nv = len(vids)
    start = np.empty(nv, dtype=np.int64)
    length = np.empty(nv, dtype=np.int64)
    offset = np.empty(nv, dtype=np.int64)
    body_length = np.empty(nv, dtype=np.float64)
    body_width = np.empty(nv, dtype=np.float64)
    is_car = np.empty(nv, dtype=bool)
    xs, ys, vxs, vys, lanes = [], [], [], [], []
    off = 0
    for i, vid in enumerate(vids):
        t = scene.tracks[int(vid)]
        if not t.canonical:
            raise ValueError(f"vehicle {vid}: scene tracks must be canonical")
        start[i] = t.start_frame
        length[i] = t.n_frames
        offset[i] = off
        body_length[i] = t.length
        body_width[i] = t.width
        is_car[i] = t.vehicle_class is VehicleClass.CAR
        xs.append(t.x)
        ys.append(t.y)
        vxs.append(t.vx)
        vys.append(t.vy)
        lanes.append(t.lane_id)
        off += t.n_frames

    layout = scene.layout
    lane_ids = np.array(sorted(l.lane_id for l in layout.lanes), dtype=np.int64)
    if len(lane_ids) and (lane_ids.min() < 0 or lane_ids.max() > 100_000):
        raise ValueError("lane ids must be small non-negative integers")
    dense = np.full(int(lane_ids.max()) + 1 if len(lane_ids) else 1, -1, dtype=np.int64)
    dense[lane_ids] = np.arange(len(lane_ids))
    lane_lo = np.empty(len(lane_ids), dtype=np.float64)
    lane_hi = np.empty(len(lane_ids), dtype=np.float64)
    lane_left = np.full(len(lane_ids), -1, dtype=np.int64)
    lane_right = np.full(len(lane_ids), -1, dtype=np.int64)
    for k, lid in enumerate(lane_ids):
        lo, hi = layout.canonical_bounds(int(lid))
        lane_lo[k] = lo
        lane_hi[k] = hi
        left, right = layout.adjacent(int(lid))
        if left is not None:
            lane_left[k] = dense[left]
        if right is not None:
            lane_right[k] = dense[right]

    arrays = SceneArrays(
        vehicle_ids=vids,
        start=start,
        length=length,
        offset=offset,
        body_length=body_length,
        body_width=body_width,
        is_car=is_car,
        x=np.concatenate(xs) if xs else np.empty(0),
        y=np.concatenate(ys) if ys else np.empty(0),
        vx=np.concatenate(vxs) if vxs else np.empty(0),
        vy=np.concatenate(vys) if vys else np.empty(0),
        lane=np.concatenate(lanes) if lanes else np.empty(0, dtype=np.int64),
        lane_dense=dense,
        lane_lo=lane_lo,
        lane_hi=lane_hi,
        lane_left=lane_left,
        lane_right=lane_right,
        lane_id_of_dense=lane_ids,
    )
    scene._arrays = arrays
    return arrays


@dataclass
class SweepResult:
    """Per-(frame, candidate) neighbor classification and metric table."""

    ego_id: int
    start_frame: int
    candidate_ids: np.ndarray  # (m,) int64
    pos: np.ndarray  # (n, m) int8, POS_* codes
    gap: np.ndarray  # (n, m) float64, clamped bumper-to-bumper gap
    pet: np.ndarray  # (n, m) float64, headway (LV/FV) or encroachment PET (PL/PF)
    ittc: np.ndarray  # (n, m) float64
    drac: np.ndarray  # (n, m) float64
    tcross: np.ndarray  # (n, m) float64, lane-boundary crossing time (PL/PF only)
    xenc: np.ndarray  # (n, m) float64, encroachment point (PL/PF only)
    clamped: np.ndarray  # (n, m) bool, gap hit the lower clamp

    @property
    def n_frames(self) -> int:
        return self.pos.shape[0]


def _sweep_loops(
    ego_start,
    ego_x,
    ego_vx,
    ego_lane,
    ego_len,
    cand_start,
    cand_nf,
    cand_off,
    cand_len,
    flat_x,
    flat_y,
    flat_vx,
    flat_vy,
    flat_lane,
    lane_dense,
    lane_lo,
    lane_hi,
    lane_left,
    lane_right,
    vy_min,
    horizon,
    eps_gap,
):
    n = ego_x.shape[0]
    m = cand_start.shape[0]
    pos = np.zeros((n, m), dtype=np.int8)
    gap = np.full((n, m), np.nan)
    pet = np.full((n, m), np.nan)
    ittc = np.full((n, m), np.nan)
    drac = np.full((n, m), np.nan)
    tcross = np.full((n, m), np.nan)
    xenc = np.full((n, m), np.nan)
    clamped = np.zeros((n, m), dtype=np.bool_)

    for i in range(n):
        gf = ego_start + i
        el = lane_dense[ego_lane[i]]
        e_lo = lane_lo[el]
        e_hi = lane_hi[el]
        left = lane_left[el]
        right = lane_right[el]
        xe = ego_x[i]
        ve = ego_vx[i]

        best_lv = -1
        best_lv_dx = np.inf
        best_fv = -1
        best_fv_dx = np.inf

        for j in range(m):
            k = gf - cand_start[j]
            if k < 0 or k >= cand_nf[j]:
                continue
            p = cand_off[j] + k
            ol = lane_dense[flat_lane[p]]
            if ol == el:
                dx = flat_x[p] - xe
                if dx > 0.0:
                    if dx < best_lv_dx:
                        best_lv_dx = dx
                        best_lv = j
                elif dx < 0.0:
                    if -dx < best_fv_dx:
                        best_fv_dx = -dx
                        best_fv = j
            elif ol == left or ol == right:
                vyo = flat_vy[p]
                if ol == left:
                    bnd = e_hi
                    toward = vyo <= -vy_min
                else:
                    bnd = e_lo
                    toward = vyo >= vy_min
                if not toward:
                    continue
                yo = flat_y[p]
                tc = (bnd - yo) / vyo
                if tc <= 0.0 or tc > horizon:
                    continue
                xo = flat_x[p]
                vxo = flat_vx[p]
                xenc_v = xo + vxo * tc
                ego_at = xe + ve * tc
                if xenc_v > ego_at:
                    # merges ahead of the ego: ego is the later arrival
                    pos[i, j] = POS_PL
                    t2 = (xenc_v - xe) / ve if ve > 0.0 else np.inf
                    petv = t2 - tc
                else:
                    # merges behind: ego clears the point first; with the ego
                    # not advancing the pass time is unobservable, measure from now
                    pos[i, j] = POS_PF
                    t1 = (xenc_v - xe) / ve if ve > 0.0 else 0.0
                    petv = tc - t1
                if petv < 0.0:
                    petv = 0.0
                pet[i, j] = petv
                tcross[i, j] = tc
                xenc[i, j] = xenc_v

                dxl = xo - xe
                adx = -dxl if dxl < 0.0 else dxl
                g = adx - 0.5 * (cand_len[j] + ego_len)
                if g < eps_gap:
                    g = eps_gap
                    clamped[i, j] = True
                gap[i, j] = g
                if dxl > 0.0:
                    v_f = ve
                    v_l = vxo
                else:
                    v_f = vxo
                    v_l = ve
                dv = v_f - v_l
                if dv > 0.0:
                    ittc[i, j] = dv / g
                    drac[i, j] = dv * dv / g
                else:
                    ittc[i, j] = 0.0
                    drac[i, j] = 0.0

        if best_lv >= 0:
            j = best_lv
            p = cand_off[j] + (gf - cand_start[j])
            g = best_lv_dx - 0.5 * (cand_len[j] + ego_len)
            if g < eps_gap:
                g = eps_gap
                clamped[i, j] = True
            pos[i, j] = POS_LV
            gap[i, j] = g
            pet[i, j] = g / ve if ve > 0.0 else np.inf
            dv = ve - flat_vx[p]
            if dv > 0.0:
                ittc[i, j] = dv / g
                drac[i, j] = dv * dv / g
            else:
                ittc[i, j] = 0.0
                drac[i, j] = 0.0

        if best_fv >= 0:
            j = best_fv
            p = cand_off[j] + (gf - cand_start[j])
            g = best_fv_dx - 0.5 * (cand_len[j] + ego_len)
            if g < eps_gap:
                g = eps_gap
                clamped[i, j] = True
            v_fv = flat_vx[p]
            pos[i, j] = POS_FV
            gap[i, j] = g
            pet[i, j] = g / v_fv if v_fv > 0.0 else np.inf
            dv = v_fv - ve
            if dv > 0.0:
                ittc[i, j] = dv / g
                drac[i, j] = dv * dv / g
            else:
                ittc[i, j] = 0.0
                drac[i, j] = 0.0

    return pos, gap, pet, ittc, drac, tcross, xenc, clamped


try:  # pragma: no cover - exercised indirectly through the dispatch tests
    if os.environ.get(_ENV_FLAG, "").strip().lower() in ("1", "true", "yes"):
        _sweep_njit = None
    else:
        from numba import njit

        _sweep_njit = njit(cache=True)(_sweep_loops)
except ImportError:  # pragma: no cover
    _sweep_njit = None


def _sweep_numpy(
    ego_start,
    ego_x,
    ego_vx,
    ego_lane,
    ego_len,
    cand_start,
    cand_nf,
    cand_off,
    cand_len,
    flat_x,
    flat_y,
    flat_vx,
    flat_vy,
    flat_lane,
    lane_dense,
    lane_lo,
    lane_hi,
    lane_left,
    lane_right,
    vy_min,
    horizon,
    eps_gap,
):
    """Vectorized twin of `_sweep_loops`; identical outputs, all-numpy."""
    n = ego_x.shape[0]
    m = cand_start.shape[0]
    gf = ego_start + np.arange(n, dtype=np.int64)

    if m == 0 or n == 0:
        nanmat = np.full((n, m), np.nan)
        return (
            np.zeros((n, m), dtype=np.int8),
            nanmat.copy(),
            nanmat.copy(),
            nanmat.copy(),
            nanmat.copy(),
            nanmat.copy(),
            nanmat,
            np.zeros((n, m), dtype=bool),
        )
    idx = gf[:, None] - cand_start[None, :]
    present = (idx >= 0) & (idx < cand_nf[None, :])
    flat = cand_off[None, :] + np.clip(idx, 0, np.maximum(cand_nf - 1, 0)[None, :])

    xo = flat_x[flat]
    yo = flat_y[flat]
    vxo = flat_vx[flat]
    vyo = flat_vy[flat]
    ol = lane_dense[flat_lane[flat]]

    el = lane_dense[ego_lane]  # (n,)
    e_lo = lane_lo[el][:, None]
    e_hi = lane_hi[el][:, None]
    left = lane_left[el][:, None]
    right = lane_right[el][:, None]
    xe = ego_x[:, None]
    ve = ego_vx[:, None]

    same = present & (ol == el[:, None])
    dx = xo - xe

    with np.errstate(divide="ignore", invalid="ignore"):
        # nearest in-lane vehicle ahead / behind
        lv_cost = np.where(same & (dx > 0.0), dx, np.inf)
        fv_cost = np.where(same & (dx < 0.0), -dx, np.inf)
        rows = np.arange(n)
        lv_j = np.argmin(lv_cost, axis=1)
        fv_j = np.argmin(fv_cost, axis=1)
        has_lv = np.isfinite(lv_cost[rows, lv_j])
        has_fv = np.isfinite(fv_cost[rows, fv_j])

        is_left = present & (left >= 0) & (ol == left)
        is_right = present & (right >= 0) & (ol == right)
        adjacent = is_left | is_right
        bnd = np.where(is_left, e_hi, e_lo)
        toward = adjacent & np.where(is_left, vyo <= -vy_min, vyo >= vy_min)
        tc = np.where(toward, (bnd - yo) / vyo, np.nan)
        enc_ok = toward & (tc > 0.0) & (tc <= horizon)

        xenc_v = np.where(enc_ok, xo + vxo * tc, np.nan)
        ego_at = xe + ve * tc
        is_pl = enc_ok & (xenc_v > ego_at)
        is_pf = enc_ok & ~is_pl

        t2 = np.where(ve > 0.0, (xenc_v - xe) / ve, np.inf)
        pet_pl = t2 - tc
        t1 = np.where(ve > 0.0, (xenc_v - xe) / ve, 0.0)
        pet_pf = tc - t1
        pet_enc = np.where(is_pl, pet_pl, pet_pf)
        pet_enc = np.maximum(pet_enc, 0.0)

        adx = np.abs(dx)
        g_raw = adx - 0.5 * (cand_len[None, :] + ego_len)
        g_clamped = g_raw < eps_gap
        g = np.maximum(g_raw, eps_gap)
        v_f = np.where(dx > 0.0, ve, vxo)
        v_l = np.where(dx > 0.0, vxo, ve)
        dv = v_f - v_l
        ittc_lon = np.where(dv > 0.0, dv / g, 0.0)
        drac_lon = np.where(dv > 0.0, dv * dv / g, 0.0)

        # assemble encroachment cells
        pos = np.zeros((n, m), dtype=np.int8)
        pos[is_pl] = POS_PL
        pos[is_pf] = POS_PF
        gap = np.where(enc_ok, g, np.nan)
        pet = np.where(enc_ok, pet_enc, np.nan)
        ittc = np.where(enc_ok, ittc_lon, np.nan)
        drac = np.where(enc_ok, drac_lon, np.nan)
        tcross = np.where(enc_ok, tc, np.nan)
        xenc = np.where(enc_ok, xenc_v, np.nan)
        clamped = enc_ok & g_clamped

        # nearest leading vehicle
        lr = rows[has_lv]
        lc = lv_j[has_lv]
        pos[lr, lc] = POS_LV
        g_lv = g[lr, lc]
        gap[lr, lc] = g_lv
        ve_l = ego_vx[has_lv]
        pet[lr, lc] = np.where(ve_l > 0.0, g_lv / ve_l, np.inf)
        dv_lv = ve_l - vxo[lr, lc]
        ittc[lr, lc] = np.where(dv_lv > 0.0, dv_lv / g_lv, 0.0)
        drac[lr, lc] = np.where(dv_lv > 0.0, dv_lv * dv_lv / g_lv, 0.0)
        tcross[lr, lc] = np.nan
        xenc[lr, lc] = np.nan
        clamped[lr, lc] = g_clamped[lr, lc]

        # nearest following vehicle
        fr = rows[has_fv]
        fc = fv_j[has_fv]
        pos[fr, fc] = POS_FV
        g_fv = g[fr, fc]
        gap[fr, fc] = g_fv
        v_fv = vxo[fr, fc]
        pet[fr, fc] = np.where(v_fv > 0.0, g_fv / v_fv, np.inf)
        dv_fv = v_fv - ego_vx[has_fv]
        ittc[fr, fc] = np.where(dv_fv > 0.0, dv_fv / g_fv, 0.0)
        drac[fr, fc] = np.where(dv_fv > 0.0, dv_fv * dv_fv / g_fv, 0.0)
        tcross[fr, fc] = np.nan
        xenc[fr, fc] = np.nan
        clamped[fr, fc] = g_clamped[fr, fc]

    return pos, gap, pet, ittc, drac, tcross, xenc, clamped


def sweep_ego(
    scene: Scene,
    ego_id: int,
    vy_min: float = 0.05,
    horizon: float = 10.0,
    eps_gap: float = 0.1,
    frame_index: int | None = None,
    use_numba: bool | None = None,
) -> SweepResult:
    """Run the neighbor/metric sweep for one ego vehicle.

    With `frame_index` set, only that single frame is swept (used by the
    per-frame classification API). `use_numba=None` follows the environment
    flag; True/False force a specific path.
    """
    from .errors import FrameOutOfRange, UnknownVehicle

    arrays = scene_arrays(scene)
    try:
        ei = arrays.index_of(ego_id)
    except KeyError:
        raise UnknownVehicle(f"vehicle {ego_id} not in scene") from None

    ego_off = int(arrays.offset[ei])
    ego_nf = int(arrays.length[ei])
    ego_first = int(arrays.start[ei])
    if frame_index is None:
        lo, hi = 0, ego_nf
    else:
        k = frame_index - ego_first
        if k < 0 or k >= ego_nf:
            raise FrameOutOfRange(
                f"vehicle {ego_id} has no frame {frame_index} "
                f"(covers [{ego_first}, {ego_first + ego_nf - 1}])"
            )
        lo, hi = k, k + 1

    ego_x = arrays.x[ego_off + lo : ego_off + hi]
    ego_vx = arrays.vx[ego_off + lo : ego_off + hi]
    ego_lane = arrays.lane[ego_off + lo : ego_off + hi]
    ego_start = ego_first + lo
    ego_end = ego_first + hi - 1

    cand = np.flatnonzero(
        (arrays.vehicle_ids != ego_id)
        & (arrays.start <= ego_end)
        & (arrays.start + arrays.length - 1 >= ego_start)
    )
    args = (
        np.int64(ego_start),
        ego_x,
        ego_vx,
        ego_lane,
        np.float64(arrays.body_length[ei]),
        arrays.start[cand],
        arrays.length[cand],
        arrays.offset[cand],
        arrays.body_length[cand],
        arrays.x,
        arrays.y,
        arrays.vx,
        arrays.vy,
        arrays.lane,
        arrays.lane_dense,
        arrays.lane_lo,
        arrays.lane_hi,
        arrays.lane_left,
        arrays.lane_right,
        np.float64(vy_min),
        np.float64(horizon),
        np.float64(eps_gap),
    )
    if use_numba is None:
        use_numba = numba_enabled()
    if use_numba:
        if _sweep_njit is None:
            raise RuntimeError("numba path requested but numba is unavailable")
        out = _sweep_njit(*args)
    else:
        out = _sweep_numpy(*args)
    return SweepResult(
        ego_id=int(ego_id),
        start_frame=int(ego_start),
        candidate_ids=arrays.vehicle_ids[cand],
        pos=out[0],
        gap=out[1],
        pet=out[2],
        ittc=out[3],
        drac=out[4],
        tcross=out[5],
        xenc=out[6],
        clamped=out[7],
    )
