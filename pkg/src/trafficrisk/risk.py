"""Risk engine: from metric samples to per-ego risk time series.

Each neighbor's metric triple maps to a scalar risk either by category
lookup (safe/conflict/critical thresholds with fixed weights) or by
autoencoder reconstruction error on squash-normalized metrics. Per frame,
the riskiest vehicle of each position class is kept and the classes are
combined by weight-normalized average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from . import kernels
from .autoencoder import AeModel, ae_train
from .config import AeVariant, ModelConfig, PositionalWeights, SsmWeights
from .errors import TrackTooShort
from .neighbors import RelativePosition
from .ssm import SsmSample
from .trajectory import Scene, VehicleClass

# Category thresholds. Boundary values belong to the safe side at the
# safe/conflict border and to the critical side at the conflict/critical
# border, making the three categories a total partition.
PET_SAFE_MIN = 1.0
PET_CRITICAL_MAX = 0.4
DRAC_SAFE_MAX = 3.3
DRAC_CRITICAL_MIN = 5.0
ITTC_SAFE_MAX = 1.0 / 1.5
ITTC_CRITICAL_MIN = 1.0


class SafetyCategory(Enum):
    SAFE = 0.0
    CONFLICT = 0.5
    CRITICAL = 1.0


class SsmKind(Enum):
    PET = "PET"
    DRAC = "DRAC"
    ITTC = "ITTC"


def categorize(kind: SsmKind, value: float) -> SafetyCategory:
    """Assign one of the three safety categories to a metric value."""
    if kind is SsmKind.PET:
        if value >= PET_SAFE_MIN:
            return SafetyCategory.SAFE
        if value <= PET_CRITICAL_MAX:
            return SafetyCategory.CRITICAL
        return SafetyCategory.CONFLICT
    if kind is SsmKind.DRAC:
        if value <= DRAC_SAFE_MAX:
            return SafetyCategory.SAFE
        if value >= DRAC_CRITICAL_MIN:
            return SafetyCategory.CRITICAL
        return SafetyCategory.CONFLICT
    if kind is SsmKind.ITTC:
        if value <= ITTC_SAFE_MAX:
            return SafetyCategory.SAFE
        if value >= ITTC_CRITICAL_MIN:
            return SafetyCategory.CRITICAL
        return SafetyCategory.CONFLICT
    raise ValueError(f"unknown metric kind {kind!r}")


def category_values(kind: SsmKind, values: np.ndarray) -> np.ndarray:
    """Vectorized `categorize` returning the numeric category values."""
    v = np.asarray(values, dtype=np.float64)
    if kind is SsmKind.PET:
        return np.where(v >= PET_SAFE_MIN, 0.0, np.where(v <= PET_CRITICAL_MAX, 1.0, 0.5))
    if kind is SsmKind.DRAC:
        return np.where(v <= DRAC_SAFE_MAX, 0.0, np.where(v >= DRAC_CRITICAL_MIN, 1.0, 0.5))
    if kind is SsmKind.ITTC:
        return np.where(v <= ITTC_SAFE_MAX, 0.0, np.where(v >= ITTC_CRITICAL_MIN, 1.0, 0.5))
    raise ValueError(f"unknown metric kind {kind!r}")


def grid_risk(sample: SsmSample, w: SsmWeights) -> float:
    """Weighted category value of one sample; NaN marks 'cannot evaluate'.

    Single-metric configs without the PET column cannot score parallel
    vehicles, whose only defined time margin is PET; those return NaN so the
    aggregation skips the vehicle.
    """
    if w.uses_ae:
        raise ValueError("grid_risk requires a grid config (a-e)")
    parallel = sample.relative_position in (RelativePosition.PL, RelativePosition.PF)
    if parallel and not w.evaluates_parallel:
        return float("nan")
    total = 0.0
    if w.w_pet > 0.0:
        total += w.w_pet * categorize(SsmKind.PET, sample.pet).value
    if w.w_drac > 0.0:
        total += w.w_drac * categorize(SsmKind.DRAC, sample.drac).value
    if w.w_ittc > 0.0:
        total += w.w_ittc * categorize(SsmKind.ITTC, sample.ittc).value
    return total


def normalize_ssm(
    sample: SsmSample,
    pet_scale: float = 1.0,
    drac_scale: float = 5.0,
    ittc_scale: float = 1.0,
) -> np.ndarray:
    """Squash the metric triple into [0, 1], risk-oriented (larger = worse)."""
    pet = sample.pet
    n_pet = 0.0 if math.isinf(pet) else 1.0 - math.tanh(pet / pet_scale)
    n_drac = math.tanh(sample.drac / drac_scale)
    n_ittc = math.tanh(max(sample.ittc, 0.0) / ittc_scale)
    return np.array([n_pet, n_drac, n_ittc])


def _normalize_tables(
    pet: np.ndarray, drac: np.ndarray, ittc: np.ndarray, cfg: ModelConfig
) -> np.ndarray:
    """(n, m, 3) squashed metrics; NaN cells propagate."""
    with np.errstate(invalid="ignore"):
        n_pet = np.where(np.isposinf(pet), 0.0, 1.0 - np.tanh(pet / cfg.pet_scale))
        n_drac = np.tanh(drac / cfg.drac_scale)
        n_ittc = np.tanh(np.maximum(ittc, 0.0) / cfg.ittc_scale)
    return np.stack([n_pet, n_drac, n_ittc], axis=-1)


def aggregate_ego_risk(
    risks: Mapping[RelativePosition, float | None], pw: PositionalWeights
) -> float:
    """Weight-normalized combination over positions with a defined risk.

    `risks` holds the per-position maximum (None or NaN = position absent or
    not evaluable). Returns 0 with no defined contributions.
    """
    weights = {
        RelativePosition.LV: pw.w_lv,
        RelativePosition.FV: pw.w_fv,
        RelativePosition.PL: pw.w_pl,
        RelativePosition.PF: pw.w_pf,
    }
    num = 0.0
    den = 0.0
    for pos, r in risks.items():
        if r is None or (isinstance(r, float) and math.isnan(r)):
            continue
        num += weights[pos] * r
        den += weights[pos]
    if den == 0.0:
        return 0.0
    return num / den


@dataclass(frozen=True, slots=True)
class RiskSeries:
    """Per-frame overall risk for one ego, with per-position components."""

    ego_id: int
    start_frame: int
    frame_rate: float
    overall: np.ndarray  # (n,)
    components: np.ndarray  # (4, n) LV/FV/PL/PF maxima, NaN when absent

    @property
    def n_frames(self) -> int:
        return self.overall.shape[0]


_POSITION_ORDER = (
    RelativePosition.LV,
    RelativePosition.FV,
    RelativePosition.PL,
    RelativePosition.PF,
)
_POS_CODES = (kernels.POS_LV, kernels.POS_FV, kernels.POS_PL, kernels.POS_PF)


def _risk_table(
    sweep: kernels.SweepResult,
    w: SsmWeights,
    cfg: ModelConfig,
    ae: AeModel | None,
) -> np.ndarray:
    """Per-(frame, candidate) risk; NaN where unclassified or not evaluable."""
    if w.uses_ae:
        if ae is None:
            raise ValueError(f"config {w.config_id} needs a trained autoencoder")
        vec = _normalize_tables(sweep.pet, sweep.drac, sweep.ittc, cfg)
        n, m, _ = vec.shape
        flat = vec.reshape(-1, 3)
        ok = ~np.isnan(flat).any(axis=1)
        risk = np.full(n * m, np.nan)
        if ok.any():
            rec = ae.reconstruct(flat[ok])
            risk[ok] = np.mean(np.abs(rec - flat[ok]), axis=1)
        return risk.reshape(n, m)
    risk = (
        w.w_pet * category_values(SsmKind.PET, sweep.pet)
        + w.w_drac * category_values(SsmKind.DRAC, sweep.drac)
        + w.w_ittc * category_values(SsmKind.ITTC, sweep.ittc)
    )
    risk = np.where(sweep.pos == kernels.POS_NONE, np.nan, risk)
    if not w.evaluates_parallel:
        parallel = (sweep.pos == kernels.POS_PL) | (sweep.pos == kernels.POS_PF)
        risk = np.where(parallel, np.nan, risk)
    return risk


def risk_timeseries(
    scene: Scene,
    ego_id: int,
    ssm_w: SsmWeights,
    pos_w: PositionalWeights,
    ae: AeModel | None = None,
    cfg: ModelConfig | None = None,
) -> RiskSeries:
    """Full per-frame risk series for one ego vehicle."""
    cfg = cfg or ModelConfig()
    track = scene.tracks[ego_id]
    min_frames = max(3, int(round(cfg.min_series_seconds * scene.frame_rate)))
    if track.n_frames < min_frames:
        raise TrackTooShort(
            f"vehicle {ego_id}: {track.n_frames} frames < minimum {min_frames}"
        )
    sweep = kernels.sweep_ego(
        scene, ego_id, vy_min=cfg.vy_min, horizon=cfg.horizon, eps_gap=cfg.eps_gap
    )
    risk = _risk_table(sweep, ssm_w, cfg, ae)

    n = sweep.pos.shape[0]
    components = np.full((4, n), np.nan)
    for k, code in enumerate(_POS_CODES):
        mask = (sweep.pos == code) & ~np.isnan(risk)
        masked = np.where(mask, risk, -np.inf)
        comp = masked.max(axis=1) if masked.shape[1] else np.full(n, -np.inf)
        components[k] = np.where(np.isfinite(comp), comp, np.nan)

    weights = pos_w.as_array()[:, None]
    defined = ~np.isnan(components)
    num = (weights * np.where(defined, components, 0.0)).sum(axis=0)
    den = (weights * defined).sum(axis=0)
    with np.errstate(invalid="ignore"):
        overall = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    return RiskSeries(
        ego_id=int(ego_id),
        start_frame=sweep.start_frame,
        frame_rate=scene.frame_rate,
        overall=overall,
        components=components,
    )


def safe_vectors(scene: Scene, cfg: ModelConfig | None = None) -> np.ndarray:
    """Normalized metric vectors from pairs every metric rated safe.

    Collected over every ego candidate (all cars) in the scene; these are the
    training inputs for the autoencoder variants.
    """
    cfg = cfg or ModelConfig()
    out = []
    for vid in sorted(scene.tracks):
        if scene.tracks[vid].vehicle_class is not VehicleClass.CAR:
            continue
        sweep = kernels.sweep_ego(
            scene, vid, vy_min=cfg.vy_min, horizon=cfg.horizon, eps_gap=cfg.eps_gap
        )
        classified = sweep.pos != kernels.POS_NONE
        if not classified.any():
            continue
        all_safe = (
            classified
            & (category_values(SsmKind.PET, sweep.pet) == 0.0)
            & (category_values(SsmKind.DRAC, sweep.drac) == 0.0)
            & (category_values(SsmKind.ITTC, sweep.ittc) == 0.0)
        )
        if not all_safe.any():
            continue
        vec = _normalize_tables(sweep.pet, sweep.drac, sweep.ittc, cfg)
        out.append(vec[all_safe])
    if not out:
        return np.empty((0, 3))
    return np.concatenate(out, axis=0)


def train_corpus_ae(
    scenes: list[Scene], variant: AeVariant, cfg: ModelConfig | None = None
) -> AeModel:
    """Train one autoencoder on the safe vectors of a whole corpus."""
    cfg = cfg or ModelConfig()
    vecs = [safe_vectors(s, cfg) for s in scenes]
    data = np.concatenate(vecs, axis=0) if vecs else np.empty((0, 3))
    if data.shape[0] > cfg.ae_max_samples:
        rng = np.random.default_rng(cfg.ae_seed)
        keep = rng.choice(data.shape[0], size=cfg.ae_max_samples, replace=False)
        data = data[np.sort(keep)]
    return ae_train(
        data,
        variant,
        epochs=cfg.ae_epochs,
        learning_rate=cfg.ae_learning_rate,
        batch_size=cfg.ae_batch_size,
        seed=cfg.ae_seed,
    )
