"""Statistical evaluation of risk series against driver behavior.

Per ego: align |d(risk)/dt| with |jerk| at the cross-correlation lag (when it
falls inside a plausible reaction window), then test rank correlation.
Corpus level: summarize significant correlations and compare model
configurations pairwise with a one-sided signed-rank test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr, stdtr

from .autoencoder import AeModel
from .config import ModelConfig, parse_model_id
from .errors import (
    AllZeroDiffs,
    NoEgoCandidates,
    SeriesTooShort,
    TrackTooShort,
    ZeroVariance,
)
from .risk import RiskSeries, risk_timeseries, train_corpus_ae
from .trajectory import Scene, VehicleClass, VehicleTrack, derivative, jerk_of

WILCOXON_EXACT_MAX_N = 25


@dataclass(frozen=True, slots=True)
class CorrelationResult:
    """Rank-correlation outcome for one ego (risk gradient vs. jerk)."""

    ego_id: int
    lag_frames: int
    lag_seconds: float
    rho: float
    p_value: float
    n: int
    significant: bool
    scene_id: str = ""
    note: str = ""


@dataclass(frozen=True, slots=True)
class ConfigComparison:
    """One ordered cell of the pairwise configuration comparison matrix."""

    row: str
    col: str
    statistic: float
    p_value: float
    verdict: str  # 'r' rejected, 'n' not rejected, 'x' not comparable


def _avg_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.shape[0], dtype=np.float64)
    sv = v[order]
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Rank correlation with a two-sided t-distribution p-value.

    Ties get average ranks; the p-value uses t = rho*sqrt((n-2)/(1-rho^2))
    against Student's t with n-2 degrees of freedom (incomplete-beta CDF).
    Approximate for very small n.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length 1-d series")
    n = x.shape[0]
    if n < 4:
        raise SeriesTooShort(f"need at least 4 samples, got {n}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("series must be finite")
    rx = _avg_ranks(x)
    ry = _avg_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    sx = np.sqrt(np.sum(rx * rx))
    sy = np.sqrt(np.sum(ry * ry))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVariance("constant series has no rank correlation")
    rho = float(np.sum(rx * ry) / (sx * sy))
    rho = min(1.0, max(-1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return rho, min(p, 1.0)


def best_lag(
    a: np.ndarray,
    b: np.ndarray,
    frame_rate: float,
    max_lag_s: float = 2.0,
) -> tuple[int, float]:
    """Shift of `b` relative to `a` maximizing their cross-correlation.

    Both series are mean-removed; every integer shift with overlap is
    scanned. A positive lag k means b trails a (b[i+k] pairs with a[i]).
    Only lags inside [0, max_lag_s] are accepted; otherwise no shift is
    applied and lag 0 is returned.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError("series must be 1-d and equal length")
    n = a.shape[0]
    if n < 3:
        raise SeriesTooShort(f"need at least 3 samples, got {n}")
    if frame_rate <= 0:
        raise ValueError("frame_rate must be positive")
    a0 = a - a.mean()
    b0 = b - b.mean()
    na = np.sqrt(np.sum(a0 * a0))
    nb = np.sqrt(np.sum(b0 * b0))
    if na == 0.0 or nb == 0.0:
        raise ZeroVariance("constant series has no cross-correlation")
    # full cross-correlation; index k+n-1 holds sum_i a0[i] * b0[i+k]
    corr = np.correlate(b0, a0, mode="full") / (na * nb)
    k = int(np.argmax(corr)) - (n - 1)
    max_lag = int(round(max_lag_s * frame_rate))
    if 0 <= k <= max_lag:
        return k, k / frame_rate
    return 0, 0.0


def wilcoxon_signed_rank(
    diffs: Sequence[float], alternative: str = "greater"
) -> tuple[float, float]:
    """One-sample signed-rank test statistic W+ and its one-sided p-value.

    Zero differences are dropped; absolute differences are ranked with
    average ranks. Without ties and n <= 25 the p-value is exact (subset-sum
    counting over rank assignments); otherwise a normal approximation with
    tie and continuity corrections is used.
    """
    if alternative != "greater":
        raise ValueError("only the 'greater' alternative is supported")
    d = np.asarray(diffs, dtype=np.float64)
    if d.ndim != 1:
        raise ValueError("diffs must be 1-d")
    if not np.isfinite(d).all():
        raise ValueError("diffs must be finite")
    if d.shape[0] and (d == 0.0).all():
        raise AllZeroDiffs("all differences are zero")
    d = d[d != 0.0]
    n = d.shape[0]
    if n < 5:
        raise SeriesTooShort(f"need at least 5 non-zero differences, got {n}")
    ranks = _avg_ranks(np.abs(d))
    w_plus = float(np.sum(ranks[d > 0.0]))
    has_ties = len(np.unique(np.abs(d))) < n

    if not has_ties and n <= WILCOXON_EXACT_MAX_N:
        # counts[w] = number of rank subsets with sum w
        w_max = n * (n + 1) // 2
        counts = np.zeros(w_max + 1, dtype=np.float64)
        counts[0] = 1.0
        for r in range(1, n + 1):
            counts[r:] += counts[: w_max + 1 - r].copy()
        w_obs = int(round(w_plus))
        p = float(counts[w_obs:].sum() / 2.0**n)
        return w_plus, min(p, 1.0)

    mu = n * (n + 1) / 4.0
    ties = np.unique(np.abs(d), return_counts=True)[1]
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(ties**3 - ties)) / 48.0
    if var <= 0.0:
        raise ZeroVariance("tie-corrected variance is zero")
    z = (w_plus - mu - 0.5) / np.sqrt(var)
    p = float(ndtr(-z))
    return w_plus, min(p, 1.0)


def evaluate_ego(
    risk: RiskSeries,
    track: VehicleTrack,
    cfg: ModelConfig | None = None,
    scene_id: str = "",
) -> CorrelationResult:
    """Correlate |d(risk)/dt| with |jerk| for one ego at the best lag.

    Constant series (no risk changes or no acceleration changes) cannot
    correlate; they are reported as non-significant with a diagnostic note
    rather than raised.
    """
    cfg = cfg or ModelConfig()
    if risk.ego_id != track.vehicle_id:
        raise ValueError("risk series and track belong to different vehicles")
    if risk.n_frames != track.n_frames:
        raise ValueError("risk series and track must cover the same frames")
    dt = 1.0 / track.frame_rate
    g = np.abs(derivative(risk.overall, dt))
    j = np.abs(jerk_of(track))
    n = g.shape[0]

    def _flat(note: str) -> CorrelationResult:
        return CorrelationResult(
            ego_id=track.vehicle_id,
            lag_frames=0,
            lag_seconds=0.0,
            rho=0.0,
            p_value=1.0,
            n=n,
            significant=False,
            scene_id=scene_id,
            note=note,
        )

    try:
        k, lag_s = best_lag(g, j, track.frame_rate, cfg.max_lag_seconds)
    except ZeroVariance:
        return _flat("zero_variance")
    overlap = n - k
    if overlap < cfg.min_overlap:
        raise SeriesTooShort(
            f"overlap {overlap} after lag {k} below minimum {cfg.min_overlap}"
        )
    try:
        rho, p = spearman(g[: n - k], j[k:])
    except ZeroVariance:
        return _flat("zero_variance")
    return CorrelationResult(
        ego_id=track.vehicle_id,
        lag_frames=k,
        lag_seconds=lag_s,
        rho=rho,
        p_value=p,
        n=overlap,
        significant=p < cfg.alpha,
        scene_id=scene_id,
        note="",
    )


@dataclass(frozen=True, slots=True)
class CorpusSummary:
    """Aggregate over one configuration's per-ego results."""

    config_id: str
    n_egos: int
    n_significant: int
    significant_fraction: float
    rho_mean: float | None
    rho_std: float | None
    n_failed: int = 0


def _summarize(config_id: str, results: list[CorrelationResult], n_failed: int) -> CorpusSummary:
    rhos = np.array([r.rho for r in results if r.significant], dtype=np.float64)
    n_eval = len(results)
    mean = float(np.mean(rhos)) if rhos.size else None
    std = float(np.std(rhos, ddof=1)) if rhos.size > 1 else None
    return CorpusSummary(
        config_id=config_id,
        n_egos=n_eval,
        n_significant=int(rhos.size),
        significant_fraction=(rhos.size / n_eval) if n_eval else 0.0,
        rho_mean=mean,
        rho_std=std,
        n_failed=n_failed,
    )


def ego_candidates(scene: Scene) -> list[int]:
    """All car tracks of a scene, in id order."""
    return [
        vid
        for vid in sorted(scene.tracks)
        if scene.tracks[vid].vehicle_class is VehicleClass.CAR
    ]


def evaluate_corpus(
    scenes: Sequence[Scene],
    model_id: str,
    cfg: ModelConfig | None = None,
    ae: AeModel | None = None,
    jobs: int = 1,
) -> tuple[list[CorrelationResult], CorpusSummary]:
    """Per-ego evaluation of one model configuration across a corpus.

    Ego candidates are all cars. Per-ego failures (short tracks or windows)
    are counted, not fatal. For autoencoder configs with no model supplied,
    one is trained on the corpus safe frames first (deterministic per seed).
    """
    cfg = (cfg or ModelConfig()).with_model(model_id)
    pos_w, ssm_w = parse_model_id(model_id)
    if not any(ego_candidates(s) for s in scenes):
        raise NoEgoCandidates("corpus has no car tracks to evaluate")
    if ssm_w.uses_ae and ae is None:
        ae = train_corpus_ae(list(scenes), ssm_w.ae_variant, cfg)

    tasks = [(i, scene) for i, scene in enumerate(scenes)]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(
                pool.map(
                    _evaluate_scene_task,
                    [(scene, model_id, cfg, ae) for _, scene in tasks],
                )
            )
    else:
        chunks = [_evaluate_scene_task((scene, model_id, cfg, ae)) for _, scene in tasks]

    results: list[CorrelationResult] = []
    n_failed = 0
    for ok, failed in chunks:
        results.extend(ok)
        n_failed += failed
    return results, _summarize(model_id, results, n_failed)


def _evaluate_scene_task(args) -> tuple[list[CorrelationResult], int]:
    scene, model_id, cfg, ae = args
    pos_w, ssm_w = parse_model_id(model_id)
    out: list[CorrelationResult] = []
    failed = 0
    for vid in ego_candidates(scene):
        try:
            series = risk_timeseries(scene, vid, ssm_w, pos_w, ae=ae, cfg=cfg)
            out.append(
                evaluate_ego(series, scene.tracks[vid], cfg, scene_id=scene.recording_id)
            )
        except (TrackTooShort, SeriesTooShort):
            failed += 1
    return out, failed


def compare_configs(
    results: Mapping[str, Iterable[CorrelationResult]], alpha: float = 0.05
) -> list[ConfigComparison]:
    """Ordered pairwise signed-rank comparison of per-ego correlations.

    For each (row, col) pair only egos significant under both configurations
    are paired; the one-sided alternative is that row's correlations are
    shifted above col's. Pairs without enough shared egos are marked 'x'.
    """
    by_config: dict[str, dict[tuple[str, int], CorrelationResult]] = {}
    for config_id, rs in results.items():
        by_config[config_id] = {(r.scene_id, r.ego_id): r for r in rs}
    out: list[ConfigComparison] = []
    for row in by_config:
        for col in by_config:
            if row == col:
                continue
            shared = [
                key
                for key in by_config[row]
                if key in by_config[col]
                and by_config[row][key].significant
                and by_config[col][key].significant
            ]
            diffs = np.array(
                [by_config[row][k].rho - by_config[col][k].rho for k in shared]
            )
            try:
                stat, p = wilcoxon_signed_rank(diffs, alternative="greater")
                verdict = "r" if p < alpha else "n"
            except AllZeroDiffs:
                # identical correlations: a zero-centered distribution, nothing
                # to reject
                stat, p, verdict = 0.0, 1.0, "n"
            except (SeriesTooShort, ZeroVariance):
                stat, p, verdict = float("nan"), float("nan"), "x"
            out.append(
                ConfigComparison(row=row, col=col, statistic=stat, p_value=p, verdict=verdict)
            )
    return out
