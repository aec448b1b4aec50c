from itertools import product

import numpy as np
import pytest

from trafficrisk.errors import (
    AllZeroDiffs,
    NoEgoCandidates,
    SeriesTooShort,
    ZeroVariance,
)
from trafficrisk.stats import (
    CorrelationResult,
    best_lag,
    compare_configs,
    evaluate_corpus,
    evaluate_ego,
    spearman,
    wilcoxon_signed_rank,
)


def _brute_force_spearman(x, y):
    """Independent oracle: explicit average ranks, explicit Pearson."""
    def ranks(v):
        v = np.asarray(v, dtype=float)
        out = np.empty(len(v))
        for i, vi in enumerate(v):
            less = np.sum(v < vi)
            equal = np.sum(v == vi)
            out[i] = less + (equal + 1) / 2.0
        return out

    rx, ry = ranks(x), ranks(y)
    mx, my = rx.mean(), ry.mean()
    num = np.sum((rx - mx) * (ry - my))
    den = np.sqrt(np.sum((rx - mx) ** 2) * np.sum((ry - my) ** 2))
    return num / den


class TestSpearman:
    def test_perfect_monotone(self):
        x = np.arange(10.0)
        rho, p = spearman(x, 3.0 * x + 1.0)
        assert rho == 1.0
        assert p < 0.05

    def test_perfect_decreasing(self):
        x = np.arange(10.0)
        rho, _ = spearman(x, -x)
        assert rho == -1.0

    def test_hand_computed_example(self):
        rho, _ = spearman([1, 2, 3, 4, 5], [1, 3, 2, 5, 4])
        assert rho == pytest.approx(0.8, abs=1e-12)

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            n = int(rng.integers(5, 60))
            x = rng.integers(0, 8, n).astype(float)
            y = rng.integers(0, 8, n).astype(float)
            try:
                rho, _ = spearman(x, y)
            except ZeroVariance:
                continue
            assert rho == pytest.approx(_brute_force_spearman(x, y), abs=1e-12)

    def test_matches_scipy(self):
        from scipy import stats as ss

        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(6, 50))
            x = rng.normal(size=n)
            y = x * 0.5 + rng.normal(size=n)
            rho, p = spearman(x, y)
            rho2, p2 = ss.spearmanr(x, y)
            assert rho == pytest.approx(rho2, abs=1e-12)
            assert p == pytest.approx(p2, abs=1e-9)

    def test_invariant_under_monotone_transforms(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            x = rng.normal(size=40)
            y = rng.normal(size=40)
            rho0, _ = spearman(x, y)
            rho1, _ = spearman(np.exp(x), y)
            rho2, _ = spearman(x, y**3)
            assert rho1 == pytest.approx(rho0, abs=1e-12)
            assert rho2 == pytest.approx(rho0, abs=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            x = rng.normal(size=20)
            y = rng.normal(size=20)
            rho, p = spearman(x, y)
            assert -1.0 <= rho <= 1.0
            assert 0.0 <= p <= 1.0

    def test_errors(self):
        with pytest.raises(SeriesTooShort):
            spearman([1, 2, 3], [1, 2, 3])
        with pytest.raises(ZeroVariance):
            spearman(np.ones(10), np.arange(10.0))


def _enumerated_p(diffs):
    """Full sign-flip enumeration of the one-sided signed-rank p-value."""
    from scipy.stats import rankdata

    d = np.asarray(diffs, dtype=float)
    d = d[d != 0]
    ranks = rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    count = 0
    n = len(d)
    for signs in product((0, 1), repeat=n):
        w = sum(r for s, r in zip(signs, ranks) if s)
        if w >= w_obs - 1e-12:
            count += 1
    return count / 2.0**n


class TestWilcoxon:
    def test_all_positive_n6(self):
        stat, p = wilcoxon_signed_rank([0.5, 1.0, 0.2, 0.9, 0.4, 0.7])
        assert stat == 21.0
        assert p == pytest.approx(1.0 / 64.0, abs=1e-15)

    def test_antisymmetric_not_rejected(self):
        d = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0]
        _, p = wilcoxon_signed_rank(d)
        assert p >= 0.5

    def test_exact_matches_enumeration(self):
        rng = np.random.default_rng(14)
        for n in range(5, 13):
            for _ in range(10):
                d = rng.normal(0.3, 1.0, n)
                stat, p = wilcoxon_signed_rank(d)
                assert p == pytest.approx(_enumerated_p(d), abs=1e-12)

    def test_approx_close_to_exact_above_cutoff(self):
        # independent subset-sum count at sizes just above the exact cutoff
        rng = np.random.default_rng(15)
        for n in (26, 28):
            d = rng.normal(0.2, 1.0, n)
            _, p_approx = wilcoxon_signed_rank(d)
            w_max = n * (n + 1) // 2
            counts = np.zeros(w_max + 1)
            counts[0] = 1.0
            for r in range(1, n + 1):
                counts[r:] += counts[: w_max + 1 - r].copy()
            from scipy.stats import rankdata

            ranks = rankdata(np.abs(d))
            w_obs = int(round(ranks[d > 0].sum()))
            p_exact = counts[w_obs:].sum() / 2.0**n
            assert p_approx == pytest.approx(p_exact, abs=0.01)

    def test_ties_use_corrected_normal(self):
        d = np.array([1.0, 1.0, 1.0, -1.0, 2.0, 2.0, -2.0, 3.0])
        stat, p = wilcoxon_signed_rank(d)
        assert 0.0 <= p <= 1.0

    def test_zero_diffs_dropped(self):
        stat, p = wilcoxon_signed_rank([0.0, 0.5, 1.0, 0.2, 0.9, 0.4, 0.7, 0.0])
        assert stat == 21.0  # identical to the n=6 case after dropping zeros

    def test_errors(self):
        with pytest.raises(AllZeroDiffs):
            wilcoxon_signed_rank([0.0, 0.0, 0.0])
        with pytest.raises(SeriesTooShort):
            wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0])


class TestBestLag:
    def test_exact_shift_recovery(self):
        rng = np.random.default_rng(16)
        fr = 25.0
        K, n = 60, 400
        s = rng.normal(size=n + K)
        a = s[K:]
        for k in range(0, int(2 * fr) + 1):
            b = s[K - k : K - k + n]
            lag, lag_s = best_lag(a, b, fr)
            assert lag == k
            assert lag_s == pytest.approx(k / fr)

    def test_identical_series(self):
        rng = np.random.default_rng(17)
        a = rng.normal(size=200)
        assert best_lag(a, a, 25.0) == (0, 0.0)

    def test_negative_argmax_falls_back_to_zero(self):
        rng = np.random.default_rng(18)
        K, n = 60, 400
        s = rng.normal(size=n + K)
        a = s[:n]
        b = s[3 : 3 + n]  # b leads a: global argmax at -3
        assert best_lag(a, b, 25.0) == (0, 0.0)

    def test_beyond_window_falls_back_to_zero(self):
        rng = np.random.default_rng(19)
        K, n = 80, 400
        s = rng.normal(size=n + K)
        a = s[K:]
        b = s[K - 60 : K - 60 + n]  # 60 frames = 2.4 s > 2 s window
        assert best_lag(a, b, 25.0) == (0, 0.0)

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            best_lag(np.ones(100), np.arange(100.0), 25.0)


class TestEvaluateEgo:
    def _risky_scene(self, delay=0.25):
        from trafficrisk import synth

        spec = synth.cut_in(reaction_delay=delay, frame_rate=20.0)
        return synth.generate(spec)

    def test_recovers_scripted_delay(self):
        from trafficrisk.config import parse_model_id
        from trafficrisk.risk import risk_timeseries

        scene = self._risky_scene()
        pos_w, ssm_w = parse_model_id("2a")
        series = risk_timeseries(scene, 1, ssm_w, pos_w)
        res = evaluate_ego(series, scene.tracks[1])
        assert res.lag_seconds == pytest.approx(0.25, abs=1.0 / 20.0)
        assert res.rho > 0
        assert res.significant

    def test_constant_series_reports_diagnostic(self, layout3):
        from conftest import make_scene, make_track
        from trafficrisk.config import SSM_CONFIGS, POSITIONAL_CONFIGS
        from trafficrisk.risk import risk_timeseries

        scene = make_scene(layout3, [make_track(1, 100, 0, 1.8, 30)])
        series = risk_timeseries(scene, 1, SSM_CONFIGS["a"], POSITIONAL_CONFIGS["2"])
        res = evaluate_ego(series, scene.tracks[1])
        assert not res.significant
        assert res.note == "zero_variance"

    def test_sign_of_acceleration_irrelevant(self):
        from trafficrisk.config import parse_model_id
        from trafficrisk.risk import risk_timeseries
        from trafficrisk.trajectory import VehicleTrack

        scene = self._risky_scene()
        pos_w, ssm_w = parse_model_id("2a")
        series = risk_timeseries(scene, 1, ssm_w, pos_w)
        track = scene.tracks[1]
        flipped = VehicleTrack(
            track.vehicle_id, track.vehicle_class, track.width, track.length,
            track.frame_rate, track.start_frame,
            track.x, track.y, track.vx, track.vy, -track.ax, track.ay,
            track.lane_id, canonical=True,
        )
        a = evaluate_ego(series, track)
        b = evaluate_ego(series, flipped)
        assert a.rho == b.rho and a.lag_frames == b.lag_frames


class TestEvaluateCorpus:
    def test_responsive_corpus_mostly_significant(self):
        from trafficrisk import synth

        scenes = synth.responsive_corpus(10, seed=2)
        results, summary = evaluate_corpus(scenes, "2a")
        assert summary.n_egos == 10
        assert summary.significant_fraction >= 0.8
        assert summary.rho_mean is not None and summary.rho_mean > 0

    def test_constant_corpus_nothing_significant(self):
        from trafficrisk import synth

        scenes = synth.constant_corpus(5, seed=3)
        results, summary = evaluate_corpus(scenes, "2a")
        assert summary.significant_fraction == 0.0
        assert summary.rho_mean is None and summary.rho_std is None

    def test_parallel_jobs_match_serial(self):
        from trafficrisk import synth

        scenes = synth.responsive_corpus(4, seed=4)
        r1, s1 = evaluate_corpus(scenes, "2a", jobs=1)
        r2, s2 = evaluate_corpus(scenes, "2a", jobs=2)
        assert r1 == r2
        assert s1 == s2

    def test_no_candidates(self, layout3):
        from conftest import make_scene, make_track
        from trafficrisk.trajectory import VehicleClass

        scene = make_scene(
            layout3,
            [make_track(1, 100, 0, 1.8, 30, vehicle_class=VehicleClass.TRUCK)],
        )
        with pytest.raises(NoEgoCandidates):
            evaluate_corpus([scene], "2a")


def _result(scene, ego, rho, significant=True):
    return CorrelationResult(
        ego_id=ego,
        lag_frames=0,
        lag_seconds=0.0,
        rho=rho,
        p_value=0.01 if significant else 0.5,
        n=100,
        significant=significant,
        scene_id=scene,
    )


class TestCompareConfigs:
    def test_uniform_dominance(self):
        rng = np.random.default_rng(20)
        base = rng.uniform(0.2, 0.6, 20)
        results = {
            "A": [_result("s", i, r + 0.1) for i, r in enumerate(base)],
            "B": [_result("s", i, r) for i, r in enumerate(base)],
        }
        cells = {(c.row, c.col): c for c in compare_configs(results)}
        assert cells[("A", "B")].verdict == "r"
        assert cells[("B", "A")].verdict == "n"

    def test_identical_lists_not_rejected_either_way(self):
        rng = np.random.default_rng(21)
        base = rng.uniform(0.2, 0.6, 12)
        results = {
            "A": [_result("s", i, r) for i, r in enumerate(base)],
            "B": [_result("s", i, r) for i, r in enumerate(base)],
        }
        cells = {(c.row, c.col): c for c in compare_configs(results)}
        assert cells[("A", "B")].verdict == "n"
        assert cells[("B", "A")].verdict == "n"

    def test_only_joint_significant_egos_pair(self):
        base = list(np.linspace(0.2, 0.6, 10))
        a = [_result("s", i, r + 0.2, significant=True) for i, r in enumerate(base)]
        b = [_result("s", i, r, significant=i < 4) for i, r in enumerate(base)]
        cells = {
            (c.row, c.col): c for c in compare_configs({"A": a, "B": b})
        }
        # only 4 shared significant egos: below the minimum, not comparable
        assert cells[("A", "B")].verdict == "x"

    def test_verdicts_match_enumeration_oracle(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            n = int(rng.integers(6, 12))
            base = rng.uniform(0.1, 0.7, n)
            shift = rng.normal(0.03, 0.05, n)
            results = {
                "A": [_result("s", i, r + d) for i, (r, d) in enumerate(zip(base, shift))],
                "B": [_result("s", i, r) for i, r in enumerate(base)],
            }
            cells = {(c.row, c.col): c for c in compare_configs(results)}
            p = _enumerated_p(shift)
            assert cells[("A", "B")].verdict == ("r" if p < 0.05 else "n")
            assert cells[("A", "B")].p_value == pytest.approx(p, abs=1e-12)
