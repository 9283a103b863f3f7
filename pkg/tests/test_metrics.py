import numpy as np
import pytest

from recwhiten.data import DataError, ScoredTrial, ScoreSet
from recwhiten.metrics import (DEFAULT_OPERATING_POINTS, OperatingPoint,
                               compute_act_dcf, compute_eer, compute_min_dcf,
                               evaluate, fuse, snorm)


def make_scores(targets, nontargets):
    trials = [ScoredTrial(f"m{i}", f"tt{i}", float(s), "target")
              for i, s in enumerate(targets)]
    trials += [ScoredTrial(f"m{i}", f"tn{i}", float(s), "nontarget")
               for i, s in enumerate(nontargets)]
    return ScoreSet(trials)


def sweep_rates(targets, nontargets, thr):
    """O(n^2) exhaustive oracle for P_miss / P_fa at a threshold."""
    p_miss = sum(1 for s in targets if s < thr) / len(targets)
    p_fa = sum(1 for s in nontargets if s >= thr) / len(nontargets)
    return p_miss, p_fa


def oracle_eer(targets, nontargets):
    thresholds = sorted(set(targets) | set(nontargets))
    thresholds.append(thresholds[-1] + 1.0)
    prev = None
    for thr in thresholds:
        p_miss, p_fa = sweep_rates(targets, nontargets, thr)
        d = p_miss - p_fa
        if d == 0:
            return p_miss
        if d > 0:
            pm0, pf0 = prev
            d0 = pm0 - pf0
            t = -d0 / (d - d0)
            return pm0 + t * (p_miss - pm0)
        prev = (p_miss, p_fa)
    raise AssertionError("no crossing found")


def oracle_min_dcf(targets, nontargets, op):
    thresholds = sorted(set(targets) | set(nontargets))
    thresholds = [thresholds[0] - 1.0] + thresholds + [thresholds[-1] + 1.0]
    best = np.inf
    for thr in thresholds:
        p_miss, p_fa = sweep_rates(targets, nontargets, thr)
        cost = op.c_miss * op.p_target * p_miss + op.c_fa * (1 - op.p_target) * p_fa
        best = min(best, cost / op.normalizer)
    return best


class TestEer:
    def test_perfect_separation(self):
        assert compute_eer(make_scores([2, 3], [0, 1])) == 0.0

    def test_perfect_inversion(self):
        assert compute_eer(make_scores([1], [2])) == 1.0

    def test_interleaved_half(self):
        assert compute_eer(make_scores([3, 1], [2, 0])) == 0.5

    def test_missing_class(self):
        with pytest.raises(DataError):
            compute_eer(make_scores([1], []))

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(40)
        for _ in range(50):
            nt = int(rng.integers(1, 30))
            nn = int(rng.integers(1, 30))
            # coarse grid provokes ties between and within classes
            tar = list(rng.integers(0, 10, size=nt).astype(float))
            non = list(rng.integers(0, 10, size=nn).astype(float))
            got = compute_eer(make_scores(tar, non))
            assert got == pytest.approx(oracle_eer(tar, non), abs=1e-12)


class TestMinDcf:
    OP = OperatingPoint(p_target=0.01, name="op")

    def test_perfect_separation(self):
        assert compute_min_dcf(make_scores([2, 3], [0, 1]), self.OP) == 0.0

    def test_uninformative_scores_hit_ceiling(self):
        assert compute_min_dcf(make_scores([1, 1], [1, 1]), self.OP) == pytest.approx(1.0)

    def test_interleaved_matches_sweep(self):
        tar, non = [3.0, 1.0], [2.0, 0.0]
        got = compute_min_dcf(make_scores(tar, non), self.OP)
        assert got == pytest.approx(oracle_min_dcf(tar, non, self.OP), abs=1e-15)

    def test_never_exceeds_do_nothing_cost(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            tar = list(rng.normal(size=int(rng.integers(1, 40))))
            non = list(rng.normal(size=int(rng.integers(1, 40))))
            for op in DEFAULT_OPERATING_POINTS:
                assert compute_min_dcf(make_scores(tar, non), op) <= 1.0 + 1e-12

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            tar = list(rng.integers(0, 8, size=int(rng.integers(1, 25))).astype(float))
            non = list(rng.integers(0, 8, size=int(rng.integers(1, 25))).astype(float))
            for op in DEFAULT_OPERATING_POINTS:
                got = compute_min_dcf(make_scores(tar, non), op)
                assert got == pytest.approx(oracle_min_dcf(tar, non, op), abs=1e-12)


class TestActDcf:
    def test_default_threshold_closed_form(self):
        op = OperatingPoint(p_target=0.01)
        assert op.bayes_threshold == pytest.approx(np.log(99.0), abs=1e-12)
        assert op.bayes_threshold == pytest.approx(4.59511985, abs=1e-8)

    def test_perfectly_calibrated_separation(self):
        op = OperatingPoint(p_target=0.01, name="op")
        sset = make_scores([5.0, 6.0], [1.0, 2.0])
        assert compute_act_dcf(sset, op) == 0.0

    def test_act_at_least_min(self):
        rng = np.random.default_rng(43)
        for _ in range(50):
            tar = list(rng.normal(size=int(rng.integers(1, 30))))
            non = list(rng.normal(size=int(rng.integers(1, 30))))
            sset = make_scores(tar, non)
            for op in DEFAULT_OPERATING_POINTS:
                assert compute_act_dcf(sset, op) >= compute_min_dcf(sset, op) - 1e-12


class TestRankInvariance:
    def test_monotone_maps_leave_metrics_unchanged(self):
        rng = np.random.default_rng(44)
        tar = list(rng.normal(size=30))
        non = list(rng.normal(size=50))
        base = make_scores(tar, non)
        eer0 = compute_eer(base)
        dcf0 = [compute_min_dcf(base, op) for op in DEFAULT_OPERATING_POINTS]

        for f in (lambda s: 3.0 * s + 2.0, lambda s: s ** 3):
            mapped = make_scores([f(s) for s in tar], [f(s) for s in non])
            assert compute_eer(mapped) == eer0
            for op, d0 in zip(DEFAULT_OPERATING_POINTS, dcf0):
                assert compute_min_dcf(mapped, op) == d0
                # fixed-threshold actDCF stays rank-invariant when the
                # threshold is mapped along with the scores
                thr = op.bayes_threshold
                assert compute_act_dcf(mapped, op, f(thr)) == compute_act_dcf(base, op, thr)


class TestEvaluate:
    def test_perfect_separation_report(self):
        r = evaluate(make_scores([2, 3], [0, 1]))
        assert r.eer == 0.0
        assert all(v == 0.0 for v in r.min_dcf.values())
        assert r.c_primary == 0.0
        assert (r.n_target, r.n_nontarget) == (2, 2)

    def test_uninformative_scores(self):
        r = evaluate(make_scores([0, 0, 0], [0, 0]))
        assert r.c_primary == pytest.approx(1.0)

    def test_c_primary_is_mean_of_min_dcfs(self):
        rng = np.random.default_rng(45)
        tar = list(rng.normal(loc=1.0, size=100))
        non = list(rng.normal(size=100))
        sset = make_scores(tar, non)
        r = evaluate(sset)
        expect = np.mean([compute_min_dcf(sset, op) for op in DEFAULT_OPERATING_POINTS])
        assert r.c_primary == pytest.approx(expect, abs=1e-15)

    def test_render_format(self):
        r = evaluate(make_scores([2, 3], [0, 1]))
        lines = r.render().strip().split("\n")
        keys = [ln.split("\t")[0] for ln in lines]
        assert keys == ["eer", "min_dcf16_1", "min_dcf16_2", "act_dcf16_1",
                        "act_dcf16_2", "c_primary", "n_target", "n_nontarget"]
        assert lines[0] == "eer\t0.000000"


class TestSnorm:
    def cohorts(self, sset, e, t):
        enroll = {s.enroll_model_id: np.asarray(e, dtype=float) for s in sset.scores}
        test = {s.test_id: np.asarray(t, dtype=float) for s in sset.scores}
        return enroll, test

    def test_standardized_cohorts_identity(self):
        sset = make_scores([1.5], [0.5])
        # cohort with mean 0, population std 1
        e, t = self.cohorts(sset, [-1.0, 1.0], [-1.0, 1.0])
        out = snorm(sset, e, t)
        for s_in, s_out in zip(sset.scores, out.scores):
            assert s_out.score == pytest.approx(s_in.score)

    def test_hand_computed(self):
        sset = ScoreSet([ScoredTrial("m", "t", 4.0, "target")])
        out = snorm(sset, {"m": np.array([0.0, 2.0])}, {"t": np.array([2.0, 6.0])})
        assert out.scores[0].score == pytest.approx(1.5)

    def test_symmetric_in_cohort_swap(self):
        sset = ScoreSet([ScoredTrial("m", "t", 4.0, "target")])
        a, b = np.array([0.0, 2.0]), np.array([2.0, 6.0])
        s1 = snorm(sset, {"m": a}, {"t": b}).scores[0].score
        s2 = snorm(sset, {"m": b}, {"t": a}).scores[0].score
        assert s1 == pytest.approx(s2)

    def test_preserves_keys_and_labels(self):
        sset = make_scores([1, 2], [3])
        e, t = self.cohorts(sset, [0.0, 1.0], [0.5, 2.0])
        out = snorm(sset, e, t)
        assert [(s.enroll_model_id, s.test_id, s.label) for s in out.scores] == \
               [(s.enroll_model_id, s.test_id, s.label) for s in sset.scores]

    def test_missing_cohort(self):
        sset = ScoreSet([ScoredTrial("m", "t", 4.0, "target")])
        with pytest.raises(DataError, match="missing enroll cohort"):
            snorm(sset, {}, {"t": np.array([1.0, 2.0])})

    def test_zero_deviation_cohort(self):
        sset = ScoreSet([ScoredTrial("m", "t", 4.0, "target")])
        with pytest.raises(DataError, match="zero cohort deviation"):
            snorm(sset, {"m": np.array([1.0, 1.0])}, {"t": np.array([1.0, 2.0])})


class TestFuse:
    def test_single_set_identity(self):
        sset = make_scores([1, 2], [3])
        out = fuse([sset], [1.0])
        assert [s.score for s in out.scores] == [s.score for s in sset.scores]

    def test_equal_weights_of_identical_sets(self):
        sset = make_scores([1, 2], [3])
        out = fuse([sset, sset], [0.5, 0.5])
        assert [s.score for s in out.scores] == [s.score for s in sset.scores]

    def test_weighted_sum(self):
        a = ScoreSet([ScoredTrial("m", "t1", 1.0, "target"),
                      ScoredTrial("m", "t2", 3.0, "nontarget")])
        b = ScoreSet([ScoredTrial("m", "t1", 2.0, "target"),
                      ScoredTrial("m", "t2", 0.0, "nontarget")])
        out = fuse([a, b], [0.25, 0.75])
        assert [s.score for s in out.scores] == [1.75, 0.75]

    def test_key_mismatch(self):
        a = ScoreSet([ScoredTrial("m", "t1", 1.0, "target")])
        b = ScoreSet([ScoredTrial("m", "t2", 1.0, "target")])
        with pytest.raises(DataError, match="trial key mismatch"):
            fuse([a, b], [0.5, 0.5])
