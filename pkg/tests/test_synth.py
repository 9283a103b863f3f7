import numpy as np
import pytest

from recwhiten.stats import cholesky_lower
from recwhiten.synth import (SubCorpusSpec, SynthConfig, generate_world,
                             make_rng, normals, random_spd)


def small_config(**kw):
    cfg = SynthConfig(
        dim=kw.pop("dim", 8),
        seed=kw.pop("seed", 0),
        ood_subcorpora=kw.pop("ood_subcorpora", [
            SubCorpusSpec("ood_a", 20, 4, 0.0),
            SubCorpusSpec("ood_b", 20, 4, 3.0),
        ]),
        n_enroll_speakers=kw.pop("n_enroll_speakers", 8),
        n_unlabeled=kw.pop("n_unlabeled", 30),
        **kw,
    )
    return cfg


class TestNormals:
    def test_moments(self):
        z = normals(make_rng(0), (200000,))
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01

    def test_deterministic(self):
        a = normals(make_rng(123), (50,))
        b = normals(make_rng(123), (50,))
        np.testing.assert_array_equal(a, b)

    def test_odd_shapes(self):
        assert normals(make_rng(1), (3, 5)).shape == (3, 5)
        assert normals(make_rng(1), (7,)).shape == (7,)


class TestRandomSpd:
    def test_condition_one_is_identity(self):
        np.testing.assert_array_equal(random_spd(5, 1.0, 3), np.eye(5))

    def test_eigenvalues_log_spaced(self):
        m = random_spd(2, 4.0, 9)
        vals = np.sort(np.linalg.eigvalsh(m))
        np.testing.assert_allclose(vals, [0.5, 2.0], rtol=1e-10)

    def test_exact_condition_number(self):
        for d, k, seed in ((3, 10.0, 0), (8, 100.0, 1), (16, 2.5, 2)):
            vals = np.linalg.eigvalsh(random_spd(d, k, seed))
            assert vals.max() / vals.min() == pytest.approx(k, rel=1e-10)

    def test_always_spd(self):
        rng = np.random.default_rng(50)
        for _ in range(100):
            d = int(rng.integers(2, 12))
            k = float(rng.uniform(1.0, 1e4))
            cholesky_lower(random_spd(d, k, int(rng.integers(1 << 31))))

    def test_bad_condition_rejected(self):
        with pytest.raises(ValueError):
            random_spd(3, 0.5, 0)


class TestGenerateWorld:
    def test_determinism(self):
        cfg = small_config(seed=4)
        w1 = generate_world(cfg)
        w2 = generate_world(small_config(seed=4))
        np.testing.assert_array_equal(w1.ood_labeled.matrix(), w2.ood_labeled.matrix())
        np.testing.assert_array_equal(w1.enroll.matrix(), w2.enroll.matrix())
        np.testing.assert_array_equal(w1.test.matrix(), w2.test.matrix())
        assert w1.trials == w2.trials

    def test_seed_changes_output(self):
        w1 = generate_world(small_config(seed=1))
        w2 = generate_world(small_config(seed=2))
        assert not np.array_equal(w1.enroll.matrix(), w2.enroll.matrix())

    def test_counts(self):
        cfg = small_config(n_unlabeled=100)
        w = generate_world(cfg)
        assert len(w.indomain_unlabeled) == 100
        assert len(w.ood_labeled) == 2 * 20 * 4
        assert len(w.enroll) == 8 * cfg.enroll_sessions
        assert len(w.test) == 8 * cfg.test_sessions
        assert len(w.trials) == 8 * len(w.test)

    def test_labels_match_generating_speakers(self):
        w = generate_world(small_config(seed=6))
        test_by_id = w.test.by_id()
        for t in w.trials.trials:
            same = test_by_id[t.test_id].speaker_id == t.enroll_model_id
            assert t.label == ("target" if same else "nontarget")

    def test_subcorpus_covariance_matches_generator(self):
        cfg = small_config(
            dim=6, seed=7,
            ood_subcorpora=[SubCorpusSpec("big", 625, 8, 0.0)],
            across_var=1.3, within_var=0.7,
        )
        w = generate_world(cfg)
        x = w.ood_labeled.matrix()
        emp = np.cov(x.T)
        expected = (1.3 + 0.7) * w.ground_truth["big"].cov
        assert np.linalg.norm(emp - expected) / np.linalg.norm(expected) < 0.1

    def test_no_mismatch_control_moments_converge(self):
        cfg = small_config(
            dim=5, seed=8,
            ood_subcorpora=[SubCorpusSpec("ood", 400, 4, 0.0)],
            n_unlabeled=1600,
            language_shift=0.0, cov_scale=1.0,
        )
        w = generate_world(cfg)
        ood = w.ood_labeled.matrix()
        ind = w.indomain_unlabeled.matrix()
        assert np.abs(ood.mean(axis=0) - ind.mean(axis=0)).max() < 0.3
        assert np.linalg.norm(np.cov(ood.T) - np.cov(ind.T)) / \
            np.linalg.norm(np.cov(ood.T)) < 0.2

    def test_invalid_config_rejected(self):
        cfg = small_config()
        cfg.cov_scale = -1.0
        with pytest.raises(ValueError):
            generate_world(cfg)
        cfg = small_config(ood_subcorpora=[SubCorpusSpec("a", 5, 2, 0.0),
                                           SubCorpusSpec("a", 5, 2, 0.0)])
        with pytest.raises(ValueError, match="duplicate"):
            generate_world(cfg)
