import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partialmic.augment import AugmentConfig, SoftExample, augment_batch, concat_augment, \
    label_or, mixup, sample_mixup_weight
from partialmic.dataio import Batch, Example
from partialmic.losses import map_labels_to_targets

VALUES = (-1, 0, 1)


def kleene_or(a, b):
    """Reference OR with -1 < 0 < +1: the maximum of the two truth values."""
    return max(a, b)


def example(clip_id, labels, T=4, D=3, seed=0):
    rng = np.random.default_rng(seed)
    return Example(clip_id, rng.standard_normal((T, D)).astype(np.float32),
                   np.asarray(labels, dtype=np.int8))


class TestLabelOr:
    def test_truth_table(self):
        for a, b in itertools.product(VALUES, repeat=2):
            assert label_or(a, b) == kleene_or(a, b), (a, b)

    def test_27_cases_three_operands(self):
        for a, b, c in itertools.product(VALUES, repeat=3):
            expected = kleene_or(kleene_or(a, b), c)
            assert label_or(label_or(a, b), c) == expected
            assert label_or(a, label_or(b, c)) == expected

    def test_commutative_and_idempotent(self):
        for a, b in itertools.product(VALUES, repeat=2):
            assert label_or(a, b) == label_or(b, a)
        for a in VALUES:
            assert label_or(a, a) == a

    def test_monotone(self):
        for a, b, c in itertools.product(VALUES, repeat=3):
            if a <= b:
                assert label_or(a, c) <= label_or(b, c)

    def test_vectorized(self):
        a = np.array([1, 0, -1, -1, 0], dtype=np.int8)
        b = np.array([-1, -1, -1, 0, 0], dtype=np.int8)
        out = label_or(a, b)
        np.testing.assert_array_equal(out, [1, 0, -1, 0, 0])
        assert out.dtype == np.int8


class TestMixup:
    a = example("a", [1, -1, 0, 1], seed=1)
    b = example("b", [-1, 0, 1, 1], seed=2)

    def test_endpoints(self):
        for lam, src in ((1.0, self.a), (0.0, self.b)):
            out = mixup(self.a, self.b, lam)
            assert out.features.tobytes() == src.features.astype(np.float64).tobytes()
            tm = map_labels_to_targets(src.labels)
            assert out.targets.targets.tobytes() == tm.targets.tobytes()
        np.testing.assert_array_equal(mixup(self.a, self.b, 1.0).targets.mask, [1, 0, 0, 1])

    @given(lam=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
    @settings(max_examples=200, deadline=None)
    def test_symmetry_bit_exact(self, lam, seed):
        a = example("a", [1, -1, 0], seed=seed)
        b = example("b", [0, 1, -1], seed=seed + 1)
        ab = mixup(a, b, lam)
        ba = mixup(b, a, 1.0 - lam)
        assert ab.features.tobytes() == ba.features.tobytes()
        assert ab.targets.targets.tobytes() == ba.targets.targets.tobytes()
        assert ab.targets.mask.tobytes() == ba.targets.mask.tobytes()

    @given(lam=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, lam, seed):
        a = example("a", [1, -1, 0, 1], seed=seed)
        b = example("b", [-1, 1, 1, 0], seed=seed + 7)
        out = mixup(a, b, lam)
        lo = np.minimum(a.features, b.features)
        hi = np.maximum(a.features, b.features)
        assert ((lo <= out.features) & (out.features <= hi)).all()
        t = out.targets.targets
        assert ((0.0 <= t) & (t <= 1.0)).all()
        ma = map_labels_to_targets(a.labels).mask
        mb = map_labels_to_targets(b.labels).mask
        np.testing.assert_array_equal(out.targets.mask, np.minimum(ma, mb))

    def test_half(self):
        out = mixup(self.a, self.b, 0.5)
        np.testing.assert_allclose(out.targets.targets, [0.5, 0.0, 0.5, 1.0])
        np.testing.assert_array_equal(out.targets.mask, [1, 0, 0, 1])

    def test_chained_soft_inputs(self):
        ab = mixup(self.a, self.b, 0.25)
        out = mixup(ab, self.a, 1.0)
        assert out.targets.targets.tobytes() == ab.targets.targets.tobytes()

    def test_errors(self):
        with pytest.raises(ValueError, match="shapes"):
            mixup(self.a, example("c", [1, 1, 1, 1], T=5), 0.5)
        with pytest.raises(ValueError, match="weight"):
            mixup(self.a, self.b, 1.5)


class TestConcat:
    def test_stacks_in_order(self):
        a = example("a", [1, -1, -1, 0], T=3, seed=1)
        b = example("b", [-1, -1, 0, 0], T=5, seed=2)
        out = concat_augment(a, b)
        assert out.clip_id == "a+b" and out.timesteps == 8
        np.testing.assert_array_equal(out.features[:3], a.features)
        np.testing.assert_array_equal(out.features[3:], b.features)
        np.testing.assert_array_equal(out.labels, [1, -1, 0, 0])

    def test_feature_dim_mismatch(self):
        with pytest.raises(ValueError, match="feature dims"):
            concat_augment(example("a", [1], D=3), example("b", [1], D=4))


class TestAugmentBatch:
    batch = Batch(tuple(example(f"c{i}", [1, -1, 0], seed=i) for i in range(6)))

    def test_identity_policy(self):
        out = augment_batch(self.batch, AugmentConfig(0.2, 0.0, 0.0), np.random.default_rng(0))
        assert len(out) == 1
        np.testing.assert_array_equal(out[0].features, self.batch.features())
        np.testing.assert_array_equal(out[0].targets, np.tile([1.0, 0.0, 0.0], (6, 1)))
        np.testing.assert_array_equal(out[0].mask, np.tile([1.0, 1.0, 0.0], (6, 1)))

    def test_always_concat(self):
        out = augment_batch(self.batch, AugmentConfig(0.2, 0.0, 1.0), np.random.default_rng(1))
        assert [sb.features.shape for sb in out] == [(6, 8, 3)]
        for k in range(6):
            # the first half is always the item's own clip
            np.testing.assert_array_equal(out[0].features[k, :4], self.batch.examples[k].features)

    def test_mixed_lengths_sorted(self):
        cfg = AugmentConfig(0.2, 1.0, 0.5)
        out = augment_batch(self.batch, cfg, np.random.default_rng(3))
        lengths = [sb.features.shape[1] for sb in out]
        assert lengths == sorted(lengths) and set(lengths) <= {4, 8}
        assert sum(len(sb) for sb in out) == 6

    def test_deterministic(self):
        cfg = AugmentConfig()
        a = augment_batch(self.batch, cfg, np.random.default_rng(5))
        b = augment_batch(self.batch, cfg, np.random.default_rng(5))
        for x, y in zip(a, b):
            assert x.features.tobytes() == y.features.tobytes()
            assert x.targets.tobytes() == y.targets.tobytes()

    def test_single_item_batch(self):
        batch = Batch((self.batch.examples[0],))
        out = augment_batch(batch, AugmentConfig(0.2, 1.0, 1.0), np.random.default_rng(0))
        assert out[0].features.shape == (1, 8, 3)

    @pytest.mark.parametrize("kwargs", [{"beta_alpha": 0.0}, {"mixup_prob": 1.5},
                                        {"concat_prob": -0.1}])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            AugmentConfig(**kwargs)


class TestBetaSampler:
    def test_moments(self):
        rng = np.random.default_rng(0)
        draws = np.array([sample_mixup_weight(0.2, rng) for _ in range(100_000)])
        assert abs(draws.mean() - 0.5) <= 0.02
        # Beta(a, a) variance is 1 / (4 (2a + 1)) = 0.17857142857142858 at a = 0.2
        assert abs(draws.var() - 0.17857142857142858) <= 0.02
        assert ((0 <= draws) & (draws <= 1)).all()

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            sample_mixup_weight(0.0, np.random.default_rng(0))
