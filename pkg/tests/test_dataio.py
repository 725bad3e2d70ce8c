import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partialmic.dataio import (
    Dataset, DatasetError, Example, encode_label, generate_synthetic, load_dataset,
    make_batches, save_dataset, split_train_val,
)


class TestPortableFormat:
    def test_round_trip(self, tiny_dataset, tiny_dataset_dir):
        ds = load_dataset(tiny_dataset_dir)
        assert len(ds) == 3 and ds.num_classes == 2
        assert ds.class_names == ("guitar", "piano")
        for a, b in zip(ds.examples, tiny_dataset.examples):
            assert a.features.tobytes() == b.features.tobytes()
            np.testing.assert_array_equal(a.labels, b.labels)
            assert a.split == b.split

    def test_reserialize_is_byte_identical(self, tiny_dataset_dir, tmp_path):
        ds = load_dataset(tiny_dataset_dir)
        save_dataset(ds, tmp_path / "again")
        for name in ("meta.json", "features.f32", "labels.csv", "split.csv"):
            assert (tmp_path / "again" / name).read_bytes() == (tiny_dataset_dir / name).read_bytes()

    def test_absent_label_row_is_unknown(self, tiny_dataset_dir):
        text = (tiny_dataset_dir / "labels.csv").read_text()
        assert "0,1," not in text  # clip 0, class 1 was stored as unknown
        assert load_dataset(tiny_dataset_dir).examples[0].labels[1] == 0

    def test_little_endian_layout(self, tiny_dataset, tiny_dataset_dir):
        raw = (tiny_dataset_dir / "features.f32").read_bytes()
        first = np.frombuffer(raw[:4], dtype="<f4")[0]
        assert first == tiny_dataset.examples[0].features[0, 0]

    def test_byte_length_mismatch(self, tiny_dataset_dir):
        path = tiny_dataset_dir / "features.f32"
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(DatasetError, match="expected N\\*T\\*D\\*4"):
            load_dataset(tiny_dataset_dir)

    @pytest.mark.parametrize("name", ["meta.json", "features.f32", "labels.csv", "split.csv"])
    def test_missing_file(self, tiny_dataset_dir, name):
        (tiny_dataset_dir / name).unlink()
        with pytest.raises(DatasetError, match=name):
            load_dataset(tiny_dataset_dir)

    def test_non_finite_feature(self, tiny_dataset_dir):
        path = tiny_dataset_dir / "features.f32"
        arr = np.frombuffer(path.read_bytes(), dtype="<f4").copy()
        arr[7] = np.nan
        path.write_bytes(arr.tobytes())
        with pytest.raises(DatasetError, match="non-finite"):
            load_dataset(tiny_dataset_dir)

    @pytest.mark.parametrize("value", ["0", "2", "-2"])
    def test_label_value_outside_range(self, tiny_dataset_dir, value):
        with open(tiny_dataset_dir / "labels.csv", "a") as f:
            f.write(f"2,0,{value}\n")
        with pytest.raises(DatasetError):
            load_dataset(tiny_dataset_dir)

    def test_meta_mismatch(self, tiny_dataset_dir):
        meta = json.loads((tiny_dataset_dir / "meta.json").read_text())
        meta["feature_dim"] = 5
        (tiny_dataset_dir / "meta.json").write_text(json.dumps(meta))
        with pytest.raises(DatasetError):
            load_dataset(tiny_dataset_dir)

    def test_split_views(self, tiny_dataset_dir):
        ds = load_dataset(tiny_dataset_dir)
        assert [ex.clip_id for ex in ds.split("train").examples] == ["0", "1"]
        assert [ex.clip_id for ex in ds.split("test").examples] == ["2"]


class TestDatasetInvariants:
    def test_rejects_bad_label(self):
        ex = Example("a", np.zeros((2, 3)), np.array([2, 0]))
        with pytest.raises(DatasetError):
            Dataset([ex], ("x", "y"), 3, 2)

    def test_rejects_duplicate_ids(self):
        ex = Example("a", np.zeros((2, 3)), np.array([1, 0]))
        with pytest.raises(DatasetError, match="duplicate"):
            Dataset([ex, ex], ("x", "y"), 3, 2)

    def test_rejects_wrong_label_length(self):
        ex = Example("a", np.zeros((2, 3)), np.array([1, 0, 1]))
        with pytest.raises(DatasetError):
            Dataset([ex], ("x", "y"), 3, 2)


class TestEncodeLabel:
    @pytest.mark.parametrize("rel, obs, expected", [
        (0.9, True, 1), (0.1, True, -1), (0.9, False, 0), (0.5, True, 1), (0.0, False, 0),
    ])
    def test_table(self, rel, obs, expected):
        assert encode_label(rel, obs, 0.5) == expected

    @pytest.mark.parametrize("rel", [-0.1, 1.5])
    def test_relevance_range(self, rel):
        with pytest.raises(ValueError):
            encode_label(rel, True)


class TestSplit:
    def test_sizes(self):
        ds = generate_synthetic(100, 2, 3, 2, seed=0)
        fit, val = split_train_val(ds, 0.15, seed=1)
        assert (len(fit), len(val)) == (85, 15)
        ids = {ex.clip_id for ex in fit.examples}
        assert ids.isdisjoint(ex.clip_id for ex in val.examples)
        assert len(ids | {ex.clip_id for ex in val.examples}) == 100

    def test_deterministic(self):
        ds = generate_synthetic(50, 2, 3, 2, seed=0)
        a = split_train_val(ds, 0.15, seed=4)
        b = split_train_val(ds, 0.15, seed=4)
        assert [e.clip_id for e in a[1].examples] == [e.clip_id for e in b[1].examples]

    def test_empty_validation(self):
        ds = generate_synthetic(2, 2, 3, 2, seed=0)
        with pytest.raises(DatasetError, match="empty"):
            split_train_val(ds, 0.15, seed=0)


class TestBatches:
    def test_sizes(self):
        ds = generate_synthetic(70, 2, 3, 2, seed=0)
        assert [len(b) for b in make_batches(ds, 32)] == [32, 32, 6]

    def test_unshuffled_order(self):
        ds = generate_synthetic(10, 2, 3, 2, seed=0)
        ids = [ex.clip_id for b in make_batches(ds, 4) for ex in b.examples]
        assert ids == [str(i) for i in range(10)]

    def test_shuffle_deterministic(self):
        ds = generate_synthetic(40, 2, 3, 2, seed=0)
        a = [[e.clip_id for e in b.examples] for b in make_batches(ds, 8, True, 5)]
        b = [[e.clip_id for e in b.examples] for b in make_batches(ds, 8, True, 5)]
        assert a == b
        assert a != [[e.clip_id for e in b.examples] for b in make_batches(ds, 8, True, 6)]

    @given(n=st.integers(1, 80), size=st.integers(1, 40), seed=st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_partition(self, n, size, seed):
        ds = generate_synthetic(n, 1, 2, 1, seed=0)
        batches = make_batches(ds, size, shuffle=True, seed=seed)
        ids = [e.clip_id for b in batches for e in b.examples]
        assert sorted(ids) == sorted(e.clip_id for e in ds.examples)
        assert all(1 <= len(b) <= size for b in batches)

    def test_groups_by_length(self):
        ex = [Example(str(i), np.zeros((3 if i % 2 else 5, 2)), np.array([1])) for i in range(6)]
        ds = Dataset(ex, ("c",), 2, 5)
        for b in make_batches(ds, 4):
            assert len({e.timesteps for e in b.examples}) == 1


class TestSynthetic:
    def test_no_unknowns_without_mask(self):
        ds = generate_synthetic(200, 4, 6, 8, mask_rate=0.0, seed=2)
        assert not np.any(ds.labels() == 0)

    def test_mask_rate_fraction(self):
        ds = generate_synthetic(1000, 5, 4, 4, mask_rate=0.5, seed=3)
        frac = np.mean(ds.labels() == 0)
        assert abs(frac - 0.5) <= 0.05

    def test_deterministic_bytes(self, tmp_path):
        for d in ("a", "b"):
            save_dataset(generate_synthetic(30, 3, 5, 4, mask_rate=0.4, seed=9), tmp_path / d)
        for name in ("meta.json", "features.f32", "labels.csv", "split.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_planted_signature(self):
        ds = generate_synthetic(100, 3, 8, 6, noise_scale=0.0, seed=4)
        rng = np.random.default_rng(4)
        sig = rng.standard_normal((3, 6))
        sig /= np.linalg.norm(sig, axis=1, keepdims=True)
        for ex in ds.examples:
            for c in np.flatnonzero(ex.labels == 1):
                hits = np.sum(np.all(np.isclose(ex.features, sig[c], atol=1e-6), axis=1))
                assert hits >= 2

    def test_label_round_trip_through_format(self, tmp_path):
        ds = generate_synthetic(50, 4, 3, 2, mask_rate=0.0, seed=1)
        save_dataset(ds, tmp_path / "d")
        np.testing.assert_array_equal(load_dataset(tmp_path / "d").labels(), ds.labels())

    def test_test_fraction(self):
        ds = generate_synthetic(50, 2, 3, 2, seed=1, test_fraction=0.2)
        assert len(ds.split("test")) == 10 and len(ds.split("train")) == 40
