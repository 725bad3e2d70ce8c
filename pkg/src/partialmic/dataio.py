"""Dataset format, three-valued labels, splitting and batching.

On-disk layout of a dataset directory::

    meta.json      {"num_clips": N, "timesteps": T, "feature_dim": D, "class_names": [...]}
    features.f32   little-endian float32, row-major [clip][timestep][dim]
    labels.csv     clip_index,class_index,value   (value in {-1, 1}; absent pair = unknown)
    split.csv      clip_index,split               (split in {train, test})

Labels use -1 for absent, +1 for present and 0 for unknown.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SPLITS = ("train", "test")


class DatasetError(ValueError):
    """Raised when a dataset directory or in-memory dataset is malformed."""


@dataclass(frozen=True)
class Example:
    clip_id: str
    features: np.ndarray  # (T, D)
    labels: np.ndarray  # (C,) int8 in {-1, 0, 1}
    split: str = "train"

    @property
    def timesteps(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Dataset:
    examples: tuple[Example, ...]
    class_names: tuple[str, ...]
    feature_dim: int
    base_timesteps: int

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        validate_dataset(self)

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def features(self) -> np.ndarray:
        """Stacked (N, T, D) feature array; requires equal T."""
        return np.stack([ex.features for ex in self.examples])

    def labels(self) -> np.ndarray:
        if not self.examples:
            return np.zeros((0, self.num_classes), dtype=np.int8)
        return np.stack([ex.labels for ex in self.examples])

    def subset(self, indices) -> "Dataset":
        return Dataset(
            examples=tuple(self.examples[i] for i in indices),
            class_names=self.class_names,
            feature_dim=self.feature_dim,
            base_timesteps=self.base_timesteps,
        )

    def split(self, name: str) -> "Dataset":
        """Examples assigned to split ``name`` ("train" or "test")."""
        if name not in SPLITS:
            raise DatasetError(f"unknown split {name!r}")
        return self.subset([i for i, ex in enumerate(self.examples) if ex.split == name])


def validate_dataset(ds: Dataset) -> None:
    C = len(ds.class_names)
    seen = set()
    for ex in ds.examples:
        if ex.clip_id in seen:
            raise DatasetError(f"duplicate clip id {ex.clip_id!r}")
        seen.add(ex.clip_id)
        if ex.features.ndim != 2 or ex.features.shape[1] != ds.feature_dim:
            raise DatasetError(
                f"clip {ex.clip_id!r}: features shape {ex.features.shape}, "
                f"expected (T, {ds.feature_dim})")
        if ex.features.shape[0] < 1:
            raise DatasetError(f"clip {ex.clip_id!r} has no timesteps")
        if ex.labels.shape != (C,):
            raise DatasetError(
                f"clip {ex.clip_id!r}: {ex.labels.shape[0]} labels for {C} classes")
        check_labels(ex.labels)
        if not np.all(np.isfinite(ex.features)):
            raise DatasetError(f"clip {ex.clip_id!r} has non-finite features")
        if ex.split not in SPLITS:
            raise DatasetError(f"clip {ex.clip_id!r}: unknown split {ex.split!r}")


def check_labels(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if not np.all(np.isin(labels, (-1, 0, 1))):
        bad = labels[~np.isin(labels, (-1, 0, 1))]
        raise DatasetError(f"label values outside {{-1, 0, 1}}: {bad[:5].tolist()}")
    return labels.astype(np.int8)


def encode_label(relevance: float, observed: bool, threshold: float = 0.5) -> int:
    """Map a continuous relevance annotation to a three-valued label.

    Unobserved pairs are unknown (0); observed pairs are +1 when
    ``relevance >= threshold`` and -1 otherwise.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    if not 0.0 <= relevance <= 1.0:
        raise ValueError(f"relevance must lie in [0, 1], got {relevance}")
    if not observed:
        return 0
    return 1 if relevance >= threshold else -1


# ---------------------------------------------------------------------------
# Portable format
# ---------------------------------------------------------------------------

def load_dataset(root) -> Dataset:
    root = Path(root)
    for name in ("meta.json", "features.f32", "labels.csv", "split.csv"):
        if not (root / name).is_file():
            raise DatasetError(f"missing {name} in {root}")

    meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
    try:
        N = int(meta["num_clips"])
        T = int(meta["timesteps"])
        D = int(meta["feature_dim"])
        class_names = [str(c) for c in meta["class_names"]]
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"malformed meta.json: {e}") from e
    C = len(class_names)

    raw = (root / "features.f32").read_bytes()
    if len(raw) != N * T * D * 4:
        raise DatasetError(
            f"features.f32 holds {len(raw)} bytes, expected N*T*D*4 = {N * T * D * 4}")
    feats = np.frombuffer(raw, dtype="<f4").reshape(N, T, D).astype(np.float32)
    if not np.all(np.isfinite(feats)):
        raise DatasetError("features.f32 contains non-finite values")

    labels = np.zeros((N, C), dtype=np.int8)
    with open(root / "labels.csv", newline="", encoding="utf-8") as f:
        for row in _read_rows(f, ("clip_index", "class_index", "value")):
            i, c, v = int(row["clip_index"]), int(row["class_index"]), int(row["value"])
            if not (0 <= i < N and 0 <= c < C):
                raise DatasetError(f"labels.csv index out of range: clip {i}, class {c}")
            if v not in (-1, 1):
                raise DatasetError(f"labels.csv value {v} for clip {i}, class {c} not in {{-1, 1}}")
            labels[i, c] = v

    splits = ["train"] * N
    with open(root / "split.csv", newline="", encoding="utf-8") as f:
        for row in _read_rows(f, ("clip_index", "split")):
            i = int(row["clip_index"])
            if not 0 <= i < N:
                raise DatasetError(f"split.csv index out of range: clip {i}")
            splits[i] = row["split"]

    examples = tuple(
        Example(clip_id=str(i), features=feats[i], labels=labels[i], split=splits[i])
        for i in range(N)
    )
    return Dataset(examples, tuple(class_names), D, T)


def _read_rows(f, header):
    reader = csv.DictReader(f)
    if tuple(reader.fieldnames or ()) != header:
        raise DatasetError(f"expected header {','.join(header)}, got {reader.fieldnames}")
    return reader


def save_dataset(ds: Dataset, root) -> None:
    """Write ``ds`` in the portable format. Clip ids are replaced by row indices."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    T = ds.base_timesteps
    if any(ex.timesteps != T for ex in ds.examples):
        raise DatasetError("portable format requires every clip to have base_timesteps rows")

    meta = {
        "num_clips": len(ds),
        "timesteps": T,
        "feature_dim": ds.feature_dim,
        "class_names": list(ds.class_names),
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    if len(ds):
        feats = ds.features().astype("<f4")
    else:
        feats = np.zeros((0, T, ds.feature_dim), dtype="<f4")
    (root / "features.f32").write_bytes(feats.tobytes(order="C"))

    with open(root / "labels.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["clip_index", "class_index", "value"])
        for i, ex in enumerate(ds.examples):
            for c, v in enumerate(ex.labels):
                if v != 0:
                    w.writerow([i, c, int(v)])

    with open(root / "split.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["clip_index", "split"])
        for i, ex in enumerate(ds.examples):
            w.writerow([i, ex.split])


# ---------------------------------------------------------------------------
# Splitting and batching
# ---------------------------------------------------------------------------

def split_train_val(train_set: Dataset, val_fraction: float = 0.15,
                    seed: int = 0) -> tuple[Dataset, Dataset]:
    """Uniform random per-clip split into (train, validation)."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    n = len(train_set)
    n_val = int(round(val_fraction * n))
    if n_val == 0 or n_val == n:
        raise DatasetError(
            f"split of {n} clips at fraction {val_fraction} leaves an empty partition")
    perm = np.random.default_rng(seed).permutation(n)
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    return train_set.subset(train_idx), train_set.subset(val_idx)


@dataclass(frozen=True)
class Batch:
    examples: tuple[Example, ...]

    def __len__(self):
        return len(self.examples)

    @property
    def timesteps(self) -> int:
        return self.examples[0].timesteps

    def features(self) -> np.ndarray:
        return np.stack([ex.features for ex in self.examples])

    def labels(self) -> np.ndarray:
        return np.stack([ex.labels for ex in self.examples])


def make_batches(dataset: Dataset, batch_size: int, shuffle: bool = False,
                 seed: int = 0) -> list[Batch]:
    """Partition ``dataset`` into batches of equal-length clips.

    Clips are grouped by timestep count (in order of first appearance) and
    each group is chunked into ``batch_size`` pieces; only the last chunk of
    a group can be short.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if len(dataset) == 0:
        raise DatasetError("cannot batch an empty dataset")
    order = np.arange(len(dataset))
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(dataset))

    groups: dict[int, list[int]] = {}
    for i in order:
        groups.setdefault(dataset.examples[i].timesteps, []).append(int(i))

    batches = []
    for idx in groups.values():
        for start in range(0, len(idx), batch_size):
            chunk = idx[start:start + batch_size]
            batches.append(Batch(tuple(dataset.examples[i] for i in chunk)))
    return batches


# ---------------------------------------------------------------------------
# Synthetic planted-pattern data
# ---------------------------------------------------------------------------

def generate_synthetic(num_clips: int, num_classes: int, timesteps: int,
                       feature_dim: int, mask_rate: float = 0.0,
                       noise_scale: float = 0.1, seed: int = 0, *,
                       amplitude: float = 1.0, presence_prob: float = 0.3,
                       planted_steps: int = 2,
                       test_fraction: float = 0.0) -> Dataset:
    """Clips built from Gaussian noise with per-class signatures planted in time.

    Class ``c`` owns a unit vector ``u_c``. A clip where ``c`` is present
    gets ``amplitude * u_c`` added at ``planted_steps`` timesteps; the steps
    of different classes are disjoint whenever ``timesteps`` allows it.
    Each label is then hidden (set to 0) with probability ``mask_rate``.
    The last ``round(test_fraction * num_clips)`` clips form the test split.

    Features are rounded to float32 so that the portable format round-trips
    them exactly.
    """
    if min(num_clips, num_classes, timesteps, feature_dim) < 1:
        raise ValueError("all counts must be >= 1")
    if not 0.0 <= mask_rate < 1.0:
        raise ValueError(f"mask_rate must lie in [0, 1), got {mask_rate}")
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    signatures = rng.standard_normal((num_classes, feature_dim))
    signatures /= np.linalg.norm(signatures, axis=1, keepdims=True)

    present = rng.random((num_clips, num_classes)) < presence_prob
    hidden = rng.random((num_clips, num_classes)) < mask_rate
    feats = noise_scale * rng.standard_normal((num_clips, timesteps, feature_dim))
    k = min(planted_steps, timesteps)

    for i in range(num_clips):
        classes = np.flatnonzero(present[i])
        if len(classes) * k <= timesteps:
            slots = rng.permutation(timesteps)[:len(classes) * k].reshape(len(classes), k)
        else:
            slots = np.stack([rng.choice(timesteps, size=k, replace=False) for _ in classes])
        for c, steps in zip(classes, slots):
            feats[i, steps] += amplitude * signatures[c]

    labels = np.where(present, 1, -1).astype(np.int8)
    labels[hidden] = 0
    feats = feats.astype(np.float32)

    n_test = int(round(test_fraction * num_clips))
    examples = tuple(
        Example(clip_id=str(i), features=feats[i], labels=labels[i],
                split="test" if i >= num_clips - n_test else "train")
        for i in range(num_clips)
    )
    names = tuple(f"class_{c:02d}" for c in range(num_classes))
    return Dataset(examples, names, feature_dim, timesteps)
