import numpy as np
import pytest

from partialmic.dataio import Dataset, Example, generate_synthetic, save_dataset
from partialmic.model import ModelConfig


@pytest.fixture
def tiny_dataset():
    """3 clips, T=10, D=4, 2 classes, written by hand."""
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((3, 10, 4)).astype(np.float32)
    labels = np.array([[1, 0], [-1, 1], [0, -1]], dtype=np.int8)
    examples = [Example(str(i), feats[i], labels[i], "train" if i < 2 else "test")
                for i in range(3)]
    return Dataset(examples, ("guitar", "piano"), 4, 10)


@pytest.fixture
def tiny_dataset_dir(tmp_path, tiny_dataset):
    root = tmp_path / "tiny"
    save_dataset(tiny_dataset, root)
    return root


@pytest.fixture(scope="session")
def small_synthetic():
    return generate_synthetic(60, 3, 6, 5, mask_rate=0.3, seed=11, test_fraction=0.25)


@pytest.fixture(scope="session")
def small_model_config():
    return ModelConfig(input_dim=5, hidden=4, num_classes=3)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
