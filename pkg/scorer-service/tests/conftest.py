import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toydata import make_dataset  # noqa: E402

from scorer_service.train import TrainConfig, train  # noqa: E402


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """~120 examples, grouped 80/20 split, both labels in both splits."""
    path = tmp_path_factory.mktemp("data") / "toy.jsonl"
    make_dataset(path, n_people=36, n_places=4, seed=0, eval_fraction=0.2)
    return path


@pytest.fixture(scope="session")
def trained_model_dir(tmp_path_factory, toy_dataset):
    out = tmp_path_factory.mktemp("model") / "scorer"
    config = TrainConfig(
        dataset=str(toy_dataset),
        out_dir=str(out),
        epochs=3,
        learning_rate=1e-3,
        max_seq_len=32,
        batch_size=16,
        seed=0,
    )
    result = train(config)
    return Path(result.model_dir)
