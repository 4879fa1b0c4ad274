import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ocgnet.data import PreprocessConfig, make_synthetic_fixture
from ocgnet.model import ModelConfig
from ocgnet.pipeline import TrainConfig, train


def desk_preprocess() -> PreprocessConfig:
    return PreprocessConfig(
        query_sizes={"drone": (64, 64), "ground": (64, 128)},
        satellite_size=(128, 128),
    )


def desk_train_config(**overrides) -> TrainConfig:
    base = dict(
        batch_size=16,
        learning_rate=3e-3,
        epochs=200,
        max_steps=200,
        seed=0,
        deterministic=True,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """16 synthetic train pairs at desk scale."""
    root = tmp_path_factory.mktemp("corpus")
    manifest = make_synthetic_fixture(root, seed=7, n=16)
    return root, manifest


@pytest.fixture(scope="session")
def overfit_run(fixture_corpus, tmp_path_factory):
    """A tiny model trained to memorize the fixture corpus (200 steps)."""
    root, manifest = fixture_corpus
    out_dir = tmp_path_factory.mktemp("overfit")
    ckpt = train(
        desk_train_config(),
        manifest,
        out_dir,
        model_config=ModelConfig.tiny(),
        preprocess_cfg=desk_preprocess(),
    )
    return {"checkpoint": ckpt, "manifest": manifest, "out_dir": out_dir, "root": root}
