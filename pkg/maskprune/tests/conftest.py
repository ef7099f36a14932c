import pathlib

import numpy as np
import pytest

from .. import dataset

DATA_PATH = pathlib.Path(__file__).parent / "data"
LADDER_PATH = DATA_PATH / "ablation_ladder.json"
SAMPLE_PATH = DATA_PATH / "sample.json"

# Crowd mask of sample.json: a 3x3 block at rows 2-4, columns 3-5 of 8x8.
CROWD_COUNTS = "j035000>"
CROWD_RUNS = [26, 3, 5, 3, 5, 3, 19]


@pytest.fixture
def ladder() -> dataset.Dataset:
    return dataset.load_coco(LADDER_PATH)


@pytest.fixture
def sample() -> dataset.Dataset:
    return dataset.load_coco(SAMPLE_PATH)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(params=[0, 1, 2], ids=["seed0", "seed1", "seed2"])
def seeded_rng(request) -> np.random.Generator:
    return np.random.default_rng(request.param)
