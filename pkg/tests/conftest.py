import numpy as np
import pytest

from gp_core.hyperparams import ControllerParams, Dataset


def _random_dataset(rng: np.random.Generator, n: int, mean: float = 2.0, spread: float = 1.0) -> Dataset:
    data = Dataset()
    for u in rng.uniform(0.0, 1.0, size=(n, 2)):
        data = data.append(ControllerParams.from_unit(u), float(mean + spread * rng.normal()))
    return data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_dataset():
    return _random_dataset


@pytest.fixture
def small_dataset(rng):
    return _random_dataset(rng, 5)
