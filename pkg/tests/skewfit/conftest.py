import numpy as np
import pytest

from src.skewfit.distributions import RngStream, SpdMatrix
from src.skewfit.likelihood import Dataset
from src.skewfit.model import AlphaParams, PriorConfig


@pytest.fixture()
def rng() -> RngStream:
    return RngStream(20240517)


@pytest.fixture()
def prior() -> PriorConfig:
    return PriorConfig()


@pytest.fixture()
def truth_2d() -> AlphaParams:
    return AlphaParams(
        xi=np.array([1.0, -2.0]),
        alpha=np.array([3.0, -1.0]),
        sigma=SpdMatrix.from_array([[2.0, 0.6], [0.6, 1.5]]),
        nu=6.0,
    )


@pytest.fixture()
def gaussian_data_factory():
    def _factory(n: int, p: int = 2, seed: int = 7) -> Dataset:
        gen = np.random.default_rng(seed)
        mean = np.arange(1, p + 1, dtype=float)
        cov = 0.5 * np.eye(p) + 0.5
        return Dataset.from_array(gen.multivariate_normal(mean, cov, size=n))

    return _factory
