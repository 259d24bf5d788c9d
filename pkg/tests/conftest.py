import numpy as np
import pytest

from salreid.config import GridConfig, KernelConfig, PipelineConfig
from salreid.features import PatchGrid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid_cfg():
    return GridConfig()


@pytest.fixture
def kernel_cfg():
    return KernelConfig(sigma=1.0)


@pytest.fixture
def pipeline_cfg():
    return PipelineConfig()


def random_grid(rng, rows, cols, dim=8, camera="A", identity=None) -> PatchGrid:
    descs = rng.uniform(0.0, 1.0, size=(rows, cols, dim)).astype(np.float32)
    return PatchGrid(
        rows=rows, cols=cols, descriptors=descs, camera=camera, identity=identity
    )


@pytest.fixture
def small_image(rng):
    return rng.integers(0, 256, size=(26, 18, 3), dtype=np.uint8)
