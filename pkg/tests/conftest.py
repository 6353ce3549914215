import numpy as np
import pytest

from seedrelay import dataset as ds


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def glyph_pool():
    """Small synthetic pool shared by tests that only need labeled images."""
    return ds.synth_digits(np.random.default_rng(7), per_label=40)


def random_images(rng: np.random.Generator, n: int, density: float = 0.2) -> np.ndarray:
    """Random sparse uint8 images: each pixel nonzero with the given density."""
    mask = rng.random((n, 28, 28)) < density
    vals = rng.integers(1, 256, size=(n, 28, 28), dtype=np.int64)
    return (mask * vals).astype(np.uint8)
