import numpy as np
import pytest


def random_grid(rng: np.random.Generator, num_frames: int, num_classes: int) -> np.ndarray:
    """Random valid log-probability grid (rows sum to 1 in prob space)."""
    logits = rng.normal(size=(num_frames, num_classes))
    logits -= logits.max(axis=1, keepdims=True)
    return logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))


@pytest.fixture
def rng():
    return np.random.default_rng(0xC7C)
