import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def textured_frame(rng):
    import cv2

    frame = rng.integers(0, 256, size=(80, 100)).astype(np.uint8)
    return cv2.GaussianBlur(frame, (0, 0), 1.0)
