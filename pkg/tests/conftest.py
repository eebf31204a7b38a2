import numpy as np
import pytest

from cgvc.frame_io import RgbFrame, VideoMeta, rgb_to_yuv
from cgvc.segmentation import LabelMap


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def solid_video(colours, size=(16, 16)):
    """One frame per RGB triple, whole frame labelled as object 1."""
    w, h = size
    frames = [rgb_to_yuv(RgbFrame.from_array(t, np.full((h, w, 3), c, np.uint8)))
              for t, c in enumerate(colours, start=1)]
    masks = [LabelMap(t, np.ones((h, w), np.uint8)) for t in range(1, len(colours) + 1)]
    return VideoMeta(w, h, len(colours)), frames, masks
