import numpy as np
import pytest
from PIL import Image

import featexport


@pytest.fixture(scope="session")
def vgg16_random():
    return featexport.build_model("vgg16", pretrained=False)


@pytest.fixture(scope="session")
def resnet50_random():
    return featexport.build_model("resnet50", pretrained=False)


def write_images(directory, count, size=(320, 280), seed=0):
    """Write small random RGB images; returns their paths."""
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        pixels = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
        path = directory / f"img{i:03d}.png"
        Image.fromarray(pixels, mode="RGB").save(path)
        paths.append(path)
    return paths
