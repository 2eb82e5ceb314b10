"""Layer-shape registry for the supported backbone networks.

Maps (network, layer) to the feature category and extents of the activation
that layer produces for a 224x224x3 input. Shapes are compiled-in ground
truth for VGG-16 and ResNet-50/101/152; the reference mean non-zero rates
observed on ImageNet-scale inputs are kept alongside so synthetic corpora
can be generated with realistic sparsity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .tensor import Category

__all__ = ["LayerProfile", "lookup_profile", "all_profiles", "REFERENCE_NONZERO_RATE"]


@dataclass(frozen=True)
class LayerProfile:
    network: str
    layer: str
    category: Category
    dims: tuple[int, ...]

    @property
    def volume_bytes(self) -> int:
        return math.prod(self.dims) * 4


_VGG16 = [
    ("conv1", Category.CONV, (224, 224, 64)),
    ("pool1", Category.POOL, (112, 112, 64)),
    ("conv2", Category.CONV, (112, 112, 128)),
    ("pool2", Category.POOL, (56, 56, 128)),
    ("conv3", Category.CONV, (56, 56, 256)),
    ("pool3", Category.POOL, (28, 28, 256)),
    ("conv4", Category.CONV, (28, 28, 512)),
    ("pool4", Category.POOL, (14, 14, 512)),
    ("conv5", Category.CONV, (14, 14, 512)),
    ("pool5", Category.POOL, (7, 7, 512)),
    ("fc1", Category.FC, (4096,)),
    ("fc2", Category.FC, (4096,)),
    ("fc3", Category.FC, (1000,)),
]

# ResNet-50/101/152 share one set of feature shapes.
_RESNET = [
    ("conv1", Category.CONV, (112, 112, 64)),
    ("pool1", Category.POOL, (56, 56, 64)),
    ("conv2", Category.CONV, (56, 56, 256)),
    ("conv3", Category.CONV, (28, 28, 512)),
    ("conv4", Category.CONV, (14, 14, 1024)),
    ("conv5", Category.CONV, (7, 7, 2048)),
    ("pool5", Category.POOL, (1, 1, 2048)),
    ("fc1", Category.FC, (1000,)),
]

_PROFILES: dict[tuple[str, str], LayerProfile] = {}
for _net, _rows in [
    ("vgg16", _VGG16),
    ("resnet50", _RESNET),
    ("resnet101", _RESNET),
    ("resnet152", _RESNET),
]:
    for _layer, _cat, _dims in _rows:
        _PROFILES[(_net, _layer)] = LayerProfile(_net, _layer, _cat, _dims)


# Mean non-zero rate per layer, measured over ImageNet validation images.
REFERENCE_NONZERO_RATE: dict[tuple[str, str], float] = {
    ("vgg16", "conv1"): 0.685,
    ("vgg16", "pool1"): 0.815,
    ("vgg16", "conv2"): 0.480,
    ("vgg16", "pool2"): 0.694,
    ("vgg16", "conv3"): 0.302,
    ("vgg16", "pool3"): 0.484,
    ("vgg16", "conv4"): 0.127,
    ("vgg16", "pool4"): 0.243,
    ("vgg16", "conv5"): 0.068,
    ("vgg16", "pool5"): 0.124,
    ("vgg16", "fc1"): 0.248,
    ("vgg16", "fc2"): 0.259,
    ("vgg16", "fc3"): 1.000,
    ("resnet50", "conv1"): 0.686,
    ("resnet50", "pool1"): 0.765,
    ("resnet50", "conv2"): 0.707,
    ("resnet50", "conv3"): 0.686,
    ("resnet50", "conv4"): 0.541,
    ("resnet50", "conv5"): 0.176,
    ("resnet50", "pool5"): 0.887,
    ("resnet50", "fc1"): 1.000,
    ("resnet101", "conv1"): 0.660,
    ("resnet101", "pool1"): 0.713,
    ("resnet101", "conv2"): 0.687,
    ("resnet101", "conv3"): 0.724,
    ("resnet101", "conv4"): 0.730,
    ("resnet101", "conv5"): 0.164,
    ("resnet101", "pool5"): 0.860,
    ("resnet101", "fc1"): 1.000,
    ("resnet152", "conv1"): 0.595,
    ("resnet152", "pool1"): 0.640,
    ("resnet152", "conv2"): 0.715,
    ("resnet152", "conv3"): 0.757,
    ("resnet152", "conv4"): 0.765,
    ("resnet152", "conv5"): 0.165,
    ("resnet152", "pool5"): 0.860,
    ("resnet152", "fc1"): 1.000,
}


def lookup_profile(network: str, layer: str) -> LayerProfile | None:
    """Registry entry for (network, layer), or None when unknown."""
    return _PROFILES.get((network, layer))


def all_profiles() -> list[LayerProfile]:
    return list(_PROFILES.values())
