"""Expected output shapes for every exportable (network, layer) pair.

Shapes are (H, W, C) for spatial features and (N,) for fully connected
outputs, at the standard 224x224 input resolution. A capture whose shape
disagrees with this table is wrong by construction and must not be
written.
"""

from __future__ import annotations

CATEGORY_CONV = 0
CATEGORY_POOL = 1
CATEGORY_FC = 2

_VGG16 = {
    "conv1": (224, 224, 64),
    "pool1": (112, 112, 64),
    "conv2": (112, 112, 128),
    "pool2": (56, 56, 128),
    "conv3": (56, 56, 256),
    "pool3": (28, 28, 256),
    "conv4": (28, 28, 512),
    "pool4": (14, 14, 512),
    "conv5": (14, 14, 512),
    "pool5": (7, 7, 512),
    "fc1": (4096,),
    "fc2": (4096,),
    "fc3": (1000,),
}

# the three ResNet depths share every tap shape
_RESNET = {
    "conv1": (112, 112, 64),
    "pool1": (56, 56, 64),
    "conv2": (56, 56, 256),
    "conv3": (28, 28, 512),
    "conv4": (14, 14, 1024),
    "conv5": (7, 7, 2048),
    "pool5": (1, 1, 2048),
    "fc1": (1000,),
}

EXPECTED_DIMS: dict[str, dict[str, tuple[int, ...]]] = {
    "vgg16": _VGG16,
    "resnet50": _RESNET,
    "resnet101": _RESNET,
    "resnet152": _RESNET,
}

NETWORKS = tuple(EXPECTED_DIMS)


def layers_for(network: str) -> tuple[str, ...]:
    try:
        return tuple(EXPECTED_DIMS[network])
    except KeyError:
        raise ValueError(f"unknown network {network!r}, expected one of {NETWORKS}") from None


def expected_dims(network: str, layer: str) -> tuple[int, ...]:
    table = EXPECTED_DIMS.get(network)
    if table is None:
        raise ValueError(f"unknown network {network!r}, expected one of {NETWORKS}")
    dims = table.get(layer)
    if dims is None:
        raise ValueError(f"{network} has no exportable layer {layer!r}")
    return dims


def category_for(layer: str) -> int:
    if layer.startswith("conv"):
        return CATEGORY_CONV
    if layer.startswith("pool"):
        return CATEGORY_POOL
    if layer.startswith("fc"):
        return CATEGORY_FC
    raise ValueError(f"cannot infer a category from layer name {layer!r}")
