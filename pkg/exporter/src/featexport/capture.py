"""Model construction, layer taps, and activation capture.

Capture points sit after the activation function (ReLU for all four
supported networks), which is where the zero-heavy statistics of these
features live. Spatial outputs are returned channel-last (H, W, C);
fully connected outputs as flat vectors.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torchvision
from PIL import Image
from torchvision import transforms

from .errors import SetupError
from .profiles import layers_for

# indices into vgg16.features / vgg16.classifier whose OUTPUT is the tap
_VGG_FEATURE_TAPS = {
    "conv1": 3, "pool1": 4,
    "conv2": 8, "pool2": 9,
    "conv3": 15, "pool3": 16,
    "conv4": 22, "pool4": 23,
    "conv5": 29, "pool5": 30,
}
_VGG_CLASSIFIER_TAPS = {"fc1": 1, "fc2": 4, "fc3": 6}

_BUILDERS = {
    "vgg16": torchvision.models.vgg16,
    "resnet50": torchvision.models.resnet50,
    "resnet101": torchvision.models.resnet101,
    "resnet152": torchvision.models.resnet152,
}


def build_model(network: str, pretrained: bool = True) -> torch.nn.Module:
    """Construct the network in eval mode; pretrained pulls zoo weights."""
    try:
        builder = _BUILDERS[network]
    except KeyError:
        raise ValueError(f"unknown network {network!r}, expected one of {tuple(_BUILDERS)}") from None
    try:
        model = builder(weights="DEFAULT" if pretrained else None)
    except Exception as exc:
        raise SetupError(f"cannot prepare weights for {network}: {exc}") from exc
    model.eval()
    return model


def tap_modules(model: torch.nn.Module, network: str) -> dict[str, torch.nn.Module]:
    """Map every exportable layer name to the module whose output is captured."""
    if network == "vgg16":
        taps = {name: model.features[i] for name, i in _VGG_FEATURE_TAPS.items()}
        taps.update({name: model.classifier[i] for name, i in _VGG_CLASSIFIER_TAPS.items()})
        return taps
    if network in ("resnet50", "resnet101", "resnet152"):
        return {
            "conv1": model.relu,
            "pool1": model.maxpool,
            "conv2": model.layer1,
            "conv3": model.layer2,
            "conv4": model.layer3,
            "conv5": model.layer4,
            "pool5": model.avgpool,
            "fc1": model.fc,
        }
    raise ValueError(f"unknown network {network!r}")


def to_feature_array(out: torch.Tensor) -> np.ndarray:
    """Convert one captured batch-of-one output to a channel-last f32 array."""
    t = out.detach()[0]
    if t.ndim == 3:  # (C, H, W) -> (H, W, C)
        t = t.permute(1, 2, 0)
    elif t.ndim != 1:
        raise ValueError(f"unexpected capture rank {t.ndim + 1}")
    return np.ascontiguousarray(t.numpy(), dtype="<f4")


class FeatureTap:
    """Forward hooks over a chosen set of layers; collects one image at a time."""

    def __init__(self, model: torch.nn.Module, network: str, layers: tuple[str, ...]):
        known = layers_for(network)
        unknown = [name for name in layers if name not in known]
        if unknown:
            raise ValueError(f"{network} has no exportable layer(s) {unknown}")
        self._model = model
        modules = tap_modules(model, network)
        self._captured: dict[str, torch.Tensor] = {}
        self._handles = [
            modules[name].register_forward_hook(self._hook(name)) for name in layers
        ]

    def _hook(self, name: str):
        def store(_module, _inputs, output):
            self._captured[name] = output

        return store

    def collect(self, batch: torch.Tensor) -> dict[str, np.ndarray]:
        self._captured.clear()
        with torch.no_grad():
            self._model(batch)
        return {name: to_feature_array(out) for name, out in self._captured.items()}

    def close(self) -> None:
        for handle in self._handles:
            handle.remove()
        self._handles = []

    def __enter__(self) -> "FeatureTap":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def build_preprocess() -> transforms.Compose:
    """Standard 224x224 evaluation pipeline for the supported zoo models."""
    return transforms.Compose(
        [
            transforms.Resize(256),
            transforms.CenterCrop(224),
            transforms.ToTensor(),
            transforms.Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]),
        ]
    )


def load_image_batch(path: Path, preprocess: transforms.Compose) -> torch.Tensor:
    with Image.open(path) as img:
        tensor = preprocess(img.convert("RGB"))
    return tensor.unsqueeze(0)
