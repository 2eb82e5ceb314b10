"""Export intermediate activations of torchvision models as FTC1 containers."""

from .capture import FeatureTap, build_model, build_preprocess, tap_modules
from .containers import container_bytes, read_container_file, write_container_file
from .errors import ExportError, SetupError
from .export import ExportJob, export_features, list_images
from .profiles import NETWORKS, category_for, expected_dims, layers_for

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportJob",
    "FeatureTap",
    "NETWORKS",
    "SetupError",
    "build_model",
    "build_preprocess",
    "category_for",
    "container_bytes",
    "expected_dims",
    "export_features",
    "layers_for",
    "list_images",
    "read_container_file",
    "tap_modules",
    "write_container_file",
]
