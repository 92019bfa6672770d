"""Trainer for the lutsr table-based x4 super-resolution engine.

Learns the float mapping modules behind every lookup table with quantized
aggregation codes (straight-through gradients) and exports them in the
engine's binary weight format; the engine's ``build-luts`` then turns them
into int8 tables.
"""

from .data import CropDataset, downscale
from .net import LutNet, quantize_codes
from .topo import BUILTIN_NAMES, Topology, builtin_topology, module_specs
from .train import TrainConfig, TrainResult, export, train
from .weights_io import read_weights, write_weights

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES",
    "CropDataset",
    "LutNet",
    "Topology",
    "TrainConfig",
    "TrainResult",
    "builtin_topology",
    "downscale",
    "export",
    "module_specs",
    "quantize_codes",
    "read_weights",
    "train",
    "write_weights",
    "__version__",
]
