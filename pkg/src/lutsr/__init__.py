"""x4 image super-resolution from cascaded 4D lookup tables.

Two parallel branches process the high and low 4-bit planes of each pixel;
every stage is a table retrieval plus integer adds, so inference needs no
multiplications. Models are built by transferring small float mapping
networks into int8 tables and verified bit for bit against a float
reference pipeline.
"""

from .engine import influence_bound, influence_extent, prepare, super_resolve
from .formats import (
    load_container,
    load_weights,
    parse_container,
    parse_weights,
    save_container,
    save_weights,
    serialize_container,
    serialize_weights,
)
from .image import downscale_bicubic, read_png, split_bitplanes, write_png
from .mapping import (
    mapping_forward,
    random_weights,
    reference_pipeline,
    transfer_container,
    transfer_to_lut,
    verify_equivalence,
)
from .metrics import bench_engine, evaluate_dataset, psnr, ssim
from .model import (
    BUILTIN_NAMES,
    LutContainer,
    LutTable,
    ModelTopology,
    builtin_topology,
    pack_index,
    payload_size,
    random_container,
    zero_container,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES",
    "LutContainer",
    "LutTable",
    "ModelTopology",
    "bench_engine",
    "builtin_topology",
    "downscale_bicubic",
    "evaluate_dataset",
    "influence_bound",
    "influence_extent",
    "load_container",
    "load_weights",
    "mapping_forward",
    "pack_index",
    "parse_container",
    "parse_weights",
    "payload_size",
    "prepare",
    "psnr",
    "random_container",
    "random_weights",
    "read_png",
    "reference_pipeline",
    "save_container",
    "save_weights",
    "serialize_container",
    "serialize_weights",
    "split_bitplanes",
    "ssim",
    "super_resolve",
    "transfer_container",
    "transfer_to_lut",
    "verify_equivalence",
    "write_png",
    "zero_container",
]
