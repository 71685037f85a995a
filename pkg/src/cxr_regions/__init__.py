"""Region-of-interest extraction for paired AP/LAT pediatric chest X-rays.

Deterministic image-processing stages (CLAHE, cropping, AP verticalization,
LAT orientation, 12-region template) plus segmentation metrics and a
synthetic phantom generator. Segmentation masks and detector boxes are
consumed from files.
"""

from .errors import (
    CXRError,
    UnsupportedFormat,
    CorruptData,
    NonBinaryMask,
    IoError,
    EmptyMask,
    DimensionMismatch,
    InvalidParams,
    DegenerateBlob,
    AngleOutOfRange,
    LowConfidence,
    ViewMismatch,
    BoxOutsideImage,
    TooSmall,
    NotTwoLungs,
    OverlappingLungs,
    BothEmpty,
    EmptyList,
    InvalidSpec,
    MissingInput,
    BothEmptyWarning,
)
from .imagecore import (
    BBox,
    BinaryMask,
    GrayImage,
    ViewKind,
    bbox_of,
    load_image,
    load_mask,
    save_image,
    save_mask,
)

__version__ = "0.1.0"

__all__ = [
    "CXRError",
    "UnsupportedFormat",
    "CorruptData",
    "NonBinaryMask",
    "IoError",
    "EmptyMask",
    "DimensionMismatch",
    "InvalidParams",
    "DegenerateBlob",
    "AngleOutOfRange",
    "LowConfidence",
    "ViewMismatch",
    "BoxOutsideImage",
    "TooSmall",
    "NotTwoLungs",
    "OverlappingLungs",
    "BothEmpty",
    "EmptyList",
    "InvalidSpec",
    "MissingInput",
    "BothEmptyWarning",
    "BBox",
    "BinaryMask",
    "GrayImage",
    "ViewKind",
    "bbox_of",
    "load_image",
    "load_mask",
    "save_image",
    "save_mask",
]
