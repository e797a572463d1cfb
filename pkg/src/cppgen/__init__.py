"""Contextual privacy policy generation for mobile app screenshots."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    BBox,
    Context,
    DataType,
    EvalConfig,
    IconClassMap,
    KeywordResource,
    Kind,
    iou,
    match_boxes,
)
