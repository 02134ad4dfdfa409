"""Producer side of the counting engine's interchange formats."""

from .convert import FORMATS, convert_annotations, write_jsonl
from .errors import (
    ExchangeViolation,
    ExporterError,
    ImageDecodeFailure,
    ModelLoadFailure,
    SchemaMismatch,
)
from .export import ExportJob, decode_image, export_priors, normalize_depth
from .models import (
    StubDepth,
    StubPromptable,
    StubSemantic,
    depth_model,
    promptable_model,
    register_depth,
    register_promptable,
    register_semantic,
    semantic_model,
)
from .serve import serve_segmenter
from .tensorio import decode_tensor, encode_tensor, read_tensor, write_tensor

__all__ = [
    "FORMATS",
    "ExchangeViolation",
    "ExporterError",
    "ExportJob",
    "ImageDecodeFailure",
    "ModelLoadFailure",
    "SchemaMismatch",
    "StubDepth",
    "StubPromptable",
    "StubSemantic",
    "convert_annotations",
    "decode_image",
    "decode_tensor",
    "depth_model",
    "encode_tensor",
    "export_priors",
    "normalize_depth",
    "promptable_model",
    "read_tensor",
    "register_depth",
    "register_promptable",
    "register_semantic",
    "semantic_model",
    "serve_segmenter",
    "write_jsonl",
    "write_tensor",
]
