"""Typed errors raised by the exporter."""


class ExporterError(Exception):
    """Base class for all exporter failures."""


class ModelLoadFailure(ExporterError):
    """A requested model name has no registered wrapper."""


class ImageDecodeFailure(ExporterError):
    """The input image cannot be opened or decoded."""


class SchemaMismatch(ExporterError):
    """Source annotations violate their declared format."""


class ExchangeViolation(ExporterError):
    """A segmenter exchange request is missing or malformed."""
