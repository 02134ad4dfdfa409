"""Exception types raised across the package."""


class PriorCountError(Exception):
    """Base class for every error this package raises deliberately."""


# --- tensor file format ---

class TensorFormatError(PriorCountError):
    """Malformed tensor file."""


class BadMagic(TensorFormatError):
    pass


class UnsupportedDtype(TensorFormatError):
    pass


class TruncatedPayload(TensorFormatError):
    pass


class IoFailure(PriorCountError):
    """Filesystem-level read or write failure."""


# --- manifest / bundle validation ---

class ManifestError(PriorCountError):
    """Invalid prior bundle manifest or contents."""


class MissingField(ManifestError):
    pass


class DuplicateLabel(ManifestError):
    pass


class MaskNotBinary(ManifestError):
    pass


class DepthOutOfRange(ManifestError):
    pass


class DimMismatch(PriorCountError):
    """Grid dimensions disagree where they must match."""


# --- refinement ---

class EmptyMask(PriorCountError):
    """Mean depth requested over a mask with no set pixels."""


# --- pipeline ---

class UnknownLabel(PriorCountError):
    pass


class DegenerateBox(PriorCountError):
    pass


class UnsupportedConfig(PriorCountError):
    pass


class MissingActivation(PriorCountError):
    """Auto point selection requested for a class without an activation map."""


# --- external segmenter exchange ---

class BackendUnavailable(PriorCountError):
    pass


class ProtocolViolation(PriorCountError):
    pass


class Timeout(PriorCountError):
    pass


# --- metrics / evaluation ---

class AnnotationError(PriorCountError):
    """Malformed annotation record or eval table."""


class EmptyTable(PriorCountError):
    pass


class AllZeroGroundTruth(PriorCountError):
    pass


class MissingGroundTruth(PriorCountError):
    pass


class TooFewClasses(PriorCountError):
    pass
