"""Exception hierarchy shared by all tko modules."""


class TkoError(Exception):
    """Base class for every error raised by this package."""


class FormatError(TkoError):
    """A tractography file could not be parsed or written.

    Carries enough context for CLI diagnostics: the offending path (if
    known), the format name, and the byte offset where parsing failed.
    """

    def __init__(self, message, *, format_name=None, offset=None, path=None):
        super().__init__(message)
        self.format_name = format_name
        self.offset = offset
        self.path = path

    def __str__(self):
        msg = super().__str__()
        parts = []
        if self.path is not None:
            parts.append(str(self.path))
        if self.format_name is not None:
            parts.append(self.format_name)
        if self.offset is not None:
            parts.append(f"byte {self.offset}")
        if parts:
            return f"{msg} [{', '.join(parts)}]"
        return msg


class UnknownFormat(FormatError):
    pass


class MalformedHeader(FormatError):
    pass


class TruncatedBody(FormatError):
    pass


class UnsupportedDatatype(FormatError):
    pass


class BadMagic(FormatError):
    pass


class HeaderSizeMismatch(FormatError):
    pass


class CountMismatch(FormatError):
    pass


class UnsupportedDataset(FormatError):
    pass


class UnsupportedSection(FormatError):
    pass


class NonFloatPoints(FormatError):
    pass


class CodecError(TkoError):
    """Base class for attribute codec failures."""


class NonFiniteInput(CodecError):
    pass


class OutOfRangeCode(CodecError):
    pass


class TruncatedVarint(CodecError):
    pass


class OverlongVarint(CodecError):
    pass


class CorruptStream(CodecError):
    pass


class LengthMismatch(CodecError):
    pass


class ContainerError(TkoError):
    """Base class for .tko container failures."""


class NotATrakoFile(ContainerError):
    pass


class UnsupportedExtensionVersion(ContainerError):
    pass


class MalformedJson(ContainerError):
    pass


class ChunkLengthMismatch(ContainerError):
    pass


class TruncatedFile(ContainerError):
    pass


class MetricsError(TkoError):
    """Base class for comparison/metric failures."""


class ZeroOriginalSize(MetricsError):
    pass


class ZeroCompressedSize(MetricsError):
    pass


class TopologyMismatch(MetricsError):
    pass


class StreamlineCountMismatch(MetricsError):
    pass


class FieldMismatch(MetricsError):
    pass


class EmptyTractogram(MetricsError):
    pass


class LossyConversionRefused(TkoError):
    """Strict-mode refusal to write a format that cannot hold all data."""

    def __init__(self, message, dropped=()):
        super().__init__(message)
        self.dropped = tuple(dropped)
