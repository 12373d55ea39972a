"""Exception types raised across wingfuse.

Every error carries a short ``code`` used by the command line to emit a
machine-readable error record.
"""


class WingfuseError(Exception):
    code = "Error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class EmptySignal(WingfuseError, ValueError):
    code = "EmptySignal"


class InvalidCutoff(WingfuseError, ValueError):
    code = "InvalidCutoff"


class SegmentTooLong(WingfuseError, ValueError):
    code = "SegmentTooLong"


class InvalidOverlap(WingfuseError, ValueError):
    code = "InvalidOverlap"


class InvalidHop(WingfuseError, ValueError):
    code = "InvalidHop"


class NoPeak(WingfuseError):
    code = "NoPeak"


class ZeroSpeed(WingfuseError, ValueError):
    code = "ZeroSpeed"


class WavFormatError(WingfuseError, ValueError):
    code = "WavFormatError"


class InvalidBeamRange(WingfuseError, ValueError):
    code = "InvalidBeamRange"


class InsufficientFrames(WingfuseError):
    code = "InsufficientFrames"


class AliasedScenario(WingfuseError, ValueError):
    code = "AliasedScenario"


class NoModalities(WingfuseError):
    code = "NoModalities"


class ZeroSpectrum(WingfuseError, ValueError):
    code = "ZeroSpectrum"


class EmptyTable(WingfuseError, ValueError):
    code = "EmptyTable"


class LengthMismatch(WingfuseError, ValueError):
    code = "LengthMismatch"


class NotNormalized(WingfuseError, ValueError):
    code = "NotNormalized"


class BadDescriptor(WingfuseError, ValueError):
    code = "BadDescriptor"


class SingleClass(WingfuseError, ValueError):
    code = "SingleClass"


class DimensionMismatch(WingfuseError, ValueError):
    code = "DimensionMismatch"


class MissingModality(WingfuseError):
    code = "MissingModality"


class UnknownSpecies(WingfuseError, KeyError):
    code = "UnknownSpecies"

    def __str__(self):
        return Exception.__str__(self)


class EmptyEvaluation(WingfuseError, ValueError):
    code = "Empty"


class EmptySpec(WingfuseError, ValueError):
    code = "EmptySpec"


class ConfigError(WingfuseError, ValueError):
    code = "ConfigError"


class ParseError(WingfuseError, ValueError):
    """Malformed input file. ``kind`` names the failure, ``line`` is 1-based."""

    code = "ParseError"

    def __init__(self, kind, message="", line=None):
        self.kind = kind
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{kind}{where}: {message}" if message else f"{kind}{where}")

    def to_dict(self):
        d = super().to_dict()
        d["kind"] = self.kind
        if self.line is not None:
            d["line"] = self.line
        return d


class MissingFile(WingfuseError, FileNotFoundError):
    code = "MissingFile"

    def __init__(self, paths):
        self.paths = list(paths)
        super().__init__("missing files: " + ", ".join(str(p) for p in self.paths))

    def __str__(self):
        return "missing files: " + ", ".join(str(p) for p in self.paths)

    def to_dict(self):
        d = super().to_dict()
        d["paths"] = [str(p) for p in self.paths]
        return d
