"""
Error types raised by the toolkit.

Every error carries a ``code`` that the CLI prints as ``ERROR <code>: <message>``.
"""

from typing import Optional


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    code = "ToolkitError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class BadConfig(ToolkitError):
    code = "BadConfig"


class MissingPath(ToolkitError):
    code = "MissingPath"


# textnorm
class EmptyToken(ToolkitError):
    code = "EmptyToken"


# subword
class VocabTooSmall(ToolkitError):
    code = "VocabTooSmall"


class UnknownUnit(ToolkitError):
    code = "UnknownUnit"


class ModelFormat(ToolkitError):
    code = "ModelFormat"


# ngram
class EmptyCorpus(ToolkitError):
    code = "EmptyCorpus"


class BadWeight(ToolkitError):
    code = "BadWeight"


class ArpaParse(ToolkitError):
    code = "ArpaParse"

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


# fst
class EmptyPron(ToolkitError):
    code = "EmptyPron"


class DeterminizeBlowup(ToolkitError):
    code = "DeterminizeBlowup"


class EmptyGraph(ToolkitError):
    code = "EmptyGraph"


class FstFormat(ToolkitError):
    code = "FstFormat"


# decode
class MatrixShape(ToolkitError):
    code = "MatrixShape"


class DecodeDeadEnd(ToolkitError):
    code = "DecodeDeadEnd"


# rescore
class BadN(ToolkitError):
    code = "BadN"


class TrainDiverged(ToolkitError):
    code = "TrainDiverged"


# pipeline
class DuplicateSegment(ToolkitError):
    code = "DuplicateSegment"


class SilentAudio(ToolkitError):
    code = "SilentAudio"


class RateMismatch(ToolkitError):
    code = "RateMismatch"


class BadAudio(ToolkitError):
    code = "BadAudio"


class ManifestFormat(ToolkitError):
    code = "ManifestFormat"


# eval
class MissingReference(ToolkitError):
    code = "MissingReference"


class EmptyReference(ToolkitError):
    code = "EmptyReference"


class DuplicateUtterance(ToolkitError):
    code = "DuplicateUtterance"
