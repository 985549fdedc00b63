"""Exception types shared across the toolkit."""


class ScriptoriumError(Exception):
    """Base class for all toolkit errors."""


class UnknownSymbol(ScriptoriumError):
    """A character is not part of the alphabet."""

    def __init__(self, character: str, position: int):
        self.character = character
        self.position = position
        super().__init__(f"unknown symbol {character!r} at position {position}")


class EmptyReference(ScriptoriumError):
    """Error-rate reference string is empty (or has no words)."""


class ImpossibleLabel(ScriptoriumError):
    """Label cannot be emitted in the given number of frames."""


class TooLarge(ScriptoriumError):
    """Brute-force enumeration bound exceeded."""


class EmptyMeasurements(ScriptoriumError):
    """No per-character timing measurements supplied."""


class NegativeEpsilon(ScriptoriumError):
    """Character error rate passed to the combined loss is negative."""


class BadShape(ScriptoriumError):
    """Input array has a shape the operation cannot accept."""


class ShapeMismatch(ScriptoriumError):
    """Parameter and gradient shapes disagree."""


class AlphabetMismatch(ScriptoriumError):
    """Dataset transcriptions use symbols outside the model alphabet."""


class EmptySplit(ScriptoriumError):
    """A required dataset split has no records."""


class CorruptFile(ScriptoriumError):
    """Persisted artifact failed its integrity checks."""


class EmptyCorpus(ScriptoriumError):
    """Language-model training corpus contains no usable text."""


class UnknownChar(ScriptoriumError):
    """Queried character is not in the language-model vocabulary."""


class SchemaError(ScriptoriumError):
    """Manifest record violates the schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingImage(ScriptoriumError):
    """Manifest references an image file that does not exist."""


class NoTimedRecords(ScriptoriumError):
    """No record carries a usable reaction time."""
