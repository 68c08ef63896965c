"""Exception types raised across codemos."""


class ArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class ContractError(ValueError):
    """Two collaborating objects disagree, e.g. on code dictionary size."""


class CorpusDecodeError(ValueError):
    def __init__(self, offset, reason=""):
        self.offset = offset
        super().__init__(f"invalid UTF-8 at byte offset {offset}" + (f": {reason}" if reason else ""))


class MalformedSequenceError(ValueError):
    """A code stream cannot be parsed back into words.

    ``position`` is the index of the offending code (or ``None``), ``suffix``
    holds any dangling codes left at the end of the stream.
    """

    def __init__(self, message, position=None, suffix=None):
        self.position = position
        self.suffix = suffix
        super().__init__(message)


class NumericOverflowError(ArithmeticError):
    """A computation produced a non-finite value."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class SizeError(ValueError):
    """Problem too large for the requested solver."""


class ResourceError(MemoryError):
    """Allocation failed for a benchmark configuration."""
