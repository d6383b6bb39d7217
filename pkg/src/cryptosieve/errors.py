"""Exception hierarchy shared by every module."""


class SieveError(Exception):
    """Base class for all errors raised by cryptosieve."""


class EmptyBlock(SieveError, ValueError):
    """A block with zero symbols was offered for counting."""

    def __init__(self, message="block contains no symbols", block_index=None):
        super().__init__(message)
        self.block_index = block_index


class DegenerateAlphabet(SieveError, ValueError):
    """Fewer than two character kinds: the indicator has zero degrees of freedom."""

    def __init__(self, message="indicator needs at least two character kinds", block_index=None):
        super().__init__(message)
        self.block_index = block_index


class AlreadyStopped(SieveError, RuntimeError):
    """An observation was fed to a detector that has already raised its alarm."""


class BadObservation(SieveError, ValueError):
    """Non-finite or negative indicator value."""


class CalibrationDiverged(SieveError, RuntimeError):
    """Threshold search could not bracket or hit the requested ARL."""


class ScanReadError(SieveError, OSError):
    """The scanned input could not be read; ``offset`` is the first unread byte."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
