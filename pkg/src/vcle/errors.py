"""Exception types shared across the console, protocol and environment layers."""


class VcleError(Exception):
    """Base class for all errors raised by this package."""


class AlreadyRunning(VcleError):
    pass


class NotRunning(VcleError):
    pass


class OutOfBounds(VcleError):
    pass


class InvalidSpeed(VcleError):
    pass


class UnknownState(VcleError):
    """Snapshot name not present in the session store."""


class StorageError(VcleError):
    """Snapshot persistence failed at the filesystem level."""


class UnknownGame(VcleError):
    pass


class UnknownStart(VcleError):
    pass


class NotRecording(VcleError):
    pass


class AlreadyRecording(VcleError):
    pass


class UnknownWatch(VcleError):
    pass


class FrameTooLarge(VcleError):
    pass


class MalformedFrame(VcleError):
    pass


class UnknownOpcode(VcleError):
    pass


class EpisodeOver(VcleError):
    pass


class BadAction(VcleError):
    pass


class StuckMove(VcleError):
    """A move's completion condition never fired within the safety window."""


class BadFrame(VcleError):
    pass


class BadAudio(VcleError):
    pass


class ScriptError(VcleError):
    pass


class LevelError(VcleError):
    """A level definition violates the format or its invariants."""
