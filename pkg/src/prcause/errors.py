"""Exception types raised by the library.

Everything that signals bad user input derives from :class:`InputError` so the
command line front end can map it to a single exit code.
"""


class InputError(ValueError):
    """Base class for malformed models and invalid arguments."""


class ModelSyntaxError(InputError):
    def __init__(self, message, line=None, column=None, path=None):
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if path:
            where.append(path)
        text = f"{message} ({'; '.join(where)})" if where else message
        super().__init__(text)
        self.line = line
        self.column = column
        self.path = path


class DistributionError(InputError):
    pass


class EffectNotTerminalError(InputError):
    pass


class DuplicateIdError(InputError):
    pass


class InitIsEffectError(InputError):
    pass


class CauseError(InputError):
    """Base class for rejected cause candidates."""


class OverlapError(CauseError):
    pass


class InitInCause(CauseError):
    pass


class MInvalid(CauseError):
    """Raised when a cause state is only reachable through other cause states."""

    def __init__(self, state):
        super().__init__(f"state {state!r} is not reachable without visiting another cause state")
        self.state = state


class NoProperScheduler(ValueError):
    pass


class ArenaHasEC(ValueError):
    pass


class TauFractional(ValueError):
    pass


class AlphaOnlyAction(InputError):
    pass


class NotNormalized(ValueError):
    pass


class PreconditionViolated(ValueError):
    pass


class NotACause(InputError):
    pass


class UndefinedMeasure(ValueError):
    pass


class NoSprCause(ValueError):
    pass


class CandidateCapExceeded(ValueError):
    pass
