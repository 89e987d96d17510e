"""Exception hierarchy shared by every quadhmm module."""


class QuadHmmError(Exception):
    """Base class for all errors raised by this package."""


class NonTiling(QuadHmmError, ValueError):
    """Workspace extent is not an integer multiple of the cell size."""


class InvalidLevels(QuadHmmError, ValueError):
    pass


class LevelOutOfRange(QuadHmmError, IndexError):
    pass


class OutOfBounds(QuadHmmError, ValueError):
    """Point lies outside the gridded workspace."""


class UnknownAnchor(QuadHmmError, KeyError):
    pass


class EmptyFrame(QuadHmmError, ValueError):
    """A measurement frame carries no ranges."""


class NotEnoughAnchors(QuadHmmError, ValueError):
    pass


class EmptyTrellis(QuadHmmError, ValueError):
    pass


class LadderMismatch(QuadHmmError, ValueError):
    pass


class DegenerateGeometry(QuadHmmError, ValueError):
    """Anchor layout is rank deficient (e.g. collinear anchors)."""


class Degeneracy(QuadHmmError, RuntimeError):
    """All particle weights collapsed to zero."""


class ZeroLengthPath(QuadHmmError, ValueError):
    pass


class LengthMismatch(QuadHmmError, ValueError):
    pass


class TooShort(QuadHmmError, ValueError):
    pass


class ConfigError(QuadHmmError, ValueError):
    """Invalid run configuration; the message starts with the field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
