"""Exception types shared across the library."""


class GeometryError(ValueError):
    """Base class for geometric precondition failures."""


class DegenerateSimplexError(GeometryError):
    """A simplex is affinely degenerate where a non-degenerate one is required."""


class NonGenericError(GeometryError):
    """Input violates genericity (cocircular / cospherical tuple detected).

    Callers should re-generate the point set with jitter enabled.
    """

    def __init__(self, msg="non-generic input detected"):
        super().__init__(msg + " (apply a small seeded jitter and retry)")


class InvalidComplexError(GeometryError):
    """A cell list does not form a valid simplicial complex."""


class WindowError(ValueError):
    """A windowed computation was asked to exceed its safe radius."""


class SamplerError(RuntimeError):
    """A rejection or dart-throwing sampler failed to make progress."""
