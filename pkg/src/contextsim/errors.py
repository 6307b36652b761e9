"""Exception hierarchy shared by the library and the CLI."""


class ContextSimError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 2


class NotHermitian(ContextSimError):
    pass


class NotOrthonormal(ContextSimError):
    pass


class DimensionMismatch(ContextSimError):
    pass


class InvalidState(ContextSimError):
    pass


class NotNormalized(InvalidState):
    pass


class TooManyLabels(ContextSimError):
    pass


class InvalidWeights(ContextSimError):
    pass


class DegeneratePreparation(ContextSimError):
    """The prepared state carries no signal for the requested test."""

    exit_code = 3


class NonDiscriminable(ContextSimError):
    """Lueders and von Neumann updates coincide for this observable."""

    exit_code = 3


class NumericalDrift(ContextSimError):
    exit_code = 1
