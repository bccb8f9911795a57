"""Exception hierarchy shared by all solvers and calculators."""


class SparsePursuitError(Exception):
    """Base class for every error raised by this package."""


class RankDeficient(SparsePursuitError):
    """The selected columns are (numerically) linearly dependent."""


class DuplicateIndex(SparsePursuitError, ValueError):
    pass


class NotActive(SparsePursuitError, ValueError):
    pass


class InSpan(SparsePursuitError):
    """A candidate column lies in the span of the active columns."""


class NotDetermined(SparsePursuitError, ValueError):
    """Backward elimination needs at least as many rows as columns."""


class NotNormalized(SparsePursuitError, ValueError):
    pass


class NumericalFailure(SparsePursuitError):
    pass


class BadArity(SparsePursuitError, ValueError):
    """An argument is outside the domain where a formula is defined."""


class DataFormat(SparsePursuitError, ValueError):
    """A data file could not be parsed."""
