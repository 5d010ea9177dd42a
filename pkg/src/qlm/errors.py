"""Exception hierarchy shared across the package."""


class DensityError(ValueError):
    """A matrix violates a density-matrix invariant or a shape precondition."""


class OOVError(KeyError):
    """A word is not in the vocabulary."""

    def __init__(self, word):
        super().__init__(word)
        self.word = word

    def __str__(self):
        return f"out-of-vocabulary word: {self.word!r}"


class NumericalError(ArithmeticError):
    """Training produced a non-finite loss or parameter."""


class ModelFormatError(ValueError):
    """A model file could not be decoded."""


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedPayloadError(ModelFormatError):
    pass


class InvalidWordEncodingError(ModelFormatError):
    pass


class EmptyPeriodError(ValueError):
    """A corpus period has no usable tokens."""

    def __init__(self, period, detail="no tokens"):
        super().__init__(f"period {period!r}: {detail}")
        self.period = period
