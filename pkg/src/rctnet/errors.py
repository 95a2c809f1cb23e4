"""Exception hierarchy shared by all modules."""


class RctError(Exception):
    """Base class for every error raised by rctnet."""


class SingularMatrix(RctError, ArithmeticError):
    pass


class NotSymmetric(RctError, ValueError):
    pass


class NotPSD(RctError, ValueError):
    pass


class DimensionMismatch(RctError, ValueError):
    pass


class LengthMismatch(DimensionMismatch):
    pass


class OddPopulation(RctError, ValueError):
    pass


class OddBlock(RctError, ValueError):
    """A block of a permuted-block design has odd size."""

    def __init__(self, index: int, size: int):
        super().__init__(f"block {index} has odd size {size}")
        self.index = index
        self.size = size


class TooSmallN(RctError, ValueError):
    pass


class TooLarge(RctError, ValueError):
    pass


class DegeneratePhi(RctError, ValueError):
    pass


class SingularModel(RctError, ArithmeticError):
    """I + A is not invertible, so the network estimator is undefined."""


class ModelValidationError(RctError, ValueError):
    pass


class NumericalFailure(RctError, RuntimeError):
    pass
