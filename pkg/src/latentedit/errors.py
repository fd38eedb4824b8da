"""Exception hierarchy shared by every stage of the pipeline."""


class LatentEditError(Exception):
    """Base class for all library errors."""


class ShapeMismatch(LatentEditError, ValueError):
    pass


class EmptyInput(LatentEditError, ValueError):
    pass


class BadIndexRange(LatentEditError, ValueError):
    pass


class DegenerateEyes(LatentEditError, ValueError):
    pass


class SingularTransform(LatentEditError, ValueError):
    pass


class BadGrid(LatentEditError, ValueError):
    pass


class MissingTarget(LatentEditError, ValueError):
    pass


class NonFiniteLoss(LatentEditError, ArithmeticError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"non-finite loss {value!r} at iteration {iteration}")
        self.iteration = iteration
        self.value = value


class SingleClassDataset(LatentEditError, ValueError):
    pass


class ZeroVector(LatentEditError, ValueError):
    pass


class DegenerateResult(LatentEditError, ValueError):
    pass


class TooSmall(LatentEditError, ValueError):
    pass


class TooFewSamples(LatentEditError, ValueError):
    pass


class DimensionMismatch(ShapeMismatch):
    pass


class NonPSDProduct(LatentEditError, ArithmeticError):
    pass


class ZeroEmbedding(LatentEditError, ValueError):
    pass


class FormatError(LatentEditError, ValueError):
    """Raised when a binary or manifest file is malformed."""
