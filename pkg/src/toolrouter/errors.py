"""Exception types shared across the package."""


class RouterError(Exception):
    """Base class for every error raised by this package."""


class DataError(RouterError):
    """Input data violates a documented contract (bad file, bad label, bad join)."""


class UnknownToolError(DataError):
    pass


class MissingLabelError(DataError):
    pass


class MissingTruthError(DataError):
    pass


class DuplicateResponseError(DataError):
    pass


class EmptyGoldError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class InvalidConfigError(RouterError):
    pass


class TrainingDivergedError(RouterError):
    pass


class SizeBudgetExceededError(RouterError):
    pass


class InfeasibleError(RouterError):
    """No assignment can reach the requested mean predicted score.

    Carries the certificate: the maximum achievable mean predicted score,
    obtained by giving every query its argmax tool. Callers may use it to
    pick a lower threshold deliberately.
    """

    def __init__(self, p_min: float, max_achievable_mean: float):
        super().__init__(
            f"threshold {p_min} is unreachable: max achievable mean predicted "
            f"score is {max_achievable_mean}"
        )
        self.p_min = p_min
        self.max_achievable_mean = max_achievable_mean
