class BoundError(Exception):
    """Base error; `exit_code` is what the CLI returns for it"""

    exit_code = 1


class DomainError(BoundError, ValueError):
    exit_code = 2


class DegenerateDenominatorError(BoundError, ZeroDivisionError):
    exit_code = 3


class StorageError(BoundError, OSError):
    exit_code = 4


class TruncationBudgetError(BoundError):
    """Raised when truncation drops more probability mass than allowed"""

    exit_code = 5

    def __init__(self, message: str, deficit: float = float("nan"), budget: float = float("nan")):
        super().__init__(f"{message} (deficit={deficit:.3e}, budget={budget:.3e})")
        self.deficit = deficit
        self.budget = budget


class NotConstructibleError(BoundError):
    exit_code = 5


class NumericalError(BoundError, ArithmeticError):
    exit_code = 1
