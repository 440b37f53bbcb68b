class QremLabError(Exception):
    """Base class for every error raised by the qremlib engines."""


class DimensionError(QremLabError, ValueError):
    pass


class DomainTooLargeError(QremLabError, ValueError):
    pass


class InvalidParameterError(QremLabError, ValueError):
    pass


class ConvergenceError(QremLabError, RuntimeError):
    pass


# Raised per probe; the stochastic engine discards the probe and carries on
class LanczosBreakdownError(QremLabError, RuntimeError):
    pass


class AllProbesFailedError(QremLabError, RuntimeError):
    pass


class CriticalLineError(QremLabError, ValueError):
    def __init__(self, beta: float, gamma: float):
        self.beta = beta
        self.gamma = gamma

    def __str__(self) -> str:
        return f"1/p formula undefined at transition (beta={self.beta}, gamma={self.gamma})"


class InadmissibleScheduleError(QremLabError, ValueError):
    def __init__(self, p: int, epsilon: float, reason: str):
        self.p = p
        self.epsilon = epsilon
        self.reason = reason

    def __str__(self) -> str:
        return f"schedule inadmissible at this p (p={self.p}, epsilon={self.epsilon}): {self.reason}"


class NotConnectedError(QremLabError, ValueError):
    pass


class CostBudgetExceededError(QremLabError, ValueError):
    pass


class ConfigError(QremLabError, ValueError):
    pass
