"""Exception types shared across the toolkit."""


class StlaError(Exception):
    """Base class for all toolkit errors."""


class ExprSyntaxError(StlaError):
    """Malformed expression text; carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownVariableError(StlaError):
    def __init__(self, name, offset=None):
        loc = f" (at offset {offset})" if offset is not None else ""
        super().__init__(f"unknown variable '{name}'{loc}")
        self.name = name
        self.offset = offset


class DomainError(StlaError):
    """Evaluation outside the domain of an elementary function."""


class DimensionMismatchError(StlaError):
    pass


class InsufficientOrderError(StlaError):
    """A jet ran out of valid derivative order for the requested operation."""


class DegenerateInputError(StlaError):
    pass


class NumericalBreakdownError(StlaError):
    pass


class RankDeficientError(StlaError):
    pass


class InfeasibleWitnessError(StlaError):
    pass


class NoConvergenceError(StlaError):
    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class BudgetExceededError(StlaError):
    """Hypotheses of the fixed-point lemma fail on the given problem data."""


class OrderClaimFailedError(StlaError):
    def __init__(self, order, value):
        super().__init__(f"coefficient of order {order} does not vanish: {value!r}")
        self.order = order
        self.value = value


class GradientVanishesError(StlaError):
    pass


class NoGroupQualifiesError(StlaError):
    pass


class NotPositiveBasisError(StlaError):
    pass


class RankDeficientJacobianError(StlaError):
    pass


class SideConditionFailedError(StlaError):
    def __init__(self, detail):
        super().__init__(f"side condition failed: {detail}")
        self.detail = detail


class NotInBasinError(StlaError):
    pass


class InsufficientSamplesError(StlaError):
    pass


class StepUnderflowError(StlaError):
    pass


class ConfigError(StlaError):
    def __init__(self, message, path=None, where=None):
        ctx = []
        if path:
            ctx.append(str(path))
        if where:
            ctx.append(where)
        prefix = f"[{': '.join(ctx)}] " if ctx else ""
        super().__init__(prefix + message)
        self.path = path
        self.where = where
