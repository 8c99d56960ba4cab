"""Exception taxonomy.

Every error raised by the package derives from :class:`MKError`.  The CLI
maps the classes below onto process exit codes, so new errors should
subclass one of the four families rather than ``MKError`` directly.
"""


class MKError(Exception):
    """Base class. ``pointer`` is an optional JSON pointer into the input."""

    def __init__(self, message="", pointer=None):
        super().__init__(message)
        self.pointer = pointer


class InputError(MKError, ValueError):
    """Malformed or inconsistent input data (exit code 1)."""


class InfeasibleError(MKError):
    """No plan exists over the finite-cost cells (exit code 2)."""


class NotConverged(MKError):
    """Iterative solver hit ``max_iter`` (exit code 3).

    ``result`` carries the best iterate when available.
    """

    def __init__(self, message="", result=None):
        super().__init__(message)
        self.result = result


class HypothesisError(MKError):
    """A structural hypothesis such as invariance or commutation fails (exit code 4)."""


# measure
class NonPositiveWeight(InputError):
    pass


class WeightSumMismatch(InputError):
    pass


class DuplicatePoint(InputError):
    pass


class MixedDimension(InputError):
    pass


class Overflow(InputError):
    pass


# cost
class DimensionMismatch(InputError):
    pass


class TooLarge(InputError):
    pass


# group
class InvalidPermutation(InputError):
    pass


class NotMeasurePreserving(InputError):
    pass


class GroupTooLarge(InputError):
    pass


# solvers
class FiniteCostInfeasible(InfeasibleError):
    pass


class AllCellsForbidden(InfeasibleError):
    pass


# symmetrize
class MarginalsNotIdentical(HypothesisError):
    pass


class UnboundedConjugate(InfeasibleError):
    pass


class OrderViolated(HypothesisError):
    pass


class CostNotInvariant(HypothesisError):
    pass


class InfeasibleInput(HypothesisError):
    pass


class PeriodMismatch(HypothesisError):
    pass


class HypothesisViolated(HypothesisError):
    pass


class NotCommuting(HypothesisError):
    pass
