"""Exception hierarchy shared by all solvers."""


class OutreachError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(OutreachError):
    pass


class EmptyRoster(ValidationError):
    pass


class NonPositiveInput(ValidationError):
    pass


class InfeasibleCap(ValidationError):
    def __init__(self, city_id, share, cap):
        self.city_id = city_id
        self.share = share
        self.cap = cap
        super().__init__(
            f"city {city_id!r}: fair share {share:.6g} letters exceeds cap {cap:.6g}"
        )


class ProbabilityMassError(OutreachError):
    pass


class CoverageGap(OutreachError):
    pass


class MassMismatch(OutreachError):
    pass


class BudgetExceeded(OutreachError):
    """GreedyEqual needed more than ``t`` layers; carries the partial trace."""

    def __init__(self, trace):
        self.trace = trace
        super().__init__(
            f"GreedyEqual overshoots the budget: reached x={trace.final_x:.6g} > t={trace.t}"
        )


class AssumptionViolated(OutreachError):
    pass


class UnknownFunction(OutreachError):
    pass


class WidthOutOfRange(OutreachError):
    def __init__(self, t, low, high):
        self.t = t
        self.low = low
        self.high = high
        super().__init__(f"target width {t} outside attainable range [{low:.6g}, {high}]")


class BucketsFailed(OutreachError):
    def __init__(self, remaining, buckets):
        self.remaining = remaining
        self.buckets = buckets
        super().__init__(f"Buckets left {remaining} cities unplaced")


class DimensionMismatch(OutreachError):
    pass


class CycleGuardTripped(OutreachError):
    pass


class NonIntegralCaps(OutreachError):
    pass


class NodeBudgetExhausted(OutreachError):
    def __init__(self, incumbent, gap):
        self.incumbent = incumbent
        self.gap = gap
        super().__init__(f"branch-and-bound node budget exhausted with gap {gap:.3g}")


class PricingStalled(OutreachError):
    pass


class InfeasibleStart(OutreachError):
    pass


class NoFeasibleT(OutreachError):
    pass


class BudgetOutOfRange(OutreachError):
    pass


class DigestMismatch(OutreachError):
    pass


class ParseError(ValidationError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")
