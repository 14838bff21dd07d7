"""Exception types shared across the package."""


class EeSimError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(EeSimError):
    """Two nodes that must be separated are co-located (zero link distance)."""


class InvalidParameter(EeSimError):
    """A numeric input is out of its documented domain or non-finite."""


class NonPositivePower(EeSimError):
    """Net consumed power of a slot is <= 0, so energy efficiency is undefined."""


class InfeasibleProblem(EeSimError):
    """No point satisfies the constraint set (phase-I failed or precheck hit)."""


class LineSearchStall(EeSimError):
    """Backtracking exceeded its trial cap without an acceptable step."""


class SurrogateCollapse(EeSimError):
    """The surrogate sum rate dropped to <= 0; the quadratic transform must restart."""


class OracleTooLarge(EeSimError):
    """Requested brute-force grid exceeds the evaluation budget."""


class ConfigError(EeSimError):
    """Experiment configuration file is missing, malformed, or out of schema."""
