"""Fair first-stage sampling of municipalities for citizens' assemblies."""

__version__ = "0.1.0"

from .errors import OutreachError
from .model import City, ProblemInstance, make_instance, validate, width_profile, lower_bound_t
from .layout import Layout, LetterDistribution, dependent_round, extract_distribution, sample
from .greedy import greedy_equal, min_t_greedy
from .targets import solve_kappa
from .buckets import buckets
from .colgen import feasible, min_feasible_t, optimize_proportional

__all__ = [
    "OutreachError", "City", "ProblemInstance", "make_instance", "validate", "width_profile",
    "lower_bound_t", "Layout", "LetterDistribution", "dependent_round", "extract_distribution",
    "sample", "greedy_equal", "min_t_greedy", "solve_kappa", "buckets", "feasible",
    "min_feasible_t", "optimize_proportional",
]
