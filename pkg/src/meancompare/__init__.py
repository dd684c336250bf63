"""Comparison of generalized Bajraktarevic means A[f,p](x) = f^-1(sum p_i(x_i) f(x_i) / sum p_i(x_i))."""

from .comparator import (
    RULES,
    ComparisonReport,
    Conclusion,
    PowerParams,
    Tolerances,
    Verdict,
    classify_power,
    compare_means,
)
from .expr import DomainError, EvalError, ParseError, differentiate, eval_expr, parse_expr, serialize
from .gapsearch import SearchConfig, local_gap_probe, max_gap
from .kernel import (
    GeneratorSpec,
    Interval,
    MeanSpec,
    SpecError,
    WeightFamily,
    eval_mean,
    invert_generator,
    power_mean,
)

__all__ = [
    "RULES", "ComparisonReport", "Conclusion", "PowerParams", "Tolerances", "Verdict", "classify_power",
    "compare_means", "DomainError", "EvalError", "ParseError", "differentiate", "eval_expr", "parse_expr",
    "serialize", "SearchConfig", "local_gap_probe", "max_gap", "GeneratorSpec", "Interval", "MeanSpec",
    "SpecError", "WeightFamily", "eval_mean", "invert_generator", "power_mean",
]
