"""Phase-space symbols: parsing, exact calculus, flow composition, averaging."""
from .average import AveragedSymbol, resonant_average
from .evaluate import SymbolDomainError
from .expr import (
    PhasePoint,
    SymbolExpr,
    as_symbol,
    compose_with_flow,
    derivative_multi,
    differentiate,
    eval_symbol,
    evaluated_equal,
    gradient,
    h0_symbol,
    ho_flow,
    homogenize,
    multi_indices,
    parse_symbol,
    poisson_bracket,
    substitute,
)
from .parser import SymbolSyntaxError
from .seminorm import SeminormEstimate, seminorm_estimate

H_STAR_TEXT = "x1^2/(2*h0)"


def h_star() -> SymbolExpr:
    """The model symbol x1^2 / (2 h0), positively homogeneous of degree 0."""
    return SymbolExpr.parse(H_STAR_TEXT, 0.0, ("positive", 0.0))


__all__ = [
    "AveragedSymbol",
    "H_STAR_TEXT",
    "PhasePoint",
    "SeminormEstimate",
    "SymbolDomainError",
    "SymbolExpr",
    "SymbolSyntaxError",
    "as_symbol",
    "compose_with_flow",
    "derivative_multi",
    "differentiate",
    "eval_symbol",
    "evaluated_equal",
    "gradient",
    "h0_symbol",
    "h_star",
    "ho_flow",
    "homogenize",
    "multi_indices",
    "parse_symbol",
    "poisson_bracket",
    "resonant_average",
    "seminorm_estimate",
    "substitute",
]
