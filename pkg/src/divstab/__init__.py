"""Divergence-based stability analysis for polynomial vector fields."""

__version__ = "0.1.0"

from .conditions import (  # noqa: E402
    INSTABILITY,
    STABILITY,
    ConditionReport,
    ConditionSpec,
    InstabilityRegion,
    analyze_instability,
    analyze_stability,
    rantzer_baseline,
)
from .expr import NormExpr, Polynomial, parse_polynomial  # noqa: E402
from .field import Explicit, NormPower, QuadFormPower, SymMatrix, VectorField, divergence  # noqa: E402

__all__ = [
    "INSTABILITY",
    "STABILITY",
    "ConditionReport",
    "ConditionSpec",
    "Explicit",
    "InstabilityRegion",
    "NormExpr",
    "NormPower",
    "Polynomial",
    "QuadFormPower",
    "SymMatrix",
    "VectorField",
    "analyze_instability",
    "analyze_stability",
    "divergence",
    "parse_polynomial",
    "rantzer_baseline",
]
