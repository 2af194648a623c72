"""Finite-dimensional planar calculus, basic constructions, and singularity metrics."""

from subfactor_lab.scalars import (
    DeltaPolynomial,
    QuadraticNumber,
    RationalFunction,
    evaluate,
    quantum_integer,
)

__all__ = [
    "DeltaPolynomial",
    "QuadraticNumber",
    "RationalFunction",
    "evaluate",
    "quantum_integer",
]

__version__ = "0.1.0"
