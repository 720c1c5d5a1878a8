"""Simulation of circuits in generalised probabilistic theories.

Theories are typed real vector spaces with outcome-indexed matrices per gate.
Closed circuits are evaluated densely, by a path sum, or exactly over dyadic
rationals, with certified error bounds for the rounding and an adaptive
sampler for causal theories.
"""
from .circuit import Circuit, Node, Wire, foliate, validate_circuit
from .evaluate import eval_dense, eval_exact, eval_pathsum, postselect
from .linalg import Dyadic, DyadicMatrix
from .rules import AcceptanceRule
from .theory import Gate, SystemType, Theory, builtin, check_causality, validate_theory

__all__ = [
    "AcceptanceRule", "Circuit", "Dyadic", "DyadicMatrix", "Gate", "Node", "SystemType",
    "Theory", "Wire", "builtin", "check_causality", "eval_dense", "eval_exact",
    "eval_pathsum", "foliate", "postselect", "validate_circuit", "validate_theory",
]
__version__ = "0.1.0"
