"""Dyadic approximation of circuits with a certified outcome-amplitude error bound.

For a circuit of ``q`` gates whose outcome matrices are rounded entrywise to
within ``eps``::

    |P(z) - P~(z)| <= D**(q-1) * q * eps * N

with ``N`` the largest outcome-matrix size (rows * cols) and
``D = D'' + N``, where ``D''`` bounds the operator norms of the original
matrices. ``D''`` is certified with the Frobenius norm.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

from .circuit import Circuit
from .evaluate import rounded_circuit
from .theory import gate_norm_constants


@dataclass(frozen=True)
class ErrorCertificate:
    eps: float
    q: int
    N: int
    D_doubleprime: float
    D: float
    bound: float
    exponent: int

    def to_dict(self) -> dict:
        return asdict(self)


def certificate_bound(eps: float, q: int, N: float, D: float) -> float:
    return D ** (q - 1) * q * eps * N


def exponent_for(eps: float) -> int:
    """``ceil(log2(1/eps)) + 1``, exact for dyadic ``eps``."""
    target = Fraction(eps)
    k = max(0, math.floor(math.log2(1 / eps)) - 1)
    while Fraction(1, 1 << k) > target:
        k += 1
    return k + 1


def certify_circuit(c: Circuit, eps: float) -> ErrorCertificate:
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    gates = [c.theory.gate(name) for name in sorted({n.gate for n in c.nodes})]
    n, d2 = gate_norm_constants(gates)
    q = len(c.nodes)
    d = d2 + n
    return ErrorCertificate(eps, q, n, d2, d, certificate_bound(eps, q, n, d), exponent_for(eps))


def approximate_circuit(c: Circuit, eps: float) -> tuple[Circuit, ErrorCertificate]:
    """Round every gate to ``2**-d`` precision with ``d = ceil(log2(1/eps)) + 1``.

    The rounding error per entry is at most ``2**-(d+1) <= eps / 4``.
    """
    cert = certify_circuit(c, eps)
    return rounded_circuit(c, cert.exponent), cert


def product_perturbation_bound(norms: Sequence[float], deltas: Sequence[float]) -> float:
    """``D**(T-1) * sum(deltas)`` with ``D = max(norms)``.

    ``norms`` should cover both the original and perturbed factors.
    """
    if len(norms) == 0 or len(deltas) == 0:
        raise ValueError("need at least one factor")
    return max(norms) ** (len(deltas) - 1) * sum(deltas)


def bgp_margin_epsilon(q: int, D: float, N: float) -> float:
    """Approximation precision that keeps a 2/3 vs 1/3 gap at 7/12 vs 5/12."""
    if q < 1:
        raise ValueError("q must be at least 1")
    return 1.0 / (12 * q * D ** (q - 1) * N)
