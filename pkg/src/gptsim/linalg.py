"""Dense real and exact dyadic matrix arithmetic.

Real matrices are plain ``numpy`` float64 arrays of rank 2. Dyadic matrices
carry integer numerators (Python ints inside an object array, so nothing is
ever rounded) over one shared power-of-two denominator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np

MAX_ENTRIES = 2**20
MAX_EXPONENT = 256


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class SizeError(ValueError):
    """A result would exceed the configured entry budget."""


def as_real_matrix(x) -> np.ndarray:
    """Coerce ``x`` to a finite float64 matrix, promoting vectors to rows."""
    a = np.array(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    a.setflags(write=False)
    return a


def _check_size(rows: int, cols: int, max_entries: int) -> None:
    if rows * cols > max_entries:
        raise SizeError(
            f"result of shape ({rows}, {cols}) exceeds {max_entries} entries")


def kron(a: np.ndarray, b: np.ndarray, max_entries: int = MAX_ENTRIES) -> np.ndarray:
    _check_size(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1], max_entries)
    return np.kron(a, b)


def kron_all(factors, max_entries: int = MAX_ENTRIES) -> np.ndarray:
    factors = list(factors)
    if not factors:
        return np.ones((1, 1))
    return reduce(lambda x, y: kron(x, y, max_entries), factors)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if a.shape[1] != v.shape[0]:
        raise ShapeError(f"cannot apply {a.shape} to vector of length {v.shape[0]}")
    return a @ v


def entrywise_opnorm_bound(rows: int, cols: int, eps: float) -> float:
    """Operator-norm bound for a ``rows x cols`` matrix with entries in [-eps, eps]."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return rows * cols * eps


def opnorm_upper(a: np.ndarray) -> float:
    # Frobenius norm dominates the spectral norm.
    return float(np.sqrt(np.sum(np.square(a, dtype=np.float64))))


@dataclass(frozen=True, eq=False)
class Dyadic:
    """The rational ``numerator / 2**exponent``; compares by value."""

    numerator: int
    exponent: int = 0

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("dyadic exponent must be non-negative")
        object.__setattr__(self, "numerator", int(self.numerator))
        object.__setattr__(self, "exponent", int(self.exponent))

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def aligned(self, exponent: int) -> int:
        """Numerator rescaled to a larger common exponent."""
        if exponent < self.exponent:
            raise ValueError("can only align to a larger exponent")
        return self.numerator << (exponent - self.exponent)

    def __float__(self) -> float:
        return self.numerator / (1 << self.exponent)

    def __eq__(self, other):
        if isinstance(other, Dyadic):
            e = max(self.exponent, other.exponent)
            return self.aligned(e) == other.aligned(e)
        if isinstance(other, (int, Fraction)):
            return self.as_fraction() == other
        return NotImplemented

    def __hash__(self):
        return hash(self.as_fraction())

    def __add__(self, other: Dyadic) -> Dyadic:
        e = max(self.exponent, other.exponent)
        return Dyadic(self.aligned(e) + other.aligned(e), e)

    def __mul__(self, other: Dyadic) -> Dyadic:
        return Dyadic(self.numerator * other.numerator, self.exponent + other.exponent)

    def __repr__(self):
        return f"Dyadic({self.numerator}/2^{self.exponent})"


# A circuit amplitude f/2^p is the same kind of number.
ExactAmplitude = Dyadic


def _int_array(values, rows: int, cols: int) -> np.ndarray:
    out = np.empty((rows, cols), dtype=object)
    flat = list(values)
    if len(flat) != rows * cols:
        raise ShapeError(f"{len(flat)} numerators for a {rows}x{cols} matrix")
    for k, v in enumerate(flat):
        out[k // cols, k % cols] = int(v)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DyadicMatrix:
    """Integer matrix over a single shared denominator ``2**exponent``."""

    numerators: np.ndarray
    exponent: int = 0

    def __post_init__(self):
        n = self.numerators
        if not (isinstance(n, np.ndarray) and n.dtype == object and n.ndim == 2):
            n = np.asarray(n, dtype=object)
            if n.ndim != 2:
                raise ShapeError("dyadic matrix needs a 2-d numerator array")
            n = _int_array(n.ravel().tolist(), *n.shape)
            object.__setattr__(self, "numerators", n)
        if self.exponent < 0:
            raise ValueError("dyadic exponent must be non-negative")

    @classmethod
    def from_rows(cls, rows, exponent: int = 0) -> DyadicMatrix:
        rows = [list(r) for r in rows]
        return cls(_int_array([v for r in rows for v in r], len(rows), len(rows[0])), exponent)

    @classmethod
    def identity(cls, n: int) -> DyadicMatrix:
        return cls(_int_array((int(i == j) for i in range(n) for j in range(n)), n, n), 0)

    @classmethod
    def from_integer_matrix(cls, m: np.ndarray) -> DyadicMatrix:
        """Exact embedding of an integer-valued float matrix (e.g. a permutation)."""
        if not np.all(m == np.round(m)):
            raise ValueError("matrix is not integer valued")
        return cls(_int_array((int(v) for v in m.ravel()), *m.shape), 0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.numerators.shape

    @property
    def rows(self) -> int:
        return self.numerators.shape[0]

    @property
    def cols(self) -> int:
        return self.numerators.shape[1]

    def entry(self, i: int, j: int) -> Dyadic:
        return Dyadic(self.numerators[i, j], self.exponent)

    def to_float(self) -> np.ndarray:
        scale = 1 << self.exponent
        return np.array([[v / scale for v in row] for row in self.numerators.tolist()],
                        dtype=np.float64)

    def with_exponent(self, exponent: int) -> DyadicMatrix:
        if exponent < self.exponent:
            raise ValueError("can only raise the shared exponent")
        shift = exponent - self.exponent
        return DyadicMatrix(_int_array((v << shift for v in self.numerators.ravel()),
                                       *self.shape), exponent)

    def __eq__(self, other):
        if not isinstance(other, DyadicMatrix):
            return NotImplemented
        if self.shape != other.shape:
            return False
        e = max(self.exponent, other.exponent)
        return bool(np.all(self.with_exponent(e).numerators == other.with_exponent(e).numerators))

    __hash__ = None

    def __repr__(self):
        return f"DyadicMatrix(shape={self.shape}, exponent={self.exponent})"


def round_to_dyadic(m: np.ndarray, d: int, max_exponent: int = MAX_EXPONENT) -> DyadicMatrix:
    """Nearest ``c / 2**d`` to every entry; error at most ``2**-(d+1)``."""
    if d < 0 or d > max_exponent:
        raise ValueError(f"exponent {d} outside [0, {max_exponent}]")
    # ldexp is exact and round() on a float returns the nearest int exactly.
    nums = (int(round(math.ldexp(float(x), d))) for x in np.asarray(m).ravel())
    return DyadicMatrix(_int_array(nums, *np.asarray(m).shape), d)


def dyadic_matmul(a: DyadicMatrix, b: DyadicMatrix) -> DyadicMatrix:
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    prod = a.numerators.dot(b.numerators)
    return DyadicMatrix(_int_array(prod.ravel().tolist(), a.rows, b.cols),
                        a.exponent + b.exponent)


def dyadic_kron(a: DyadicMatrix, b: DyadicMatrix,
                max_entries: int = MAX_ENTRIES) -> DyadicMatrix:
    _check_size(a.rows * b.rows, a.cols * b.cols, max_entries)
    prod = np.kron(a.numerators, b.numerators)
    return DyadicMatrix(_int_array(prod.ravel().tolist(), *prod.shape),
                        a.exponent + b.exponent)


def dyadic_kron_all(factors, max_entries: int = MAX_ENTRIES) -> DyadicMatrix:
    factors = list(factors)
    if not factors:
        return DyadicMatrix.identity(1)
    return reduce(lambda x, y: dyadic_kron(x, y, max_entries), factors)


def permutation_matrix(dims, order) -> np.ndarray:
    """0/1 matrix reordering tensor factors.

    Maps ``v_0 (x) ... (x) v_{m-1}`` (factor ``k`` of dimension ``dims[k]``) to
    ``v_{order[0]} (x) v_{order[1]} (x) ...``.
    """
    dims = list(dims)
    total = int(np.prod(dims)) if dims else 1
    if sorted(order) != list(range(len(dims))):
        raise ValueError(f"{order} is not a permutation of {len(dims)} factors")
    if not dims:
        return np.ones((1, 1))
    src = np.arange(total).reshape(dims).transpose(order).ravel()
    p = np.zeros((total, total))
    p[np.arange(total), src] = 1.0
    return p
