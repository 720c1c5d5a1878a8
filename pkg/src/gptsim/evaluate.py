"""Outcome probabilities of closed circuits.

Three engines share one foliation:

* ``dense``   multiplies layer matrices right to left;
* ``pathsum`` embeds the layers as square matrices and sums products of
  entries one index path at a time, keeping only the current path and a
  running total;
* ``exact``   rounds every gate to ``c / 2**d`` and runs the path sum over
  integers, returning the amplitude as ``f / 2**p`` with ``p = d * gates``.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .circuit import Circuit, Foliation, check_outcome, enumerate_outcomes, foliate, \
    layer_matrix, layer_matrix_dyadic
from .linalg import MAX_EXPONENT, Dyadic, ExactAmplitude, round_to_dyadic
from .rules import AcceptanceRule

DEFAULT_PATH_CAP = 2**26
ENGINES = ("dense", "pathsum", "exact")
DEFAULT_EXPONENT = 20


class PathCapExceeded(RuntimeError):
    pass


class PostSelectionError(RuntimeError):
    pass


class BelowThreshold(PostSelectionError):
    def __init__(self, p_s, threshold):
        super().__init__(f"post-selection below threshold: P(S) = {float(p_s):.6g} "
                         f"< {threshold:.6g}")
        self.p_s = p_s
        self.threshold = threshold


class DivisionImpossible(PostSelectionError):
    def __init__(self):
        super().__init__("post-selected event has probability zero; "
                         "the conditional is undefined")
        self.p_s = 0.0


_foliations: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def foliation_of(c: Circuit) -> Foliation:
    f = _foliations.get(c)
    if f is None:
        f = _foliations[c] = foliate(c)
    return f


# ---------------------------------------------------------------- dense

def eval_dense(c: Circuit, z: Sequence[int], foliation: Foliation | None = None) -> float:
    z = check_outcome(c, z)
    f = foliation or foliation_of(c)
    v = np.ones((1, 1))
    for k in range(f.n_layers):
        v = layer_matrix(f, k, z, c) @ v
    return float(v[0, 0])


# ---------------------------------------------------------------- embedding

@dataclass(frozen=True)
class EmbeddedChain:
    """Square ``dim x dim`` layer matrices with the amplitude at entry (0, 0)."""

    dim: int
    matrices: tuple

    def value(self):
        b = np.zeros((self.dim, 1), dtype=self.matrices[0].dtype)
        b[0, 0] = 1
        v = b
        for m in self.matrices:
            v = m @ v
        return (b.T @ v)[0, 0]


def _pad(m: np.ndarray, dim: int, dtype) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=dtype)
    if dtype is object:
        out[:] = 0
    out[: m.shape[0], : m.shape[1]] = m
    return out


def embed_chain(f: Foliation, z: Sequence[int], c: Circuit) -> EmbeddedChain:
    z = check_outcome(c, z)
    dim = max(f.boundary_dims + (1,))
    mats = tuple(_pad(layer_matrix(f, k, z, c), dim, np.float64) for k in range(f.n_layers))
    return EmbeddedChain(dim, mats)


def _path_count(dim: int, n_layers: int) -> int:
    return dim ** max(n_layers - 1, 0)


def path_sum(matrices: Sequence[np.ndarray]):
    """Sum over index paths ``0 -> i_1 -> ... -> i_{q-1} -> 0`` of entry products.

    Memory is the current path plus one accumulator. Paths whose partial
    product is already zero are skipped; the visiting order is fixed
    (lexicographic), so float results are reproducible.
    """
    q = len(matrices)
    # Nonzero entries of each column, by row.
    columns = []
    for m in matrices:
        rows = m.tolist()
        columns.append([[(i, row[j]) for i, row in enumerate(rows) if row[j] != 0]
                        for j in range(len(rows[0]))])
    total = 0

    def walk(level, j, partial):
        nonlocal total
        if level == q - 1:
            for i, v in columns[level][j]:
                if i == 0:
                    total += partial * v
            return
        for i, v in columns[level][j]:
            walk(level + 1, i, partial * v)

    walk(0, 0, 1)
    return total


def eval_pathsum(c: Circuit, z: Sequence[int], path_cap: int = DEFAULT_PATH_CAP) -> float:
    f = foliation_of(c)
    dim = max(f.boundary_dims + (1,))
    n = _path_count(dim, f.n_layers)
    if n > path_cap:
        raise PathCapExceeded(f"{n} index paths exceed the cap of {path_cap}; "
                              "use the dense engine")
    chain = embed_chain(f, z, c)
    return float(path_sum(chain.matrices))


# ---------------------------------------------------------------- exact

def rounded_gates(c: Circuit, d: int) -> dict:
    """``(gate name, outcome) -> DyadicMatrix`` for every gate used in ``c``."""
    out = {}
    for name in {n.gate for n in c.nodes}:
        g = c.theory.gate(name)
        for r, m in enumerate(g.outcomes):
            out[(name, r)] = round_to_dyadic(m, d)
    return out


def rounded_circuit(c: Circuit, d: int) -> Circuit:
    """The same wiring over float copies of the rounded gate matrices."""
    from .theory import Gate
    table = rounded_gates(c, d)
    used = {n.gate for n in c.nodes}
    gates = []
    for g in c.theory.gates:
        if g.name in used:
            gates.append(Gate(g.name, g.inputs, g.outputs,
                              [table[(g.name, r)].to_float() for r in range(g.n_outcomes)]))
        else:
            gates.append(g)
    return c.with_theory(c.theory.replace_gates(gates, f"{c.theory.name}~d{d}"))


def _exact_amplitude(c: Circuit, z, d: int, table: dict, path_cap: int) -> ExactAmplitude:
    z = check_outcome(c, z)
    f = foliation_of(c)
    dim = max(f.boundary_dims + (1,))
    n = _path_count(dim, f.n_layers)
    if n > path_cap:
        raise PathCapExceeded(f"{n} index paths exceed the cap of {path_cap}")
    layers = [layer_matrix_dyadic(f, k, z, c, table) for k in range(f.n_layers)]
    p = sum(m.exponent for m in layers)
    assert p == d * len(c.nodes)
    padded = [_pad(m.numerators, dim, object) for m in layers]
    return Dyadic(int(path_sum(padded)), p)


def eval_exact(c: Circuit, z: Sequence[int], d: int = DEFAULT_EXPONENT,
               path_cap: int = DEFAULT_PATH_CAP) -> ExactAmplitude:
    if not 0 <= d <= MAX_EXPONENT:
        raise ValueError(f"exponent {d} outside [0, {MAX_EXPONENT}]")
    return _exact_amplitude(c, z, d, rounded_gates(c, d), path_cap)


# ---------------------------------------------------------------- acceptance

def _names(c: Circuit) -> list[str]:
    return [n.id for n in c.nodes]


def probability(c: Circuit, z, engine: str = "dense", exponent: int = DEFAULT_EXPONENT):
    if engine == "dense":
        return eval_dense(c, z)
    if engine == "pathsum":
        return eval_pathsum(c, z)
    if engine == "exact":
        return eval_exact(c, z, exponent)
    raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")


def distribution(c: Circuit, engine: str = "dense", exponent: int = DEFAULT_EXPONENT,
                 cap: int | None = None) -> dict:
    """Outcome string -> probability (or exact amplitude), lexicographic."""
    if engine == "exact":
        table = rounded_gates(c, exponent)
        return {z: _exact_amplitude(c, z, exponent, table, DEFAULT_PATH_CAP)
                for z in enumerate_outcomes(c, cap)}
    return {z: probability(c, z, engine) for z in enumerate_outcomes(c, cap)}


def accept_amplitude_exact(c: Circuit, rule: AcceptanceRule, d: int = DEFAULT_EXPONENT,
                           cap: int | None = None) -> ExactAmplitude:
    table = rounded_gates(c, d)
    names = _names(c)
    total = 0
    for z in enumerate_outcomes(c, cap):
        if rule.accepts(z, names):
            total += _exact_amplitude(c, z, d, table, DEFAULT_PATH_CAP).numerator
    return Dyadic(total, d * len(c.nodes))


def accept_probability(c: Circuit, rule: AcceptanceRule, engine: str = "dense",
                       exponent: int = DEFAULT_EXPONENT, cap: int | None = None) -> float:
    if engine == "exact":
        return float(accept_amplitude_exact(c, rule, exponent, cap))
    names = _names(c)
    total = 0.0
    for z in enumerate_outcomes(c, cap):
        if rule.accepts(z, names):
            total += probability(c, z, engine)
    return total


@dataclass(frozen=True)
class PostSelection:
    selector: AcceptanceRule
    threshold: float = 1e-12

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("post-selection threshold must be positive")


@dataclass(frozen=True)
class ExactRatio:
    """Conditional amplitude ``l / h`` of two exact amplitudes."""

    l: int  # noqa: E741
    h: int
    joint: ExactAmplitude
    selected: ExactAmplitude

    def as_fraction(self) -> Fraction:
        return Fraction(self.l, self.h)

    def __float__(self):
        return self.l / self.h


def _joint_and_selected(c, rule, s, engine, exponent, cap):
    names = _names(c)
    if engine == "exact":
        table = rounded_gates(c, exponent)
        joint = sel = 0
        for z in enumerate_outcomes(c, cap):
            if s.selector.accepts(z, names):
                f = _exact_amplitude(c, z, exponent, table, DEFAULT_PATH_CAP).numerator
                sel += f
                if rule.accepts(z, names):
                    joint += f
        p = exponent * len(c.nodes)
        return Dyadic(joint, p), Dyadic(sel, p)
    joint = sel = 0.0
    for z in enumerate_outcomes(c, cap):
        if s.selector.accepts(z, names):
            v = probability(c, z, engine)
            sel += v
            if rule.accepts(z, names):
                joint += v
    return joint, sel


def selected_probability(c, s: PostSelection, engine="dense", exponent=DEFAULT_EXPONENT,
                         cap=None):
    return _joint_and_selected(c, AcceptanceRule.never(), s, engine, exponent, cap)[1]


def postselect(c: Circuit, rule: AcceptanceRule, s: PostSelection, engine: str = "dense",
               exponent: int = DEFAULT_EXPONENT, cap: int | None = None):
    """``P(accept and S) / P(S)``, refusing when ``P(S)`` is below the threshold.

    With the exact engine the result is an :class:`ExactRatio` built from
    ``joint = f / 2**p`` and ``P(S) = g / 2**q`` as ``l = 2**q f``,
    ``h = 2**p g``.
    """
    joint, sel = _joint_and_selected(c, rule, s, engine, exponent, cap)
    if engine == "exact":
        if sel.numerator == 0:
            raise DivisionImpossible()
        if sel.as_fraction() < Fraction(s.threshold):
            raise BelowThreshold(float(sel), s.threshold)
        return ExactRatio(joint.numerator << sel.exponent, sel.numerator << joint.exponent,
                          joint, sel)
    if sel == 0:
        raise DivisionImpossible()
    if sel < s.threshold:
        raise BelowThreshold(sel, s.threshold)
    return joint / sel


IN_LANGUAGE = "in-language"
OUT_OF_LANGUAGE = "out-of-language"
UNDECIDED = "undecided"


def verdict(p: float, thresholds=(2 / 3, 1 / 3), tol: float = 1e-12) -> str:
    hi, lo = thresholds
    if p >= hi - tol:
        return IN_LANGUAGE
    if p <= lo + tol:
        return OUT_OF_LANGUAGE
    return UNDECIDED


def decide_bgp(family, thresholds=(2 / 3, 1 / 3), engine: str = "dense",
               tol: float = 1e-12) -> list[str]:
    """Verdict per ``(circuit, rule)`` pair against the 2/3 vs 1/3 thresholds."""
    return [verdict(accept_probability(c, a, engine), thresholds, tol) for c, a in family]

