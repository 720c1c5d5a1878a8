"""Adaptive circuits with classical oracles, for causal theories.

Gates are placed one at a time onto named open wires. Because the theory is
causal, the marginal probability of the outcomes so far is obtained by
capping every open wire with its deterministic effect, which lets each
outcome be sampled given the past. Between gates a program may query an
oracle on a function of earlier outcomes and branch on the answer.

Seeding: ``run_adaptive`` draws one ``Generator.random()`` per gate step from
``numpy.random.default_rng(seed)`` and picks the first outcome whose
cumulative conditional probability exceeds the draw. ``estimate_accept``
gives run ``k`` the ``k``-th child of ``numpy.random.SeedSequence(seed)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, Node, Wire
from .rules import AcceptanceRule
from .theory import Theory, check_causality

MAX_STEPS = 100_000
NULL_TOL = 1e-15


class CausalityError(RuntimeError):
    pass


class OracleDomainError(KeyError):
    pass


class StructuralError(ValueError):
    pass


class ConditioningOnNull(ZeroDivisionError):
    pass


# ---------------------------------------------------------------- oracles

@dataclass(frozen=True)
class ClassicalOracle:
    """A total Boolean function on strings: an explicit table or a named predicate."""

    table: Mapping[str, int] | None = None
    named: str | None = None
    members: frozenset = frozenset()

    NAMED = ("parity", "member", "any")

    def __post_init__(self):
        if (self.table is None) == (self.named is None):
            raise ValueError("give exactly one of table or named")
        if self.named is not None and self.named not in self.NAMED:
            raise ValueError(f"unknown named oracle {self.named!r}")

    @classmethod
    def from_json(cls, obj) -> ClassicalOracle:
        if "table" in obj:
            return cls(table={str(k): int(v) for k, v in obj["table"].items()})
        return cls(named=obj["named"], members=frozenset(str(s) for s in obj.get("set", ())))

    def __call__(self, s: str) -> int:
        if self.table is not None:
            if s not in self.table:
                raise OracleDomainError(f"oracle undefined on {s!r}")
            return int(self.table[s])
        if self.named == "parity":
            return s.count("1") % 2
        if self.named == "member":
            return int(s in self.members)
        return int("1" in s)


# ---------------------------------------------------------------- programs

@dataclass(frozen=True)
class GateStep:
    id: str
    gate: str
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()


@dataclass(frozen=True)
class QueryStep:
    id: str
    fn: str  # concat | parity | select | const
    args: tuple[str, ...] = ()
    value: str = ""
    oracle: str | None = None


@dataclass(frozen=True)
class BranchStep:
    on: str
    cases: Mapping[str, int]
    default: int | None = None


@dataclass(frozen=True)
class HaltStep:
    pass


QUERY_FUNCTIONS = ("concat", "parity", "select", "const")


def query_string(step: QueryStep, values: Mapping[str, int]) -> str:
    try:
        args = [values[a] for a in step.args]
    except KeyError as e:
        raise StructuralError(f"query {step.id!r} uses {e.args[0]!r} before it exists") from None
    if step.fn == "concat":
        return "".join(str(v) for v in args)
    if step.fn == "parity":
        return str(sum(args) % 2)
    if step.fn == "select":
        if len(args) != 1:
            raise StructuralError(f"query {step.id!r}: select takes one argument")
        return str(args[0])
    if step.fn == "const":
        return step.value
    raise StructuralError(f"unknown query function {step.fn!r}")


@dataclass(frozen=True)
class AdaptiveProgram:
    theory: Theory
    steps: tuple
    accept: AcceptanceRule

    def oracle_step_count(self) -> int:
        return sum(isinstance(s, QueryStep) for s in self.steps)


def program_from_json(obj, theory: Theory) -> AdaptiveProgram:
    steps = []
    for k, raw in enumerate(obj["steps"]):
        (kind, body), = raw.items()
        if kind == "gate":
            steps.append(GateStep(str(body["id"]), body["name"],
                                  tuple(body.get("inputs", ())), tuple(body.get("outputs", ()))))
        elif kind == "query":
            steps.append(QueryStep(str(body["id"]), body["fn"], tuple(body.get("args", ())),
                                   str(body.get("value", "")), body.get("oracle")))
        elif kind == "branch":
            steps.append(BranchStep(str(body["on"]),
                                    {str(a): int(b) for a, b in body["cases"].items()},
                                    body.get("default")))
        elif kind == "halt":
            steps.append(HaltStep())
        else:
            raise StructuralError(f"step {k}: unknown kind {kind!r}")
    rule = AcceptanceRule.from_json(obj.get("accept", {"all": True}))
    return AdaptiveProgram(theory, tuple(steps), rule)


# ---------------------------------------------------------------- prefix state

@dataclass(frozen=True)
class PrefixState:
    """Unnormalised joint state of the open wires after the gates placed so far.

    ``vector`` is a tensor with one axis per open wire, in the order of ``open``.
    """

    theory: Theory
    effects: Mapping[str, np.ndarray]
    open: tuple[str, ...] = ()
    types: tuple[str, ...] = ()
    vector: np.ndarray = field(default_factory=lambda: np.ones(()))
    placed: tuple = ()  # (GateStep, outcome)
    producers: Mapping[str, tuple[str, int]] = field(default_factory=dict)
    wires: tuple[Wire, ...] = ()
    _ucache: dict = field(default_factory=dict, compare=False, repr=False)

    def _u(self, types) -> np.ndarray:
        key = tuple(types)
        u = self._ucache.get(key)
        if u is None:
            u = self._ucache[key] = reduce(np.kron, (self.effects[t].ravel() for t in key),
                                           np.ones(1))
        return u

    def weight(self) -> float:
        """Probability of the outcomes so far: every open wire capped with ``u``."""
        return float(self._u(self.types) @ self.vector.ravel())

    def _arrange(self, step: GateStep):
        """The gate, the untouched wire positions, and the state as (inputs x rest)."""
        g = self.theory.gate(step.gate)
        if len(step.inputs) != len(g.inputs) or len(step.outputs) != len(g.outputs):
            raise StructuralError(f"step {step.id!r}: gate {g.name!r} takes {len(g.inputs)} "
                                  f"inputs and {len(g.outputs)} outputs")
        pos = {w: i for i, w in enumerate(self.open)}
        for w, want in zip(step.inputs, g.inputs):
            if w not in pos:
                raise StructuralError(f"step {step.id!r}: wire {w!r} is not open")
            if self.types[pos[w]] != want:
                raise StructuralError(f"step {step.id!r}: wire {w!r} has type "
                                      f"{self.types[pos[w]]!r}, gate wants {want!r}")
        if len(set(step.inputs)) != len(step.inputs):
            raise StructuralError(f"step {step.id!r}: a wire is used twice")
        for w in step.outputs:
            if w in pos and w not in step.inputs or step.outputs.count(w) > 1:
                raise StructuralError(f"step {step.id!r}: wire name {w!r} already open")
        first = [pos[w] for w in step.inputs]
        rest = [i for i in range(len(self.open)) if i not in first]
        moved = np.transpose(self.vector, first + rest)
        in_dim = int(np.prod(moved.shape[:len(first)], dtype=int))
        return g, rest, moved.reshape(in_dim, -1)

    def apply(self, step: GateStep, r: int, arranged=None) -> PrefixState:
        g, rest, block = arranged or self._arrange(step)
        out_dims = [self.theory.dim(t) for t in g.outputs]
        rest_dims = [self.vector.shape[i] for i in rest]
        vec = (g.outcomes[r] @ block).reshape(out_dims + rest_dims)
        producers = dict(self.producers)
        wires = list(self.wires)
        for p, w in enumerate(step.inputs):
            wires.append(Wire(producers.pop(w), (step.id, p)))
        for p, w in enumerate(step.outputs):
            producers[w] = (step.id, p)
        return PrefixState(
            self.theory, self.effects,
            tuple(step.outputs) + tuple(self.open[i] for i in rest),
            tuple(g.outputs) + tuple(self.types[i] for i in rest),
            vec, self.placed + ((step, r),), producers, tuple(wires), self._ucache)

    def circuit(self) -> Circuit:
        """The realised closed circuit; its outcome string is :meth:`outcomes`."""
        if self.open:
            raise StructuralError(f"wires left open: {list(self.open)}")
        nodes = [Node(s.id, s.gate) for s, _ in self.placed]
        return Circuit(self.theory, nodes, self.wires)

    def outcomes(self) -> tuple[int, ...]:
        return tuple(r for _, r in self.placed)


def causal_effects(t: Theory) -> Mapping[str, np.ndarray]:
    if t.causal_certificate is not None:
        return t.causal_certificate
    report = check_causality(t)
    if not report.is_causal:
        raise CausalityError(f"theory {t.name!r} is not causal; adaptive sampling is "
                             "undefined. Evaluate the closed circuit jointly instead.")
    return report.per_type_effect


def initial_state(t: Theory) -> PrefixState:
    return PrefixState(t, causal_effects(t))


def marginal_next(t: Theory, partial: PrefixState, g: GateStep) -> np.ndarray:
    """Conditional distribution of ``g``'s outcome given the placed prefix."""
    if partial.theory is not t:
        raise ValueError("prefix state belongs to a different theory")
    return _conditional(partial, g)[0]


def _conditional(partial: PrefixState, g: GateStep):
    total = partial.weight()
    if abs(total) <= NULL_TOL:
        raise ConditioningOnNull("the observed prefix has probability zero")
    arranged = partial._arrange(g)
    gate, rest, block = arranged
    capped = block @ partial._u([partial.types[i] for i in rest])
    u_out = partial._u(gate.outputs)
    return np.array([u_out @ m @ capped for m in gate.outcomes]) / total, arranged


def _choose(probs: np.ndarray, draw: float) -> int:
    p = np.clip(probs, 0.0, None)
    cum = np.cumsum(p / p.sum())
    # Round-off must never hand the tail to a zero-probability outcome.
    last = int(np.flatnonzero(p)[-1])
    cum[last:] = 1.0
    return int(np.searchsorted(cum, draw, side="right"))


# ---------------------------------------------------------------- execution

@dataclass(frozen=True)
class QueryRecord:
    id: str
    query: str
    answer: int


@dataclass(frozen=True)
class ExecutionTrace:
    outcomes: tuple[tuple[str, int], ...]
    queries: tuple[QueryRecord, ...]
    accepted: bool
    path: tuple[int, ...]
    conditionals: tuple[float, ...]
    final: PrefixState

    def to_dict(self) -> dict:
        return {"outcomes": dict(self.outcomes),
                "queries": [{"id": q.id, "query": q.query, "answer": q.answer}
                            for q in self.queries],
                "accepted": self.accepted, "path": list(self.path)}


def _oracle_for(o, step: QueryStep):
    if isinstance(o, ClassicalOracle):
        return o
    try:
        return o[step.oracle]
    except KeyError:
        raise StructuralError(f"query {step.id!r} names unknown oracle {step.oracle!r}") from None


def _next_index(step: BranchStep, values, i: int) -> int:
    if step.on not in values:
        raise StructuralError(f"branch on {step.on!r} before it is produced")
    key = str(values[step.on])
    nxt = step.cases.get(key, step.default)
    if nxt is None:
        raise StructuralError(f"branch at step {i} has no case for {key!r}")
    return int(nxt)


def _interpret(p: AdaptiveProgram, o, choose, start: PrefixState | None = None):
    """Shared interpreter; ``choose(probs)`` returns an outcome index."""
    state = start or initial_state(p.theory)
    values: dict[str, int] = {}
    queries, path, conds = [], [], []
    seen = set()
    i = steps = 0
    while 0 <= i < len(p.steps):
        steps += 1
        if steps > MAX_STEPS:
            raise StructuralError("program did not terminate")
        path.append(i)
        step = p.steps[i]
        if isinstance(step, GateStep):
            if step.id in seen:
                raise StructuralError(f"gate step {step.id!r} executed twice")
            seen.add(step.id)
            probs, arranged = _conditional(state, step)
            r = choose(probs)
            conds.append(float(probs[r]))
            state = state.apply(step, r, arranged)
            values[step.id] = r
            i += 1
        elif isinstance(step, QueryStep):
            s = query_string(step, values)
            a = _oracle_for(o, step)(s)
            queries.append(QueryRecord(step.id, s, a))
            values[step.id] = a
            i += 1
        elif isinstance(step, BranchStep):
            i = _next_index(step, values, i)
        elif isinstance(step, HaltStep):
            break
        else:
            raise StructuralError(f"step {i}: unknown step {step!r}")
    if i < 0:
        raise StructuralError(f"jump to invalid step {i}")
    if state.open:
        raise StructuralError(f"execution ended with open wires {list(state.open)}")
    accepted = p.accept.holds(values)
    return ExecutionTrace(tuple((s.id, r) for s, r in state.placed), tuple(queries),
                          accepted, tuple(path), tuple(conds), state)


def run_adaptive(t: Theory, p: AdaptiveProgram, o, seed,
                 start: PrefixState | None = None) -> ExecutionTrace:
    if p.theory is not t:
        raise ValueError("program was built for a different theory")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _interpret(p, o, lambda probs: _choose(probs, rng.random()), start)


def exact_accept_probability(p: AdaptiveProgram, o) -> float:
    """Acceptance probability summed over every execution branch."""
    causal_effects(p.theory)

    def explore(prefix: list[int]) -> float:
        # Replay the forced prefix of outcomes, then branch at the next gate.
        forced = iter(prefix)
        branch_point = {}

        def choose(probs):
            try:
                return next(forced)
            except StopIteration:
                branch_point["probs"] = probs
                raise _Branch()

        try:
            trace = _interpret(p, o, choose)
        except _Branch:
            probs = branch_point["probs"]
            return sum(explore(prefix + [r]) for r in range(len(probs)) if probs[r] > 0)
        return math.prod(trace.conditionals) if trace.accepted else 0.0

    return explore([])


class _Branch(Exception):
    pass


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class AcceptEstimate:
    frequency: float
    interval: tuple[float, float]
    n_runs: int
    n_accepted: int
    query_counts: tuple[int, ...]


def estimate_accept(t: Theory, p: AdaptiveProgram, o, n_runs: int, seed: int) -> AcceptEstimate:
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    children = np.random.SeedSequence(seed).spawn(n_runs)
    accepted = 0
    counts = []
    start = initial_state(t)
    for child in children:
        trace = run_adaptive(t, p, o, np.random.default_rng(child), start)
        accepted += trace.accepted
        counts.append(len(trace.queries))
    return AcceptEstimate(accepted / n_runs, wilson_interval(accepted, n_runs), n_runs,
                          accepted, tuple(counts))


def prefix_marginals(c_prefix_steps: Sequence[GateStep], t: Theory) -> dict:
    """Joint distribution of the outcomes of an open prefix, every open wire discarded."""
    out = {}

    def walk(state, k, acc):
        if k == len(c_prefix_steps):
            out[tuple(acc)] = state.weight()
            return
        step = c_prefix_steps[k]
        for r in range(t.gate(step.gate).n_outcomes):
            walk(state.apply(step, r), k + 1, acc + [r])

    walk(initial_state(t), 0, [])
    return out
