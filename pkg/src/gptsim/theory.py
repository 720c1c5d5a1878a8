"""Theories: typed real vector spaces and a finite set of outcome-indexed gates.

Composite systems are never declared. A wire bundle of types ``A, B`` lives in
``V_A (x) V_B`` by construction, so every theory here is tomographically local.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .linalg import as_real_matrix, kron_all, opnorm_upper

CAUSALITY_TOL = 1e-9


class Diagnostic(NamedTuple):
    code: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.message}"


@dataclass(frozen=True)
class SystemType:
    label: str
    dim: int


@dataclass(frozen=True, eq=False)
class Gate:
    """A test: one matrix per classical outcome.

    Each matrix maps the tensor product of the input spaces (columns) to the
    tensor product of the output spaces (rows). No inputs means a state, no
    outputs an effect, neither a scalar.
    """

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    outcomes: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "outcomes", tuple(as_real_matrix(m) for m in self.outcomes))

    @property
    def n_outcomes(self) -> int:
        return len(self.outcomes)

    @property
    def is_deterministic(self) -> bool:
        return len(self.outcomes) == 1

    def coarse_grained(self) -> np.ndarray:
        return sum(self.outcomes[1:], self.outcomes[0].copy())


@dataclass(frozen=True, eq=False)
class Theory:
    types: tuple[SystemType, ...]
    gates: tuple[Gate, ...]
    name: str = "theory"
    causal_certificate: Mapping[str, np.ndarray] | None = None
    _types: dict = field(init=False, repr=False)
    _gates: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "_types", {t.label: t for t in self.types})
        object.__setattr__(self, "_gates", {g.name: g for g in self.gates})

    def dim(self, label: str) -> int:
        return self._types[label].dim

    def has_type(self, label: str) -> bool:
        return label in self._types

    def gate(self, name: str) -> Gate:
        try:
            return self._gates[name]
        except KeyError:
            raise KeyError(f"theory {self.name!r} has no gate {name!r}") from None

    def has_gate(self, name: str) -> bool:
        return name in self._gates

    def bundle_dim(self, labels: Sequence[str]) -> int:
        return int(np.prod([self.dim(lb) for lb in labels])) if labels else 1

    def replace_gates(self, gates, name: str | None = None) -> Theory:
        return Theory(self.types, tuple(gates), name or self.name, self.causal_certificate)

    def deterministic_effect(self, label: str) -> np.ndarray:
        """Row vector ``u`` for ``label``; requires a causal certificate."""
        if self.causal_certificate is None or label not in self.causal_certificate:
            raise ValueError(f"no deterministic effect known for type {label!r}")
        return self.causal_certificate[label]


def validate_theory(t: Theory) -> list[Diagnostic]:
    diags = []
    seen = set()
    for st in t.types:
        if st.label in seen:
            diags.append(Diagnostic("duplicate-type", f"type {st.label!r} declared twice"))
        seen.add(st.label)
        if not isinstance(st.dim, int) or st.dim < 1:
            diags.append(Diagnostic("bad-dim", f"type {st.label!r} has dimension {st.dim}"))
    names = set()
    for g in t.gates:
        if g.name in names:
            diags.append(Diagnostic("duplicate-gate", f"gate {g.name!r} declared twice"))
        names.add(g.name)
        missing = [lb for lb in g.inputs + g.outputs if not t.has_type(lb)]
        if missing:
            diags.append(Diagnostic("unknown-type",
                                    f"gate {g.name!r} references undeclared types {missing}"))
            continue
        if not g.outcomes:
            diags.append(Diagnostic("no-outcomes", f"gate {g.name!r} has no outcomes"))
        want = (t.bundle_dim(g.outputs), t.bundle_dim(g.inputs))
        for r, m in enumerate(g.outcomes):
            if m.shape != want:
                diags.append(Diagnostic(
                    "shape", f"gate {g.name!r} outcome {r} has shape {m.shape}, expected {want}"))
    if t.causal_certificate is not None and not diags:
        report = check_causality(t)
        if not report.is_causal:
            diags.append(Diagnostic("certificate",
                                    "declared causal certificate fails the causality check"))
        else:
            for lb, u in t.causal_certificate.items():
                ref = report.per_type_effect.get(lb)
                if ref is None or not np.allclose(u, ref, atol=CAUSALITY_TOL):
                    diags.append(Diagnostic(
                        "certificate", f"declared deterministic effect for {lb!r} is wrong"))
    return diags


@dataclass(frozen=True)
class CausalityReport:
    is_causal: bool
    per_type_effect: dict[str, np.ndarray]
    violations: list[tuple[str, float]]
    undetermined: list[str]
    diagnostics: list[str]


def check_causality(t: Theory, tol: float = CAUSALITY_TOL) -> CausalityReport:
    """Look for a unique deterministic effect per type and test every gate against it.

    Candidate effects come from complete single-system measurements. A gate
    ``G: A -> B`` passes when ``u_B . sum_r G_r == u_A``.
    """
    effects: dict[str, np.ndarray] = {}
    violations: list[tuple[str, float]] = []
    undetermined: list[str] = []
    diagnostics: list[str] = []
    for st in t.types:
        candidates = [(g.name, g.coarse_grained()) for g in t.gates
                      if g.inputs == (st.label,) and not g.outputs]
        if not candidates:
            undetermined.append(st.label)
            diagnostics.append(f"type {st.label!r}: undetermined deterministic effect "
                               "(no measurement gate)")
            continue
        ref_name, ref = candidates[0]
        effects[st.label] = ref
        for name, s in candidates[1:]:
            resid = float(np.max(np.abs(s - ref)))
            if resid > tol:
                violations.append((name, resid))
                diagnostics.append(f"type {st.label!r}: measurement {name!r} sums to a different "
                                   f"effect than {ref_name!r} (residual {resid:.3g})")
    for g in t.gates:
        if any(lb in undetermined for lb in g.inputs + g.outputs):
            continue
        if not g.outputs and len(g.inputs) == 1:
            continue  # defined u_A, or already compared above
        u_out = kron_all(effects[lb] for lb in g.outputs)
        u_in = kron_all(effects[lb] for lb in g.inputs)
        resid = float(np.max(np.abs(u_out @ g.coarse_grained() - u_in)))
        if resid > tol:
            violations.append((g.name, resid))
            diagnostics.append(f"gate {g.name!r} does not preserve the deterministic effect "
                               f"(residual {resid:.3g})")
    causal = not violations and not undetermined
    return CausalityReport(causal, effects, violations, undetermined, diagnostics)


def certify(t: Theory) -> Theory:
    """Attach the causal certificate if ``t`` passes the causality check."""
    report = check_causality(t)
    if not report.is_causal:
        return t
    return Theory(t.types, t.gates, t.name, report.per_type_effect)


# ---------------------------------------------------------------- classical

def builtin_classical(n_levels: int = 2) -> Theory:
    if n_levels < 2:
        raise ValueError("a classical system needs at least two levels")
    n = n_levels
    lb = f"c{n}"
    eye = np.eye(n)
    gates = []
    for i in range(n):
        gates.append(Gate(f"point{i}", (), (lb,), [eye[:, [i]]]))
    gates.append(Gate("uniform", (), (lb,), [np.full((n, 1), 1.0 / n)]))
    gates.append(Gate("identity", (lb,), (lb,), [eye]))
    gates.append(Gate("shift", (lb,), (lb,), [np.roll(eye, 1, axis=0)]))
    p = 0.25
    noise = (1 - p) * eye + p / (n - 1) * (np.ones((n, n)) - eye)
    gates.append(Gate("noise", (lb,), (lb,), [noise]))
    # Non-destructive observation: outcome i keeps the system in state i.
    gates.append(Gate("observe", (lb,), (lb,), [np.outer(eye[i], eye[i]) for i in range(n)]))
    add = np.zeros((n * n, n * n))
    for a, b in itertools.product(range(n), repeat=2):
        add[a * n + (a + b) % n, a * n + b] = 1.0
    gates.append(Gate("add", (lb, lb), (lb, lb), [add]))
    copy = np.zeros((n * n, n))
    for a in range(n):
        copy[a * n + a, a] = 1.0
    gates.append(Gate("copy", (lb,), (lb, lb), [copy]))
    gates.append(Gate("measure", (lb,), (), [eye[[i], :] for i in range(n)]))
    gates.append(Gate("coin", (), (), [[[0.5]], [[0.5]]]))
    return certify(Theory((SystemType(lb, n),), gates, f"classical{n}"))


# ---------------------------------------------------------------- quantum

_PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
QUBIT = "qubit"


def hermitian_basis(n_qubits: int) -> list[np.ndarray]:
    """Orthonormal basis ``(I, X, Y, Z)/sqrt(2)`` per qubit, qubit 0 most significant."""
    single = [p / np.sqrt(2) for p in _PAULI]
    out = []
    for combo in itertools.product(single, repeat=n_qubits):
        out.append(reduce(np.kron, combo, np.eye(1, dtype=complex)))
    return out


def _n_qubits(d: int) -> int:
    n = d.bit_length() - 1
    if d < 2 or 1 << n != d:
        raise ValueError(f"Hilbert dimension {d} is not a power of two")
    return n


def operator_to_vector(rho: np.ndarray) -> np.ndarray:
    """Coordinates of a Hermitian operator (as a state column)."""
    basis = hermitian_basis(_n_qubits(rho.shape[0]))
    coords = np.array([np.trace(b @ rho) for b in basis])
    return np.real(coords).reshape(-1, 1)


def effect_to_row(e: np.ndarray) -> np.ndarray:
    """Row vector of the functional ``rho -> Tr(e rho)``."""
    basis = hermitian_basis(_n_qubits(e.shape[0]))
    return np.real(np.array([np.trace(e @ b) for b in basis])).reshape(1, -1)


def cp_map_to_transfer(kraus_ops, tol: float = 1e-9) -> np.ndarray:
    """Real matrix of ``rho -> sum_k K rho K^dag`` in the normalised Pauli basis."""
    ks = [np.asarray(k, dtype=complex) for k in kraus_ops]
    if not ks:
        raise ValueError("need at least one Kraus operator")
    d = ks[0].shape[0]
    if any(k.shape != (d, d) for k in ks):
        raise ValueError("Kraus operators must be square and of equal size")
    total = sum(k.conj().T @ k for k in ks)
    if np.max(np.linalg.eigvalsh(total)) > 1 + tol:
        raise ValueError("Kraus operators are not trace non-increasing")
    basis = hermitian_basis(_n_qubits(d))
    images = [sum(k @ b @ k.conj().T for k in ks) for b in basis]
    t = np.array([[np.trace(ba @ img) for img in images] for ba in basis])
    if np.max(np.abs(t.imag)) > tol:
        raise ValueError("map is not Hermiticity preserving; not completely positive")
    t = t.real.copy()
    t[np.abs(t) < 1e-15] = 0.0
    return t


def _unitary(*rows) -> np.ndarray:
    return np.array(rows, dtype=complex)


def builtin_quantum(n_qubits_max: int = 2) -> Theory:
    if n_qubits_max not in (1, 2, 3):
        raise ValueError("n_qubits_max must be 1, 2 or 3")
    q = QUBIT
    ket0 = np.array([1, 0], dtype=complex)
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    proj = lambda v: np.outer(v, v.conj())  # noqa: E731
    s = 1 / np.sqrt(2)
    gates = [
        Gate("prep0", (), (q,), [operator_to_vector(proj(ket0))]),
        Gate("prepplus", (), (q,), [operator_to_vector(proj(plus))]),
        Gate("H", (q,), (q,), [cp_map_to_transfer([_unitary([s, s], [s, -s])])]),
        Gate("T", (q,), (q,), [cp_map_to_transfer([np.diag([1, np.exp(1j * np.pi / 4)])])]),
        Gate("X", (q,), (q,), [cp_map_to_transfer([_PAULI[1]])]),
        Gate("Z", (q,), (q,), [cp_map_to_transfer([_PAULI[3]])]),
        Gate("measZ", (q,), (), [effect_to_row(proj(np.eye(2)[i])) for i in range(2)]),
    ]
    if n_qubits_max >= 2:
        bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
        cnot = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
        gates.append(Gate("bell", (), (q, q), [operator_to_vector(proj(bell))]))
        gates.append(Gate("CNOT", (q, q), (q, q), [cp_map_to_transfer([cnot])]))
    if n_qubits_max >= 3:
        toffoli = np.eye(8, dtype=complex)[[0, 1, 2, 3, 4, 5, 7, 6]]
        gates.append(Gate("CCX", (q, q, q), (q, q, q), [cp_map_to_transfer([toffoli])]))
    return certify(Theory((SystemType(q, 4),), gates, f"qubits{n_qubits_max}"))


# ---------------------------------------------------------------- box world

GBIT = "gbit"


def pr_box_state() -> np.ndarray:
    """Bipartite gbit state with P(ab|xy) = 1/2 when a xor b == x*y.

    Coordinates are values on products of the fiducial functionals
    (a=0|x=0), (a=0|x=1) and the unit functional.
    """
    def p(a, b, x, y):
        return 0.5 if (a ^ b) == (x & y) else 0.0

    s = np.empty((3, 3))
    for i, j in itertools.product(range(3), repeat=2):
        if i < 2 and j < 2:
            s[i, j] = p(0, 0, i, j)
        elif i < 2:
            s[i, j] = sum(p(0, b, i, 0) for b in (0, 1))
        elif j < 2:
            s[i, j] = sum(p(a, 0, 0, j) for a in (0, 1))
        else:
            s[i, j] = 1.0
    return s.reshape(9, 1)


def builtin_boxworld() -> Theory:
    g = GBIT
    gates = []
    for a0, a1 in itertools.product((0, 1), repeat=2):
        gates.append(Gate(f"det{a0}{a1}", (), (g,), [[[1 - a0], [1 - a1], [1]]]))
    gates.append(Gate("pr", (), (g, g), [pr_box_state()]))
    gates.append(Gate("measX0", (g,), (), [[[1, 0, 0]], [[-1, 0, 1]]]))
    gates.append(Gate("measX1", (g,), (), [[[0, 1, 0]], [[0, -1, 1]]]))
    gates.append(Gate("identity", (g,), (g,), [np.eye(3)]))
    gates.append(Gate("flip", (g,), (g,), [[[-1, 0, 1], [0, -1, 1], [0, 0, 1]]]))
    gates.append(Gate("swapx", (g,), (g,), [[[0, 1, 0], [1, 0, 0], [0, 0, 1]]]))
    return certify(Theory((SystemType(g, 3),), gates, "boxworld"))


def noncausal_counterexample() -> Theory:
    """Two complete measurements on one bit that disagree on the deterministic effect."""
    lb = "b"
    gates = [
        Gate("point0", (), (lb,), [[[1], [0]]]),
        Gate("point1", (), (lb,), [[[0], [1]]]),
        Gate("yes0", (lb,), (), [[[1, 0]]]),
        Gate("yes1", (lb,), (), [[[0, 1]]]),
    ]
    return Theory((SystemType(lb, 2),), gates, "noncausal")


BUILTINS = {
    "classical2": lambda: builtin_classical(2),
    "classical3": lambda: builtin_classical(3),
    "classical4": lambda: builtin_classical(4),
    "qubits1": lambda: builtin_quantum(1),
    "qubits2": lambda: builtin_quantum(2),
    "qubits3": lambda: builtin_quantum(3),
    "boxworld": builtin_boxworld,
    "noncausal": noncausal_counterexample,
}


def builtin(name: str) -> Theory:
    if name.startswith("builtin:"):
        name = name[len("builtin:"):]
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin theory {name!r}; "
                       f"choose from {sorted(BUILTINS)}") from None


def gate_norm_constants(gates: Sequence[Gate]) -> tuple[int, float]:
    """Largest outcome-matrix size and largest certified operator norm."""
    n = max(m.size for g in gates for m in g.outcomes)
    d = max(opnorm_upper(m) for g in gates for m in g.outcomes)
    return n, d
