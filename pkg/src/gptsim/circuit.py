"""Closed circuits, their validation, and foliation into a chain of layer matrices."""
from __future__ import annotations

import itertools
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .linalg import MAX_ENTRIES, DyadicMatrix, dyadic_kron_all, dyadic_matmul, kron_all, \
    permutation_matrix
from .theory import Diagnostic, Theory

DEFAULT_MAX_ENUM = 2**24

Port = tuple[str, int]


class CircuitError(ValueError):
    pass


class EnumerationTooLarge(CircuitError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    gate: str


@dataclass(frozen=True)
class Wire:
    src: Port  # (node id, output port)
    dst: Port  # (node id, input port)


@dataclass(frozen=True, eq=False)
class Circuit:
    theory: Theory
    nodes: tuple[Node, ...]
    wires: tuple[Wire, ...]
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "wires", tuple(self.wires))

    def node_index(self) -> dict[str, int]:
        return {n.id: k for k, n in enumerate(self.nodes)}

    def gate_of(self, node_id: str):
        return self.theory.gate(self.node_map()[node_id].gate)

    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    def outcome_counts(self) -> list[int]:
        return [self.theory.gate(n.gate).n_outcomes for n in self.nodes]

    def with_theory(self, theory: Theory) -> Circuit:
        return Circuit(theory, self.nodes, self.wires, self.name)


def chain(theory: Theory, gate_names: Sequence[str], name: str | None = None) -> Circuit:
    """Sequential composition of single-wire gates, first element first."""
    nodes = [Node(f"g{k}", g) for k, g in enumerate(gate_names)]
    wires = [Wire((f"g{k}", 0), (f"g{k + 1}", 0)) for k in range(len(nodes) - 1)]
    return Circuit(theory, nodes, wires, name)


def parallel(c1: Circuit, c2: Circuit) -> Circuit:
    """Side-by-side composition of two closed circuits over the same theory."""
    if c1.theory is not c2.theory:
        raise CircuitError("parallel composition needs a shared theory object")

    def tag(c, prefix):
        nodes = [Node(prefix + n.id, n.gate) for n in c.nodes]
        wires = [Wire((prefix + w.src[0], w.src[1]), (prefix + w.dst[0], w.dst[1]))
                 for w in c.wires]
        return nodes, wires

    n1, w1 = tag(c1, "L.")
    n2, w2 = tag(c2, "R.")
    return Circuit(c1.theory, n1 + n2, w1 + w2)


def validate_circuit(c: Circuit, t: Theory | None = None) -> list[Diagnostic]:
    t = t or c.theory
    diags = []
    if not c.nodes:
        return [Diagnostic("empty", "circuit has no gates")]
    ids = {}
    for n in c.nodes:
        if n.id in ids:
            diags.append(Diagnostic("duplicate-id", f"node id {n.id!r} used twice"))
        if not t.has_gate(n.gate):
            diags.append(Diagnostic("unknown-gate", f"node {n.id!r}: no gate {n.gate!r}"))
        ids[n.id] = n
    if diags:
        return diags
    out_uses = defaultdict(int)
    in_uses = defaultdict(int)
    for w in c.wires:
        ok = True
        for (nid, port), side in ((w.src, "outputs"), (w.dst, "inputs")):
            if nid not in ids:
                diags.append(Diagnostic("unknown-node", f"wire {w} references node {nid!r}"))
                ok = False
                continue
            ports = getattr(t.gate(ids[nid].gate), side)
            if not 0 <= port < len(ports):
                diags.append(Diagnostic("bad-port", f"node {nid!r} has no {side[:-1]} port {port}"))
                ok = False
        if not ok:
            continue
        out_uses[w.src] += 1
        in_uses[w.dst] += 1
        a = t.gate(ids[w.src[0]].gate).outputs[w.src[1]]
        b = t.gate(ids[w.dst[0]].gate).inputs[w.dst[1]]
        if a != b:
            diags.append(Diagnostic(
                "type-mismatch",
                f"wire {w.src} -> {w.dst} joins type {a!r} (dim {t.dim(a)}) "
                f"to type {b!r} (dim {t.dim(b)})"))
    for n in c.nodes:
        g = t.gate(n.gate)
        for p in range(len(g.outputs)):
            k = out_uses[(n.id, p)]
            if k != 1:
                kind = "unconnected port" if k == 0 else "multiply connected port"
                diags.append(Diagnostic("port", f"{kind}: output {p} of node {n.id!r}"))
        for p in range(len(g.inputs)):
            k = in_uses[(n.id, p)]
            if k != 1:
                kind = "unconnected port" if k == 0 else "multiply connected port"
                diags.append(Diagnostic("port", f"{kind}: input {p} of node {n.id!r}"))
    if _has_cycle(c):
        diags.append(Diagnostic("cycle", "wiring contains a directed cycle"))
    return diags


def _predecessors(c: Circuit) -> dict[str, set[str]]:
    preds = {n.id: set() for n in c.nodes}
    for w in c.wires:
        preds[w.dst[0]].add(w.src[0])
    return preds


def _has_cycle(c: Circuit) -> bool:
    try:
        _depths(c, _predecessors(c))
    except CircuitError:
        return True
    return False


def _depths(c: Circuit, preds: dict[str, set[str]]) -> dict[str, int]:
    depth: dict[str, int] = {}
    state: dict[str, int] = {}

    def visit(nid):
        if state.get(nid) == 1:
            raise CircuitError("cycle detected")
        if nid in depth:
            return depth[nid]
        state[nid] = 1
        depth[nid] = 1 + max((visit(p) for p in preds[nid]), default=-1)
        state[nid] = 2
        return depth[nid]

    for n in c.nodes:
        visit(n.id)
    return depth


@dataclass(frozen=True)
class Foliation:
    """Layers of parallel gates and the wire orders at each boundary.

    Boundary ``k`` sits after layer ``k``; ``boundaries[k]`` lists the wires
    crossing it in canonical order and ``boundary_dims[k]`` their joint
    dimension. The boundary before layer 0 is empty.
    """

    layers: tuple[tuple[str, ...], ...]
    boundaries: tuple[tuple[Wire, ...], ...]
    boundary_dims: tuple[int, ...]
    in_orders: tuple[tuple[int, ...], ...]
    out_orders: tuple[tuple[int, ...], ...]
    in_perms: tuple[np.ndarray, ...]
    out_perms: tuple[np.ndarray, ...]
    node_pos: dict

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def dims_into(self, layer: int) -> int:
        return 1 if layer == 0 else self.boundary_dims[layer - 1]

    def dims_out_of(self, layer: int) -> int:
        return self.boundary_dims[layer]


def foliate(c: Circuit, schedule: str = "asap") -> Foliation:
    """Slice ``c`` into layers.

    ``asap`` puts each node at its longest distance from a source; ``alap``
    pushes each node as late as its successors allow. Within a layer nodes
    keep their order of appearance in the circuit.
    """
    preds = _predecessors(c)
    depth = _depths(c, preds)
    if schedule == "alap":
        succs = {n.id: set() for n in c.nodes}
        for nid, ps in preds.items():
            for p in ps:
                succs[p].add(nid)
        height = _depths(c, succs)
        top = max(depth.values())
        depth = {nid: top - h for nid, h in height.items()}
    elif schedule != "asap":
        raise ValueError(f"unknown schedule {schedule!r}")
    n_layers = max(depth.values()) + 1
    order = {n.id: k for k, n in enumerate(c.nodes)}
    layers = [sorted((nid for nid in depth if depth[nid] == k), key=order.__getitem__)
              for k in range(n_layers)]
    pos = {nid: (depth[nid], layers[depth[nid]].index(nid)) for nid in depth}
    gates = {n.id: c.theory.gate(n.gate) for n in c.nodes}
    wire_key = lambda w: (pos[w.src[0]], w.src[1])  # noqa: E731
    dim_of = lambda w: c.theory.dim(gates[w.src[0]].outputs[w.src[1]])  # noqa: E731

    boundaries = []
    for k in range(n_layers):
        crossing = [w for w in c.wires if depth[w.src[0]] <= k < depth[w.dst[0]]]
        boundaries.append(tuple(sorted(crossing, key=wire_key)))
    bdims = tuple(int(np.prod([dim_of(w) for w in b])) if b else 1 for b in boundaries)

    in_orders, out_orders, in_perms, out_perms = [], [], [], []
    by_dst = {w.dst: w for w in c.wires}
    by_src = {w.src: w for w in c.wires}
    for k, layer in enumerate(layers):
        before = boundaries[k - 1] if k else ()
        after = boundaries[k]
        passing = [w for w in before if depth[w.dst[0]] > k]
        # Local input order: each gate's inputs by port, then pass-through wires.
        local_in = [by_dst[(nid, p)] for nid in layer for p in range(len(gates[nid].inputs))]
        local_in += passing
        idx_before = {w: i for i, w in enumerate(before)}
        in_order = tuple(idx_before[w] for w in local_in)
        # Local output order: each gate's outputs by port, then the same pass-through wires.
        local_out = [by_src[(nid, p)] for nid in layer for p in range(len(gates[nid].outputs))]
        local_out += passing
        idx_local = {w: i for i, w in enumerate(local_out)}
        out_order = tuple(idx_local[w] for w in after)
        in_orders.append(in_order)
        out_orders.append(out_order)
        in_perms.append(permutation_matrix([dim_of(w) for w in before], in_order))
        out_perms.append(permutation_matrix([dim_of(w) for w in local_out], out_order))
    return Foliation(tuple(tuple(lr) for lr in layers), tuple(boundaries), bdims,
                     tuple(in_orders), tuple(out_orders), tuple(in_perms), tuple(out_perms),
                     pos)


def _layer_factors(f: Foliation, layer: int, c: Circuit):
    """Gate objects of a layer and the dimension of its pass-through block."""
    gates = [c.gate_of(nid) for nid in f.layers[layer]]
    before = f.boundaries[layer - 1] if layer else ()
    gate_in = sum(len(g.inputs) for g in gates)
    passing = f.in_orders[layer][gate_in:]
    idle = int(np.prod([c.theory.dim(c.gate_of(before[i].src[0]).outputs[before[i].src[1]])
                        for i in passing])) if passing else 1
    return gates, idle


def layer_matrix(f: Foliation, layer: int, z: Sequence[int], c: Circuit,
                 max_entries: int = MAX_ENTRIES) -> np.ndarray:
    """Matrix of one layer for the outcomes ``z`` (indexed in circuit node order)."""
    gates, idle = _layer_factors(f, layer, c)
    index = c.node_index()
    mats = [g.outcomes[z[index[nid]]] for g, nid in zip(gates, f.layers[layer])]
    core = kron_all(mats + [np.eye(idle)], max_entries)
    return f.out_perms[layer] @ core @ f.in_perms[layer]


def layer_matrix_dyadic(f: Foliation, layer: int, z: Sequence[int], c: Circuit,
                        rounded: dict, max_entries: int = MAX_ENTRIES) -> DyadicMatrix:
    """Exact layer matrix from pre-rounded gate outcomes ``rounded[(gate, r)]``."""
    gates, idle = _layer_factors(f, layer, c)
    index = c.node_index()
    mats = [rounded[(g.name, z[index[nid]])] for g, nid in zip(gates, f.layers[layer])]
    core = dyadic_kron_all(mats + [DyadicMatrix.identity(idle)], max_entries)
    p_out = DyadicMatrix.from_integer_matrix(f.out_perms[layer])
    p_in = DyadicMatrix.from_integer_matrix(f.in_perms[layer])
    return dyadic_matmul(dyadic_matmul(p_out, core), p_in)


def max_enumeration() -> int:
    env = os.environ.get("GPTSIM_MAX_ENUM")
    return int(env) if env else DEFAULT_MAX_ENUM


def count_outcomes(c: Circuit) -> int:
    return int(np.prod(c.outcome_counts(), dtype=object))


def enumerate_outcomes(c: Circuit, cap: int | None = None) -> Iterator[tuple[int, ...]]:
    """All outcome strings in lexicographic order."""
    cap = max_enumeration() if cap is None else cap
    total = count_outcomes(c)
    if total > cap:
        raise EnumerationTooLarge(f"{total} outcome strings exceed the cap of {cap}")
    return itertools.product(*(range(k) for k in c.outcome_counts()))


def check_outcome(c: Circuit, z: Sequence[int]) -> tuple[int, ...]:
    z = tuple(int(r) for r in z)
    counts = c.outcome_counts()
    if len(z) != len(counts):
        raise CircuitError(f"outcome string has {len(z)} entries for {len(counts)} gates")
    for r, k, n in zip(z, counts, c.nodes):
        if not 0 <= r < k:
            raise CircuitError(f"outcome {r} out of range for node {n.id!r} ({k} outcomes)")
    return z
