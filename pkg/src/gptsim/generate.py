"""Random closed circuits and random (unphysical) theories for property checks."""
from __future__ import annotations

import numpy as np

from .circuit import Circuit, Node, Wire
from .theory import Gate, SystemType, Theory


def random_circuit(theory: Theory, rng: np.random.Generator, max_gates: int = 5,
                   max_open_dim: int = 64, min_gates: int = 2) -> Circuit:
    """A valid closed circuit of at most ``max_gates`` gates.

    Gates are placed forward in time onto open wires. Every open wire must be
    closable by a single-input measurement of its type, so the generator only
    places a gate when enough budget remains to close everything afterwards.
    """
    closers = {}
    for g in theory.gates:
        if len(g.inputs) == 1 and not g.outputs:
            closers.setdefault(g.inputs[0], []).append(g)
    usable = [g for g in theory.gates
              if all(lb in closers for lb in g.outputs) and g.inputs + g.outputs]
    budget = int(rng.integers(min_gates, max_gates + 1))
    nodes: list[Node] = []
    wires: list[Wire] = []
    open_: list[tuple[str, int, str]] = []  # (node id, port, type)

    def open_dim(extra=()):
        return int(np.prod([theory.dim(t) for *_, t in open_] + [theory.dim(t) for t in extra]))

    while True:
        remaining = budget - len(nodes)
        if not open_ and nodes and (remaining == 0 or rng.random() < 0.25):
            break
        options = []
        for g in usable:
            idx = _match_inputs(g, open_, rng)
            if idx is None:
                continue
            after = len(open_) - len(g.inputs) + len(g.outputs)
            if 1 + after > remaining:
                continue
            kept = [open_[i][2] for i in range(len(open_)) if i not in idx]
            if int(np.prod([theory.dim(t) for t in kept + list(g.outputs)] or [1])) \
                    > max_open_dim:
                continue
            options.append((g, idx))
        if not options:
            if open_:
                # Close the oldest open wire.
                nid, port, lb = open_[0]
                g = closers[lb][int(rng.integers(len(closers[lb])))]
                options = [(g, [0])]
            else:
                break
        g, idx = options[int(rng.integers(len(options)))]
        nid = f"n{len(nodes)}"
        nodes.append(Node(nid, g.name))
        for p, i in enumerate(idx):
            src_node, src_port, _ = open_[i]
            wires.append(Wire((src_node, src_port), (nid, p)))
        open_ = [w for i, w in enumerate(open_) if i not in idx]
        open_ += [(nid, p, lb) for p, lb in enumerate(g.outputs)]
    return Circuit(theory, nodes, wires)


def _match_inputs(g: Gate, open_, rng) -> list[int] | None:
    chosen: list[int] = []
    for lb in g.inputs:
        cands = [i for i, w in enumerate(open_) if w[2] == lb and i not in chosen]
        if not cands:
            return None
        chosen.append(cands[int(rng.integers(len(cands)))])
    return chosen


def random_theory(rng: np.random.Generator, n_types: int = 2, max_dim: int = 3,
                  n_gates: int = 6, scale: float = 1.0) -> Theory:
    """Gates with random entries in ``[-scale, scale]``; closable by construction."""
    types = [SystemType(f"T{k}", int(rng.integers(1, max_dim + 1))) for k in range(n_types)]
    dims = {t.label: t.dim for t in types}
    labels = list(dims)

    def mat(ins, outs):
        rows = int(np.prod([dims[x] for x in outs])) if outs else 1
        cols = int(np.prod([dims[x] for x in ins])) if ins else 1
        return rng.uniform(-scale, scale, size=(rows, cols))

    def gate(name, ins, outs):
        k = int(rng.integers(1, 4))
        return Gate(name, ins, outs, [mat(ins, outs) for _ in range(k)])

    gates = []
    for lb in labels:
        gates.append(gate(f"prep_{lb}", (), (lb,)))
        gates.append(gate(f"meas_{lb}", (lb,), ()))
    for k in range(n_gates):
        a, b = rng.choice(labels, 2)
        shape = int(rng.integers(3))
        ins, outs = [((a,), (b,)), ((a, b), (b,)), ((a,), (a, b))][shape]
        gates.append(gate(f"g{k}", ins, outs))
    return Theory(types, gates, "random")
