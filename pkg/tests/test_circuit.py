import numpy as np
import pytest

from gptsim.circuit import (
    Circuit, EnumerationTooLarge, chain, count_outcomes, enumerate_outcomes, foliate,
    layer_matrix, parallel, validate_circuit,
)
from gptsim.evaluate import eval_dense
from gptsim.theory import Gate, SystemType, Theory
from conftest import make_circuit
from oracles import contract


def _codes(diags):
    return [d.code for d in diags]


def test_prep_measure_pair_is_valid(classical2):
    c = make_circuit(classical2, [("p", "point0"), ("m", "measure")], [(("p", 0), ("m", 0))])
    assert validate_circuit(c) == []


def test_dangling_output(classical2):
    c = make_circuit(classical2, [("p", "point0"), ("m", "measure"), ("q", "point1")],
                     [(("p", 0), ("m", 0))])
    diags = validate_circuit(c)
    assert len(diags) == 1
    assert "unconnected port" in diags[0].message


def test_type_mismatch():
    t = Theory([SystemType("A", 2), SystemType("B", 3)],
               [Gate("pa", (), ("A",), [np.ones((2, 1))]),
                Gate("mb", ("B",), (), [np.ones((1, 3))])], "mismatch")
    c = make_circuit(t, [("p", "pa"), ("m", "mb")], [(("p", 0), ("m", 0))])
    assert _codes(validate_circuit(c)) == ["type-mismatch"]


def test_duplicate_ids_and_unknown_gates(classical2):
    c = make_circuit(classical2, [("a", "point0"), ("a", "nope")], [])
    assert set(_codes(validate_circuit(c))) == {"duplicate-id", "unknown-gate"}


def test_empty_circuit_rejected(classical2):
    assert _codes(validate_circuit(Circuit(classical2, [], []))) == ["empty"]


def test_cycle_detected(classical2):
    c = make_circuit(classical2, [("a", "identity"), ("b", "identity")],
                     [(("a", 0), ("b", 0)), (("b", 0), ("a", 0))])
    assert "cycle" in _codes(validate_circuit(c))


def test_multiply_connected_port(classical2):
    c = make_circuit(classical2, [("p", "point0"), ("m", "measure"), ("n", "measure")],
                     [(("p", 0), ("m", 0)), (("p", 0), ("n", 0))])
    assert any("multiply connected" in d.message for d in validate_circuit(c))


def test_scalar_gate_is_a_circuit(classical2):
    c = make_circuit(classical2, [("c", "coin")], [])
    assert validate_circuit(c) == []
    assert eval_dense(c, (1,)) == 0.5


def test_two_preps_gate_measure_layers(classical2):
    c = make_circuit(classical2,
                     [("p", "point0"), ("q", "point1"), ("g", "add"),
                      ("m", "measure"), ("n", "measure")],
                     [(("p", 0), ("g", 0)), (("q", 0), ("g", 1)),
                      (("g", 0), ("m", 0)), (("g", 1), ("n", 0))])
    assert foliate(c).layers == (("p", "q"), ("g",), ("m", "n"))


def test_prep_effect_has_identity_permutations(classical2):
    f = foliate(chain(classical2, ["point0", "measure"]))
    assert len(f.layers) == 2
    for p in f.in_perms + f.out_perms:
        assert np.array_equal(p, np.eye(p.shape[0]))


def test_chain_is_sequential_composition(classical2):
    c = chain(classical2, ["point1", "noise", "shift", "measure"])
    f = foliate(c)
    z = (0, 0, 0, 1)
    mats = [layer_matrix(f, k, z, c) for k in range(4)]
    g = classical2.gate
    want = g("measure").outcomes[1] @ g("shift").outcomes[0] @ g("noise").outcomes[0] \
        @ g("point1").outcomes[0]
    assert np.allclose(mats[3] @ mats[2] @ mats[1] @ mats[0], want, atol=0)
    for p in f.in_perms + f.out_perms:
        assert np.array_equal(p, np.eye(p.shape[0]))


@pytest.fixture
def figure_circuit():
    """Two preparations, a transformation on A with C idle, a two-in two-out
    gate, two parallel transformations and two effects."""
    dims = {"A": 2, "B": 3, "C": 2, "D": 3, "E": 2, "F": 4, "G": 2}
    types = [SystemType(k, v) for k, v in dims.items()]
    rng = np.random.default_rng(7)

    def g(name, ins, outs, k):
        rows = int(np.prod([dims[x] for x in outs])) if outs else 1
        cols = int(np.prod([dims[x] for x in ins])) if ins else 1
        return Gate(name, ins, outs, [rng.uniform(-1, 1, (rows, cols)) for _ in range(k)])

    t = Theory(types, [g("sigma", (), ("A",), 2), g("rho", (), ("C",), 3),
                       g("T3", ("A",), ("B",), 2), g("T4", ("B", "C"), ("D", "E"), 2),
                       g("T5", ("D",), ("F",), 2), g("T6", ("E",), ("G",), 3),
                       g("lambda", ("F",), (), 2), g("chi", ("G",), (), 2)], "figure")
    return make_circuit(
        t, [("s", "sigma"), ("r", "rho"), ("t3", "T3"), ("t4", "T4"), ("t5", "T5"),
            ("t6", "T6"), ("l", "lambda"), ("x", "chi")],
        [(("s", 0), ("t3", 0)), (("t3", 0), ("t4", 0)), (("r", 0), ("t4", 1)),
         (("t4", 0), ("t5", 0)), (("t4", 1), ("t6", 0)), (("t5", 0), ("l", 0)),
         (("t6", 0), ("x", 0))])


def test_figure_circuit_layers(figure_circuit):
    assert validate_circuit(figure_circuit) == []
    f = foliate(figure_circuit)
    assert f.layers == (("s", "r"), ("t3",), ("t4",), ("t5", "t6"), ("l", "x"))
    # The T3 layer carries C through untouched: kron(T3, I_C) up to permutation.
    z = (1, 2, 0, 1, 1, 2, 0, 1)
    m = layer_matrix(f, 1, z, figure_circuit)
    t3 = figure_circuit.theory.gate("T3").outcomes[0]
    assert m.shape == (6, 4)
    perm_out, perm_in = f.out_perms[1], f.in_perms[1]
    assert np.allclose(perm_out.T @ m @ perm_in.T, np.kron(t3, np.eye(2)), atol=0)


def test_figure_circuit_matches_contraction(figure_circuit):
    for z in enumerate_outcomes(figure_circuit):
        assert eval_dense(figure_circuit, z) == pytest.approx(contract(figure_circuit, z),
                                                              abs=1e-12)


def test_figure_circuit_outcome_count(figure_circuit):
    counts = [2, 3, 2, 2, 2, 3, 2, 2]
    assert figure_circuit.outcome_counts() == counts
    assert count_outcomes(figure_circuit) == int(np.prod(counts)) == 576
    assert sum(1 for _ in enumerate_outcomes(figure_circuit)) == 576


def test_layer_with_idle_wire_is_kron_with_identity():
    t = Theory([SystemType("P", 2), SystemType("Q", 3)],
               [Gate("pp", (), ("P",), [np.array([[0.2], [0.8]])]),
                Gate("pq", (), ("Q",), [np.array([[0.1], [0.3], [0.6]])]),
                Gate("G", ("P",), ("P",), [np.array([[0.5, 2.0], [-1.0, 3.0]])]),
                Gate("e", ("P", "Q"), (), [np.ones((1, 6))])], "pq")
    c = make_circuit(t, [("a", "pp"), ("b", "pq"), ("g", "G"), ("e", "e")],
                     [(("a", 0), ("g", 0)), (("g", 0), ("e", 0)), (("b", 0), ("e", 1))])
    f = foliate(c)
    # The joint effect waits for G, so the Q wire idles through G's layer.
    assert f.layers == (("a", "b"), ("g",), ("e",))
    m = layer_matrix(f, 1, (0,) * 4, c)
    assert np.array_equal(f.out_perms[1].T @ m @ f.in_perms[1].T,
                          np.kron(t.gate("G").outcomes[0], np.eye(3)))


def test_layer_dimensions_compose(rng):
    from gptsim.generate import random_circuit
    from gptsim.theory import builtin
    for name in ("qubits2", "classical3", "boxworld"):
        c = random_circuit(builtin(name), rng, max_gates=6)
        f = foliate(c)
        z = (0,) * len(c.nodes)
        for k in range(len(f.layers)):
            m = layer_matrix(f, k, z, c)
            assert m.shape == (f.boundary_dims[k], f.boundary_dims[k - 1] if k else 1)


def test_foliation_is_deterministic(figure_circuit):
    a, b = foliate(figure_circuit), foliate(figure_circuit)
    assert a.layers == b.layers and a.boundaries == b.boundaries
    assert all(np.array_equal(x, y) for x, y in zip(a.in_perms, b.in_perms))


def test_layer_order_follows_circuit_order_not_id_string(classical2):
    nodes = [(f"n{k}", "point0") for k in (2, 10)] + [(f"m{k}", "measure") for k in (2, 10)]
    c = make_circuit(classical2, nodes, [(("n2", 0), ("m2", 0)), (("n10", 0), ("m10", 0))])
    assert foliate(c).layers[0] == ("n2", "n10")


def test_enumeration_two_binary_gates(classical2):
    c = parallel(make_circuit(classical2, [("c", "coin")], []),
                 make_circuit(classical2, [("c", "coin")], []))
    assert list(enumerate_outcomes(c)) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_three_single_outcome_gates(classical2):
    # Close the chain with the one-outcome coarse-graining of the measurement.
    t = classical2.replace_gates(list(classical2.gates)
                                 + [Gate("discard", ("c2",), (), [np.ones((1, 2))])])
    c = chain(t, ["uniform", "noise", "discard"])
    assert list(enumerate_outcomes(c)) == [(0, 0, 0)]


def test_enumeration_cap(classical2, monkeypatch):
    c = parallel(make_circuit(classical2, [("c", "coin")], []),
                 make_circuit(classical2, [("c", "coin")], []))
    with pytest.raises(EnumerationTooLarge):
        enumerate_outcomes(c, cap=3)
    monkeypatch.setenv("GPTSIM_MAX_ENUM", "2")
    with pytest.raises(EnumerationTooLarge):
        enumerate_outcomes(c)
