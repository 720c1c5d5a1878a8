from fractions import Fraction

import numpy as np
import pytest

from gptsim.circuit import chain, enumerate_outcomes, foliate, parallel
from gptsim.evaluate import (
    BelowThreshold, DivisionImpossible, ExactRatio, PathCapExceeded, PostSelection,
    accept_amplitude_exact, accept_probability, decide_bgp, distribution, embed_chain,
    eval_dense, eval_exact, eval_pathsum, postselect, rounded_circuit, selected_probability,
)
from gptsim.generate import random_circuit, random_theory
from gptsim.linalg import Dyadic
from gptsim.rules import AcceptanceRule
from gptsim.theory import builtin
from conftest import make_circuit
from oracles import contract_exact, pr_table, quantum_probability

MIXED = ["classical2", "classical3", "qubits1", "qubits2", "boxworld"]


def _random_suite(rng, n, max_gates=5):
    out = []
    for k in range(n):
        out.append(random_circuit(builtin(MIXED[k % len(MIXED)]), rng, max_gates=max_gates))
    return out


def pr_circuit(t, x, y):
    return make_circuit(t, [("s", "pr"), ("a", f"measX{x}"), ("b", f"measX{y}")],
                        [(("s", 0), ("a", 0)), (("s", 1), ("b", 0))])


def test_classical_point_and_effect(classical2):
    assert eval_dense(chain(classical2, ["point0", "measure"]), (0, 0)) == 1.0


def test_bell_distribution(bell_circuit):
    for z in enumerate_outcomes(bell_circuit):
        want = quantum_probability(bell_circuit, z)
        assert eval_dense(bell_circuit, z) == pytest.approx(want, abs=1e-12)
        assert eval_pathsum(bell_circuit, z) == pytest.approx(want, abs=1e-9)
    assert eval_dense(bell_circuit, (0, 0, 0)) == pytest.approx(0.5, abs=1e-12)


def test_pr_box_zero_branch(boxworld):
    c = pr_circuit(boxworld, 1, 1)
    assert eval_dense(c, (0, 0, 0)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("x,y", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_pr_box_table(boxworld, x, y):
    c = pr_circuit(boxworld, x, y)
    for a in (0, 1):
        for b in (0, 1):
            assert eval_dense(c, (0, a, b)) == pytest.approx(pr_table(a, b, x, y), abs=1e-12)


def test_embed_scalar_gate(classical2):
    c = make_circuit(classical2, [("c", "coin")], [])
    ch = embed_chain(foliate(c), (1,), c)
    assert ch.dim == 1
    assert ch.value() == 0.5


def test_embed_prep_effect_layout(classical2):
    c = chain(classical2, ["uniform", "measure"])
    ch = embed_chain(foliate(c), (0, 1), c)
    assert ch.dim == 2
    assert np.array_equal(ch.matrices[0][:, 0], [0.5, 0.5])
    assert np.array_equal(ch.matrices[1][0], [0.0, 1.0])
    assert ch.value() == 0.5


def test_embed_matches_dense(rng):
    for c in _random_suite(rng, 15):
        f = foliate(c)
        for z in enumerate_outcomes(c):
            assert embed_chain(f, z, c).value() == pytest.approx(eval_dense(c, z), abs=1e-12)


def test_pathsum_matches_dense(rng):
    worst = 0.0
    for c in _random_suite(rng, 50):
        for z in enumerate_outcomes(c):
            worst = max(worst, abs(eval_dense(c, z) - eval_pathsum(c, z)))
    assert worst <= 1e-9


def test_pathsum_on_unphysical_theories(rng):
    for _ in range(20):
        c = random_circuit(random_theory(rng), rng)
        for z in enumerate_outcomes(c):
            assert eval_pathsum(c, z) == pytest.approx(eval_dense(c, z), abs=1e-9)


def test_two_layer_pathsum_is_dot_product(classical2):
    c = chain(classical2, ["uniform", "measure"])
    assert eval_pathsum(c, (0, 0)) == eval_dense(c, (0, 0)) == 0.5


def test_pathsum_cap(bell_circuit):
    with pytest.raises(PathCapExceeded):
        eval_pathsum(bell_circuit, (0, 0, 0), path_cap=3)


def test_exact_fair_coin(classical2):
    c = make_circuit(classical2, [("c", "coin")], [])
    a = eval_exact(c, (0,), 1)
    assert (a.numerator, a.exponent) == (1, 1)


def test_exact_plus_state_measured_in_z():
    c = chain(builtin("qubits1"), ["prepplus", "measZ"])
    a = eval_exact(c, (0, 0), 20)
    assert a.exponent == 40
    assert abs(float(a) - 0.5) <= 2.0**-18


def test_exact_zero_branch(classical2):
    a = eval_exact(chain(classical2, ["point0", "shift", "measure"]), (0, 0, 0), 3)
    assert a.numerator == 0 and a.exponent == 9


def test_exact_matches_fraction_oracle(rng):
    for c in _random_suite(rng, 20, max_gates=4):
        for d in (3, 11):
            for z in enumerate_outcomes(c):
                a = eval_exact(c, z, d)
                assert a.exponent == d * len(c.nodes)
                assert a.as_fraction() == contract_exact(c, z, d)


def test_exact_matches_rounded_float(rng):
    for c in _random_suite(rng, 20):
        rc = rounded_circuit(c, 16)
        for z in enumerate_outcomes(c):
            assert float(eval_exact(c, z, 16)) == pytest.approx(eval_dense(rc, z), abs=1e-12)


def test_exact_distribution_matches_pointwise(bell_circuit):
    dist = distribution(bell_circuit, "exact", 8)
    for z, a in dist.items():
        assert a == eval_exact(bell_circuit, z, 8)


def test_accept_all_and_none(rng):
    for c in _random_suite(rng, 10):
        assert accept_probability(c, AcceptanceRule.always()) == pytest.approx(1.0, abs=1e-9)
        assert accept_probability(c, AcceptanceRule.never()) == 0.0


def test_bell_outcomes_agree(bell_circuit):
    rule = AcceptanceRule.expr({"same": ["m0", "m1"]})
    assert accept_probability(bell_circuit, rule) == pytest.approx(1.0, abs=1e-12)
    assert accept_probability(bell_circuit, rule, "pathsum") == pytest.approx(1.0, abs=1e-9)


def test_subset_rule(bell_circuit):
    rule = AcceptanceRule.subset([(0, 0, 1), (0, 1, 1)])
    assert accept_probability(bell_circuit, rule) == pytest.approx(0.5, abs=1e-12)


def test_postselect_everything_equals_accept(bell_circuit):
    rule = AcceptanceRule.bit("m0", 1)
    got = postselect(bell_circuit, rule, PostSelection(AcceptanceRule.always()))
    assert got == pytest.approx(accept_probability(bell_circuit, rule), abs=1e-12)


def test_postselect_independent_coins(classical2):
    c = parallel(chain(classical2, ["uniform", "measure"]),
                 chain(classical2, ["uniform", "measure"]))
    names = [n.id for n in c.nodes]
    first, second = names[1], names[3]
    got = postselect(c, AcceptanceRule.bit(second, 0),
                     PostSelection(AcceptanceRule.bit(first, 0)))
    assert got == 0.5
    ratio = postselect(c, AcceptanceRule.bit(second, 0),
                       PostSelection(AcceptanceRule.bit(first, 0)), "exact", 4)
    assert ratio.as_fraction() == Fraction(1, 2)


def test_postselect_bell(bell_circuit):
    got = postselect(bell_circuit, AcceptanceRule.bit("m1", 0),
                     PostSelection(AcceptanceRule.bit("m0", 0)))
    assert got == pytest.approx(1.0, abs=1e-12)


def test_postselect_exact_integer_identity(bell_circuit):
    rule = AcceptanceRule.bit("m1", 0)
    sel = PostSelection(AcceptanceRule.bit("m0", 0))
    r = postselect(bell_circuit, rule, sel, "exact", 12)
    assert isinstance(r, ExactRatio)
    joint, s = r.joint, r.selected
    assert r.l * s.numerator * (1 << joint.exponent) == r.h * joint.numerator * (1 << s.exponent)
    assert r.as_fraction() * s.as_fraction() == joint.as_fraction()


def test_postselect_guards(classical2):
    c = chain(classical2, ["point0", "measure"])
    never = PostSelection(AcceptanceRule.bit(c.nodes[1].id, 1))
    with pytest.raises(DivisionImpossible):
        postselect(c, AcceptanceRule.always(), never)
    with pytest.raises(DivisionImpossible):
        postselect(c, AcceptanceRule.always(), never, "exact")
    noisy = chain(classical2, ["point0", "noise", "measure"])
    sel = PostSelection(AcceptanceRule.bit(noisy.nodes[2].id, 1), threshold=0.3)
    with pytest.raises(BelowThreshold):
        postselect(noisy, AcceptanceRule.always(), sel)
    with pytest.raises(BelowThreshold):
        postselect(noisy, AcceptanceRule.always(), sel, "exact")
    ok = PostSelection(sel.selector, threshold=0.25)
    assert postselect(noisy, AcceptanceRule.always(), ok) == 1.0
    assert selected_probability(noisy, ok) == 0.25


def test_threshold_must_be_positive():
    with pytest.raises(ValueError):
        PostSelection(AcceptanceRule.always(), threshold=0.0)


def test_asap_and_alap_agree(rng):
    for c in _random_suite(rng, 30, max_gates=6):
        late = foliate(c, "alap")
        for z in enumerate_outcomes(c):
            assert eval_dense(c, z, late) == pytest.approx(eval_dense(c, z), abs=1e-12)


def test_parallel_circuits_factorise(rng):
    for _ in range(10):
        t = builtin(MIXED[int(rng.integers(len(MIXED)))])
        c1, c2 = (random_circuit(t, rng, max_gates=3) for _ in range(2))
        both = parallel(c1, c2)
        for z1 in enumerate_outcomes(c1):
            for z2 in enumerate_outcomes(c2):
                want = eval_dense(c1, z1) * eval_dense(c2, z2)
                assert eval_dense(both, z1 + z2) == pytest.approx(want, abs=1e-12)


def test_normalisation(rng):
    for c in _random_suite(rng, 40, max_gates=6):
        assert sum(distribution(c).values()) == pytest.approx(1.0, abs=1e-9)


def test_accept_amplitude_exact_sums_numerators(bell_circuit):
    rule = AcceptanceRule.expr({"same": ["m0", "m1"]})
    a = accept_amplitude_exact(bell_circuit, rule, 10)
    parts = [eval_exact(bell_circuit, z, 10) for z in [(0, 0, 0), (0, 1, 1)]]
    assert a == parts[0] + parts[1]
    assert a.exponent == 30


def test_decide_bgp(classical2, bell_circuit):
    coin = make_circuit(classical2, [("c", "coin")], [])
    family = [(bell_circuit, AcceptanceRule.always()),
              (bell_circuit, AcceptanceRule.never()),
              (coin, AcceptanceRule.bit("c", 0))]
    assert decide_bgp(family) == ["in-language", "out-of-language", "undecided"]


def test_exact_reproducible(bell_circuit):
    a = eval_exact(bell_circuit, (0, 1, 1), 24)
    b = eval_exact(bell_circuit, (0, 1, 1), 24)
    assert (a.numerator, a.exponent) == (b.numerator, b.exponent)
    assert isinstance(a, Dyadic)
