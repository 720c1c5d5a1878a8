import numpy as np
import pytest

from gptsim import builtin
from gptsim.circuit import Circuit, Node, Wire


def make_circuit(theory, nodes, wires, name=None):
    """``nodes`` as ``[(id, gate), ...]``, wires as ``[((src, port), (dst, port)), ...]``."""
    return Circuit(theory, [Node(i, g) for i, g in nodes], [Wire(s, d) for s, d in wires],
                   name)


@pytest.fixture(scope="session")
def classical2():
    return builtin("classical2")


@pytest.fixture(scope="session")
def qubits2():
    return builtin("qubits2")


@pytest.fixture(scope="session")
def boxworld():
    return builtin("boxworld")


@pytest.fixture
def bell_circuit(qubits2):
    return make_circuit(qubits2, [("b", "bell"), ("m0", "measZ"), ("m1", "measZ")],
                        [(("b", 0), ("m0", 0)), (("b", 1), ("m1", 0))])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for text in lines:
            terminalreporter.write_line(text)
