import numpy as np
import pytest

from qcsim import oracle
from qcsim.circuit import Gate, GateKind, generate_supremacy
from qcsim.fusion import named_matrix

from conftest import circuit_of, random_unitary

S2 = 1 / np.sqrt(2)
X = np.array([[0, 1], [1, 0]])
H = np.array([[1, 1], [1, -1]]) * S2


def test_x_on_qubit0_is_identity_kron_x():
    np.testing.assert_array_equal(oracle.full_operator(X, [0], 2), np.kron(np.eye(2), X))


def test_identity_anywhere():
    for q in range(3):
        np.testing.assert_array_equal(oracle.full_operator(np.eye(2), [q], 3), np.eye(8))


def test_h_on_qubit1_by_hand():
    expected = S2 * np.array(
        [[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, -1, 0], [0, 1, 0, -1]]
    )
    np.testing.assert_allclose(oracle.full_operator(H, [1], 2), expected, atol=1e-15)


def test_two_qubit_operand_order():
    # CNOT with control q0 (matrix bit 0), target q2 flips bit 2 when bit 0 is set
    op = oracle.full_operator(named_matrix(GateKind.CNOT), [0, 2], 3)
    for i in range(8):
        j = i ^ 4 if i & 1 else i
        assert op[j, i] == 1


def test_operator_is_unitary(rng):
    u = random_unitary(4, rng)
    op = oracle.full_operator(u, [3, 1], 5)
    np.testing.assert_allclose(op.conj().T @ op, np.eye(32), atol=1e-12)


def test_size_guard():
    with pytest.raises(ValueError):
        oracle.full_operator(X, [0], oracle.MAX_OPERATOR_QUBITS + 1)
    big = generate_supremacy(1, 11, 1, 0)
    with pytest.raises(ValueError):
        oracle.simulate_dense(big)


def test_hadamards_give_uniform():
    c = circuit_of(2, [Gate(GateKind.H, (0,)), Gate(GateKind.H, (1,))])
    np.testing.assert_allclose(oracle.simulate_dense(c).amplitudes, [0.5] * 4, atol=1e-15)


def test_cz_on_11():
    c = circuit_of(2, [Gate(GateKind.X, (0,)), Gate(GateKind.X, (1,)), Gate(GateKind.CZ, (0, 1), 1)])
    psi = oracle.simulate_dense(c).amplitudes
    np.testing.assert_allclose(psi, [0, 0, 0, -1], atol=1e-15)


def test_norm_preserved_per_gate():
    c = generate_supremacy(3, 3, 20, 5)
    psi = np.zeros(512, complex)
    psi[0] = 1
    for g in c.gates:
        psi = oracle.apply_dense(psi, g, 9)
        assert abs(np.linalg.norm(psi) - 1) < 1e-12


def test_disjoint_reorder_is_invisible():
    # swapping adjacent gates with disjoint support leaves the oracle result unchanged
    c = generate_supremacy(2, 4, 15, 9)
    gates = list(c.gates)
    ref = oracle.simulate_dense(c).amplitudes
    rng = np.random.default_rng(0)
    for _ in range(200):
        i = int(rng.integers(len(gates) - 1))
        if not set(gates[i].qubits) & set(gates[i + 1].qubits):
            gates[i], gates[i + 1] = gates[i + 1], gates[i]
    shuffled = circuit_of(8, [Gate(g.kind, g.qubits, 0, g.matrix) for g in gates], depth=0)
    np.testing.assert_allclose(oracle.simulate_dense(shuffled).amplitudes, ref, atol=1e-12)


def test_uniform_init(rng):
    c = circuit_of(3, [], depth=0)
    s = oracle.simulate_dense(c, init="uniform")
    np.testing.assert_allclose(s.amplitudes, np.full(8, 8 ** -0.5))
    assert abs(s.norm - 1) < 1e-12
