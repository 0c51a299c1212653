import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcsim import oracle
from qcsim.circuit import Gate, GateKind
from qcsim.fusion import (
    Cluster,
    GateMatrix,
    combine_real_imag,
    embed,
    fuse,
    gate_matrix,
    is_unitary,
    named_matrix,
    split_real_imag,
)

from conftest import random_state, random_unitary

S2 = 1 / np.sqrt(2)


def test_named_matrices():
    np.testing.assert_array_equal(named_matrix(GateKind.X).entries, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(named_matrix(GateKind.CZ).entries, np.diag([1, 1, 1, -1]))
    np.testing.assert_allclose(named_matrix(GateKind.T).entries, np.diag([1, np.exp(1j * np.pi / 4)]))
    for kind in GateKind:
        if not kind.is_dense:
            assert is_unitary(named_matrix(kind).entries)
    with pytest.raises(ValueError):
        named_matrix(GateKind.Dense2)


def test_sqrt_gates_square_to_paulis():
    sx = named_matrix(GateKind.SqrtX).entries
    sy = named_matrix(GateKind.SqrtY).entries
    np.testing.assert_allclose(sx @ sx, [[0, 1], [1, 0]], atol=1e-15)
    np.testing.assert_allclose(sy @ sy, [[0, -1j], [1j, 0]], atol=1e-15)


def test_embed_x_low_bit():
    g = embed(named_matrix(GateKind.X), [0], 2)
    np.testing.assert_array_equal(g.entries, np.kron(np.eye(2), [[0, 1], [1, 0]]))


def test_embed_identity():
    for p in range(3):
        np.testing.assert_array_equal(embed(GateMatrix(np.eye(2), (0,)), [p], 3).entries, np.eye(8))


def test_embed_cz_positions_0_2():
    d = np.diag(embed(named_matrix(GateKind.CZ), [0, 2], 3).entries)
    assert [i for i in range(8) if d[i] == -1] == [5, 7]
    assert all(d[i] == 1 for i in range(8) if i not in (5, 7))


def test_embed_errors():
    with pytest.raises(ValueError):
        embed(named_matrix(GateKind.CZ), [1, 1], 3)
    with pytest.raises(ValueError):
        embed(named_matrix(GateKind.X), [3], 3)


def test_embed_matches_oracle(rng):
    u = random_unitary(4, rng)
    g = embed(GateMatrix(u, (0, 1)), [3, 1], 4)
    np.testing.assert_allclose(g.entries, oracle.full_operator(u, [3, 1], 4), atol=1e-15)
    assert is_unitary(g.entries)


def test_fuse_h_then_x():
    m = fuse([Gate(GateKind.H, (0,)), Gate(GateKind.X, (0,))], [0])
    np.testing.assert_allclose(m.entries, S2 * np.array([[1, -1], [1, 1]]), atol=1e-15)


def test_fuse_cz_twice():
    m = fuse([Gate(GateKind.CZ, (0, 1)), Gate(GateKind.CZ, (0, 1))], [0, 1])
    np.testing.assert_array_equal(m.entries, np.eye(4))


def test_fuse_two_hadamards_is_kron():
    m = fuse([Gate(GateKind.H, (3,)), Gate(GateKind.H, (7,))], [7, 3])
    h = named_matrix(GateKind.H).entries
    assert m.qubit_order == (3, 7)
    np.testing.assert_allclose(m.entries, np.kron(h, h), atol=1e-15)


def test_fuse_support_violation():
    with pytest.raises(ValueError):
        fuse([Gate(GateKind.CZ, (0, 2))], [0, 1])
    with pytest.raises(ValueError):
        fuse([Gate(GateKind.H, (0,))], range(7), k_max=6)


def test_cluster_support_check():
    with pytest.raises(ValueError):
        Cluster((Gate(GateKind.CZ, (0, 3)),), (0, 1))


def test_gate_matrix_normalizes_cnot_order():
    g = gate_matrix(Gate(GateKind.CNOT, (2, 0)))
    assert g.qubit_order == (0, 2)
    # control q2 is now bit 1: |x=bit0, c=bit1>: flips bit 0 when bit 1 set
    np.testing.assert_array_equal(g.entries, np.eye(4)[[0, 1, 3, 2]])


_kinds = st.sampled_from([GateKind.H, GateKind.T, GateKind.SqrtX, GateKind.SqrtY, GateKind.X,
                          GateKind.Z, GateKind.CZ, GateKind.CNOT])


@st.composite
def gate_lists(draw, k=4):
    out = []
    for _ in range(draw(st.integers(1, 12))):
        kind = draw(_kinds)
        qs = draw(st.lists(st.integers(0, k - 1), min_size=kind.arity, max_size=kind.arity, unique=True))
        out.append(Gate(kind, tuple(qs)))
    return out


@given(gate_lists(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_fused_equals_sequential(gates, seed):
    rng = np.random.default_rng(seed)
    psi = random_state(4, rng)
    seq = psi.copy()
    for g in gates:
        seq = oracle.apply_dense(seq, g, 4)
    m = fuse(gates, range(4))
    assert is_unitary(m.entries)
    assert np.max(np.abs(m.entries @ psi - seq)) < 1e-12


@given(gate_lists(), gate_lists())
@settings(max_examples=40, deadline=None)
def test_fuse_associative(a, b):
    lhs = fuse(a + b, range(4)).entries
    rhs = fuse(b, range(4)).entries @ fuse(a, range(4)).entries
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_split_real_imag():
    rr, ni = split_real_imag(named_matrix(GateKind.H))
    assert not ni.any()
    rr, ni = split_real_imag(named_matrix(GateKind.T))
    c = np.cos(np.pi / 4)
    np.testing.assert_allclose(rr[1, 1], [c, c])
    np.testing.assert_allclose(ni[1, 1], [-c, c])


def test_split_round_trip(rng):
    for k in range(1, 5):
        g = GateMatrix(random_unitary(1 << k, rng), tuple(range(k)))
        np.testing.assert_array_equal(combine_real_imag(*split_real_imag(g)), g.entries)
