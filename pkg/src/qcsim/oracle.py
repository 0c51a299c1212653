"""Brute-force reference simulator.

Builds every gate as a full ``2^n x 2^n`` operator out of Kronecker products
of 2x2 blocks and multiplies it into a dense vector. No index arithmetic is
shared with :mod:`qcsim.kernel`; this module is the ground truth for tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np
import scipy.sparse as sp

from .circuit import Circuit, Gate, simulated_gates
from .fusion import GateMatrix, gate_matrix

__all__ = [
    "DenseState",
    "full_operator",
    "sparse_operator",
    "apply_dense",
    "simulate_dense",
    "MAX_OPERATOR_QUBITS",
]

MAX_OPERATOR_QUBITS = 12
MAX_SIMULATE_QUBITS = 10

_I2 = sp.identity(2, dtype=complex, format="csr")


@dataclass
class DenseState:
    n: int
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _unit(r: int, c: int) -> np.ndarray:
    e = np.zeros((2, 2), dtype=complex)
    e[r, c] = 1
    return e


def sparse_operator(g: GateMatrix | np.ndarray, qubits, n: int) -> sp.csr_matrix:
    """``U`` on ``qubits`` (matrix bit ``j`` -> ``qubits[j]``), identity elsewhere.

    Written as ``sum_{r,c} U[r, c] * kron(..., E_{r_j c_j} on qubits[j], ..., 1)``
    with the highest qubit as the leftmost Kronecker factor.
    """
    if n > MAX_OPERATOR_QUBITS:
        raise ValueError(f"refusing to build an operator on {n} > {MAX_OPERATOR_QUBITS} qubits")
    u = g.entries if isinstance(g, GateMatrix) else np.asarray(g, dtype=complex)
    qubits = [int(q) for q in qubits]
    k = len(qubits)
    if u.shape != (1 << k, 1 << k) or len(set(qubits)) != k or any(not 0 <= q < n for q in qubits):
        raise ValueError(f"bad operator placement {qubits} for n={n}")
    total = sp.csr_matrix((1 << n, 1 << n), dtype=complex)
    for r, c in zip(*np.nonzero(u)):
        factors = []
        for q in reversed(range(n)):
            if q in qubits:
                j = qubits.index(q)
                factors.append(sp.csr_matrix(_unit((r >> j) & 1, (c >> j) & 1)))
            else:
                factors.append(_I2)
        total = total + u[r, c] * reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)
    return total


def full_operator(g: GateMatrix | np.ndarray, qubits, n: int) -> np.ndarray:
    """Dense form of :func:`sparse_operator`."""
    return sparse_operator(g, qubits, n).toarray()


@lru_cache(maxsize=4096)
def _gate_operator(kind, qubits, matrix, n: int) -> sp.csr_matrix:
    gm = gate_matrix(Gate(kind, qubits, 0, matrix))
    return sparse_operator(gm, gm.qubit_order, n)


def apply_dense(amplitudes: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    return _gate_operator(gate.kind, gate.qubits, gate.matrix, n) @ amplitudes


def simulate_dense(
    circuit: Circuit,
    *,
    init: str = "basis0",
    skip_initial_h: bool = False,
    skip_final_cz: bool = False,
) -> DenseState:
    """Run ``circuit`` gate by gate from ``|0...0>`` (or the uniform state)."""
    n = circuit.n
    if n > MAX_SIMULATE_QUBITS:
        raise ValueError(f"dense oracle is limited to {MAX_SIMULATE_QUBITS} qubits, got {n}")
    gates, uniform = simulated_gates(circuit, skip_initial_h=skip_initial_h, skip_final_cz=skip_final_cz)
    if uniform:
        init = "uniform"
    if init == "uniform":
        psi = np.full(1 << n, 2 ** (-n / 2), dtype=complex)
    elif init == "basis0":
        psi = np.zeros(1 << n, dtype=complex)
        psi[0] = 1
    else:
        raise ValueError(f"unknown init {init!r}")
    for g in gates:
        psi = apply_dense(psi, g, n)
    return DenseState(n, psi)
