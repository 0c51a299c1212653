"""Gate matrices, embedding into a k-qubit space, and fusion of gate sequences.

Bit convention everywhere: index bit ``j`` of a k-qubit matrix refers to the
``j``-th entry of its qubit list, so position 0 is the least-significant bit.
A fused product applies gates left to right in program order, i.e. the later
gate is the left factor: ``M = U_last @ ... @ U_first``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Gate, GateKind

__all__ = [
    "GateMatrix",
    "Cluster",
    "named_matrix",
    "gate_matrix",
    "permute",
    "embed",
    "fuse",
    "split_real_imag",
    "combine_real_imag",
    "is_unitary",
    "K_MAX_DEFAULT",
    "K_MAX_LIMIT",
]

K_MAX_DEFAULT = 5
K_MAX_LIMIT = 6

_S2 = 1 / math.sqrt(2)
_NAMED = {
    GateKind.H: np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    GateKind.T: np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    GateKind.SqrtX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
    GateKind.SqrtY: 0.5 * np.array([[1 + 1j, -1 - 1j], [1 + 1j, 1 + 1j]], dtype=complex),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
    # qubits = (control, target): control is bit 0, so |c=1,t=0> = 1 <-> |c=1,t=1> = 3
    GateKind.CNOT: np.eye(4, dtype=complex)[[0, 3, 2, 1]],
}
for _m in _NAMED.values():
    _m.setflags(write=False)


def is_unitary(entries: np.ndarray, tol: float = 1e-12) -> bool:
    dim = entries.shape[0]
    return bool(np.max(np.abs(entries.conj().T @ entries - np.eye(dim))) < tol)


@dataclass(frozen=True, eq=False)
class GateMatrix:
    entries: np.ndarray
    qubit_order: tuple[int, ...]

    def __post_init__(self) -> None:
        entries = np.ascontiguousarray(self.entries, dtype=complex)
        k = len(self.qubit_order)
        if entries.shape != (1 << k, 1 << k):
            raise ValueError(f"matrix shape {entries.shape} does not match {k} qubit(s)")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "qubit_order", tuple(int(q) for q in self.qubit_order))

    @property
    def k(self) -> int:
        return len(self.qubit_order)

    @property
    def is_sorted(self) -> bool:
        return all(a < b for a, b in zip(self.qubit_order, self.qubit_order[1:]))

    def normalized(self) -> GateMatrix:
        """Same operator with ``qubit_order`` ascending."""
        if self.is_sorted:
            return self
        order = sorted(range(self.k), key=lambda j: self.qubit_order[j])
        return GateMatrix(permute(self.entries, order), tuple(self.qubit_order[j] for j in order))

    def allclose(self, other: GateMatrix, atol: float = 1e-12) -> bool:
        return self.qubit_order == other.qubit_order and np.allclose(
            self.entries, other.entries, atol=atol, rtol=0
        )


@dataclass(frozen=True, eq=False)
class Cluster:
    """Gates executed together as one fused k-qubit matrix.

    ``gate_ids`` index the gate list the cluster was built from; ``locs`` are
    the sorted bit-locations of ``fused`` once a qubit map is applied.
    """

    gates: tuple[Gate, ...]
    support: tuple[int, ...]
    gate_ids: tuple[int, ...] = ()
    fused: GateMatrix | None = None
    locs: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", tuple(sorted(self.support)))
        covered = {q for g in self.gates for q in g.qubits}
        if not covered <= set(self.support):
            raise ValueError(f"gates touch {sorted(covered)} outside support {self.support}")

    @property
    def k(self) -> int:
        return len(self.support)


def named_matrix(kind: GateKind) -> GateMatrix:
    kind = GateKind(kind)
    if kind.is_dense:
        raise ValueError(f"{kind.value} has no fixed matrix; it carries its own payload")
    m = _NAMED[kind]
    return GateMatrix(m.copy(), tuple(range(kind.arity)))


def gate_matrix(gate: Gate) -> GateMatrix:
    """Matrix of ``gate`` over its own qubits, normalized to ascending order."""
    entries = np.array(gate.matrix, dtype=complex) if gate.kind.is_dense else _NAMED[gate.kind]
    return GateMatrix(entries, gate.qubits).normalized()


def permute(entries: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Relabel bits: new bit ``j`` is old bit ``order[j]``."""
    k = len(order)
    idx = np.arange(1 << k)
    old = np.zeros_like(idx)
    for j, src in enumerate(order):
        old |= ((idx >> j) & 1) << src
    return entries[np.ix_(old, old)]


def embed(g: GateMatrix, positions: Sequence[int], k: int) -> GateMatrix:
    """Act with ``g`` on bit ``positions`` of a k-qubit space, identity elsewhere."""
    positions = [int(p) for p in positions]
    if len(positions) != g.k:
        raise ValueError(f"{g.k}-qubit matrix needs {g.k} positions, got {positions}")
    if len(set(positions)) != len(positions):
        raise ValueError(f"position collision in {positions}")
    if any(not 0 <= p < k for p in positions):
        raise ValueError(f"positions {positions} out of range for k={k}")
    idx = np.arange(1 << k)
    sub = np.zeros_like(idx)
    mask = 0
    for j, p in enumerate(positions):
        sub |= ((idx >> p) & 1) << j
        mask |= 1 << p
    rest = idx & ~mask
    same_rest = rest[:, None] == rest[None, :]
    out = np.where(same_rest, g.entries[np.ix_(sub, sub)], 0)
    return GateMatrix(out, tuple(range(k)))


def fuse(gates: Cluster | Sequence[Gate], k_support: Sequence[int], k_max: int = K_MAX_LIMIT) -> GateMatrix:
    """Product of the gates (program order) on the space spanned by ``k_support``.

    ``k_support`` lists ids in the same space as the gates' qubits; the result's
    ``qubit_order`` is ``sorted(k_support)``.
    """
    if isinstance(gates, Cluster):
        gates = gates.gates
    support = sorted(int(q) for q in k_support)
    if len(set(support)) != len(support):
        raise ValueError(f"duplicate ids in support {list(k_support)}")
    k = len(support)
    if k > k_max:
        raise ValueError(f"support of {k} qubits exceeds k_max={k_max}")
    where = {q: j for j, q in enumerate(support)}
    out = np.eye(1 << k, dtype=complex)
    for g in gates:
        missing = [q for q in g.qubits if q not in where]
        if missing:
            raise ValueError(f"{g.kind.value} on {g.qubits} leaves support {support}")
        gm = gate_matrix(g)
        out = embed(gm, [where[q] for q in gm.qubit_order], k).entries @ out
    return GateMatrix(out, tuple(support))


def split_real_imag(g: GateMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Pair tables ``(m_R, m_R)`` and ``(-m_I, m_I)`` with shape ``(2^k, 2^k, 2)``.

    With them an amplitude update is two multiply-accumulates:
    ``acc += (v_R, v_I) * (m_R, m_R)`` then ``acc += (v_I, v_R) * (-m_I, m_I)``.
    """
    re = g.entries.real
    im = g.entries.imag
    rr = np.stack([re, re], axis=-1)
    ni = np.stack([-im, im], axis=-1)
    return rr, ni


def combine_real_imag(rr: np.ndarray, ni: np.ndarray) -> np.ndarray:
    return rr[..., 0] + 1j * ni[..., 1]
