import numpy as np
import pytest

from qcsim.circuit import Circuit, Gate, GateKind


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return v / np.linalg.norm(v)


def circuit_of(n: int, gates: list[Gate], depth: int | None = None) -> Circuit:
    depth = max((g.cycle for g in gates), default=0) if depth is None else depth
    return Circuit(1, n, depth, 0, tuple(gates))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


__all__ = ["random_unitary", "random_state", "circuit_of", "Gate", "GateKind"]
