"""Gates, circuits, random supremacy-circuit generation and the JSON circuit format.

Qubits are numbered row-major on a ``rows x cols`` grid: qubit ``r * cols + c``.
Clock cycle 0 holds the Hadamard layer; cycles ``1..depth`` each apply one of
eight nearest-neighbour CZ patterns (see ``data/cz_patterns.json``) plus the
single-qubit gates on qubits that just left a CZ.
"""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "GateKind",
    "Gate",
    "Circuit",
    "CircuitFormatError",
    "SplitMix64",
    "cz_pattern",
    "cz_pattern_table",
    "generate_supremacy",
    "serialize",
    "parse",
    "stats",
    "simulated_gates",
]

UNITARY_TOL = 1e-12


class GateKind(str, enum.Enum):
    H = "H"
    T = "T"
    SqrtX = "SqrtX"
    SqrtY = "SqrtY"
    X = "X"
    Z = "Z"
    CZ = "CZ"
    CNOT = "CNOT"
    Dense1 = "Dense1"
    Dense2 = "Dense2"

    @property
    def arity(self) -> int:
        return 2 if self in _TWO_QUBIT else 1

    @property
    def is_dense(self) -> bool:
        return self in (GateKind.Dense1, GateKind.Dense2)

    @property
    def is_diagonal(self) -> bool:
        return self in (GateKind.T, GateKind.Z, GateKind.CZ)


_TWO_QUBIT = frozenset({GateKind.CZ, GateKind.CNOT, GateKind.Dense2})

# Random single-qubit choices, in the fixed order used for PRNG draws.
RANDOM_1Q = (GateKind.T, GateKind.SqrtX, GateKind.SqrtY)


class CircuitFormatError(ValueError):
    """Raised by :func:`parse` for malformed circuit documents."""


def _as_matrix_tuple(matrix: Any) -> tuple[tuple[complex, ...], ...]:
    arr = np.asarray(matrix, dtype=complex)
    return tuple(tuple(complex(x) for x in row) for row in arr)


@dataclass(frozen=True)
class Gate:
    """One gate. For two-qubit kinds, matrix index bit ``j`` refers to ``qubits[j]``."""

    kind: GateKind
    qubits: tuple[int, ...]
    cycle: int = 0
    matrix: tuple[tuple[complex, ...], ...] | None = None

    def __post_init__(self) -> None:
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) != kind.arity:
            raise ValueError(f"{kind.value} acts on {kind.arity} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit in {qubits}")
        if any(q < 0 for q in qubits):
            raise ValueError(f"negative qubit id in {qubits}")
        if kind is GateKind.CZ:
            qubits = tuple(sorted(qubits))
        object.__setattr__(self, "qubits", qubits)
        if self.cycle < 0:
            raise ValueError("cycle must be non-negative")
        if kind.is_dense:
            if self.matrix is None:
                raise ValueError(f"{kind.value} needs a matrix payload")
            mat = _as_matrix_tuple(self.matrix)
            dim = 1 << kind.arity
            arr = np.array(mat)
            if arr.shape != (dim, dim):
                raise ValueError(f"{kind.value} payload must be {dim}x{dim}, got {arr.shape}")
            err = np.max(np.abs(arr.conj().T @ arr - np.eye(dim)))
            if err >= UNITARY_TOL:
                raise ValueError(f"{kind.value} payload is not unitary (error {err:.3g})")
            object.__setattr__(self, "matrix", mat)
        elif self.matrix is not None:
            raise ValueError(f"{kind.value} does not take a matrix payload")

    @property
    def arity(self) -> int:
        return len(self.qubits)


@dataclass(frozen=True)
class Circuit:
    rows: int
    cols: int
    depth: int
    seed: int
    gates: tuple[Gate, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        n = self.n
        last = 0
        for i, g in enumerate(gates):
            if any(q >= n for q in g.qubits):
                raise ValueError(f"gate {i} uses qubit outside 0..{n - 1}: {g.qubits}")
            if g.cycle < last:
                raise ValueError(f"gate {i} breaks non-decreasing cycle order")
            last = g.cycle

    @property
    def n(self) -> int:
        return self.rows * self.cols

    def __len__(self) -> int:
        return len(self.gates)


class SplitMix64:
    """splitmix64 generator; identical streams across implementations."""

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int) -> None:
        self.state = seed & self._MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)


@lru_cache(maxsize=None)
def cz_pattern_table() -> tuple[tuple[str, int], ...]:
    """The eight (orientation, offset) entries, in cycle order 1..8."""
    text = resources.files("qcsim").joinpath("data/cz_patterns.json").read_text()
    doc = json.loads(text)
    return tuple((p["orientation"], int(p["offset"])) for p in doc["patterns"])


@lru_cache(maxsize=None)
def cz_pattern(rows: int, cols: int, cycle: int) -> tuple[tuple[int, int], ...]:
    """Qubit pairs coupled by CZ in clock cycle ``cycle`` (>= 1), ascending."""
    if cycle < 1:
        raise ValueError("CZ patterns start at cycle 1")
    orientation, offset = cz_pattern_table()[(cycle - 1) % 8]
    pairs = []
    for r in range(rows):
        for c in range(cols):
            if orientation == "horizontal":
                if c + 1 < cols and (c + 2 * r) % 4 == offset:
                    pairs.append((r * cols + c, r * cols + c + 1))
            elif r + 1 < rows and (r + 2 * c) % 4 == offset:
                pairs.append((r * cols + c, (r + 1) * cols + c))
    return tuple(sorted(pairs))


def generate_supremacy(
    rows: int,
    cols: int,
    depth: int,
    seed: int,
    *,
    include_initial_h: bool = True,
    include_final_cz: bool = True,
) -> Circuit:
    """Build a random supremacy circuit on a ``rows x cols`` grid.

    In each cycle ``c >= 2`` a qubit that had a CZ in cycle ``c - 1`` but none in
    cycle ``c`` gets a single-qubit gate. The first one on a qubit is T; later
    ones are drawn from {T, sqrt(X), sqrt(Y)} minus that qubit's previous gate,
    using ``SplitMix64(seed).next() % 2``. Within a cycle, single-qubit gates
    come first (ascending qubit), then the CZs.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"grid must be at least 1x1, got {rows}x{cols}")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    n = rows * cols
    rng = SplitMix64(seed)
    gates: list[Gate] = []
    if include_initial_h:
        gates.extend(Gate(GateKind.H, (q,), 0) for q in range(n))

    last_1q: list[GateKind | None] = [None] * n
    prev_busy: set[int] = set()
    for cycle in range(1, depth + 1):
        pairs = cz_pattern(rows, cols, cycle)
        busy = {q for p in pairs for q in p}
        for q in sorted(prev_busy - busy):
            if last_1q[q] is None:
                kind = GateKind.T
            else:
                allowed = [k for k in RANDOM_1Q if k is not last_1q[q]]
                kind = allowed[rng.next() % len(allowed)]
            last_1q[q] = kind
            gates.append(Gate(kind, (q,), cycle))
        if include_final_cz or cycle != depth:
            gates.extend(Gate(GateKind.CZ, p, cycle) for p in pairs)
        prev_busy = busy
    return Circuit(rows, cols, depth, seed, tuple(gates))


def simulated_gates(
    circuit: Circuit, *, skip_initial_h: bool = True, skip_final_cz: bool = True
) -> tuple[list[Gate], bool]:
    """Gates that actually need simulating, and whether to start from the uniform state.

    The cycle-0 Hadamard layer is only dropped when it is complete (one H on
    every qubit); the caller then initializes to the uniform superposition.
    Final-cycle CZs only change phases, not output probabilities.
    """
    gates = list(circuit.gates)
    uniform = False
    if skip_initial_h:
        layer = [g for g in gates if g.cycle == 0 and g.kind is GateKind.H]
        if sorted(g.qubits[0] for g in layer) == list(range(circuit.n)):
            gates = [g for g in gates if not (g.cycle == 0 and g.kind is GateKind.H)]
            uniform = True
    if skip_final_cz and circuit.depth > 0:
        gates = [g for g in gates if not (g.kind is GateKind.CZ and g.cycle == circuit.depth)]
    return gates, uniform


def stats(circuit: Circuit) -> dict[str, Any]:
    """Gate counts by kind and by cycle.

    ``simulated_total`` follows the scheduling convention: no cycle-0 Hadamards
    and no final-cycle CZs.
    """
    by_kind = Counter(g.kind.value for g in circuit.gates)
    per_cycle = Counter(g.cycle for g in circuit.gates)
    simulated, _ = simulated_gates(circuit)
    return {
        "qubits": circuit.n,
        "depth": circuit.depth,
        "total": len(circuit.gates),
        "simulated_total": len(simulated),
        "by_kind": dict(sorted(by_kind.items())),
        "per_cycle": {str(c): per_cycle[c] for c in sorted(per_cycle)},
    }


# -- JSON format -------------------------------------------------------------

_TOP_FIELDS = ("rows", "cols", "depth", "seed", "gates")
_GATE_FIELDS = {"kind", "qubits", "cycle", "matrix"}


def _gate_to_json(g: Gate) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": g.kind.value, "qubits": list(g.qubits), "cycle": g.cycle}
    if g.matrix is not None:
        out["matrix"] = [[z.real, z.imag] for row in g.matrix for z in row]
    return out


def serialize(circuit: Circuit) -> bytes:
    """UTF-8 JSON, one gate per line, fixed key order (byte-stable)."""
    head = {k: getattr(circuit, k) for k in _TOP_FIELDS[:-1]}
    lines = [json.dumps(head, separators=(",", ":"))[:-1] + ',"gates":[']
    body = [json.dumps(_gate_to_json(g), separators=(",", ":")) for g in circuit.gates]
    lines.append(",\n".join(body))
    lines.append("]}\n")
    return "\n".join(lines).encode("utf-8")


def _require_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CircuitFormatError(f"{where}: expected integer, got {value!r}")
    return value


def _gate_line_numbers(text: str) -> list[int]:
    # serialize() writes one gate object per line; hand-written files may not
    return [i + 1 for i, line in enumerate(text.splitlines()) if '"kind"' in line]


def parse(data: bytes | str) -> Circuit:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise CircuitFormatError("top level must be a JSON object")
    unknown = set(doc) - set(_TOP_FIELDS)
    if unknown:
        raise CircuitFormatError(f"unknown field(s): {sorted(unknown)}")
    missing = [k for k in _TOP_FIELDS if k not in doc]
    if missing:
        raise CircuitFormatError(f"missing field(s): {missing}")
    rows, cols, depth, seed = (_require_int(doc[k], k) for k in _TOP_FIELDS[:-1])
    if rows < 1 or cols < 1:
        raise CircuitFormatError(f"rows/cols: grid must be at least 1x1, got {rows}x{cols}")
    if not isinstance(doc["gates"], list):
        raise CircuitFormatError("gates: expected a list")
    n = rows * cols
    lines = _gate_line_numbers(text)
    gates = []
    for i, raw in enumerate(doc["gates"]):
        where = f"gates[{i}]" + (f" (line {lines[i]})" if len(lines) == len(doc["gates"]) else "")
        gates.append(_parse_gate(raw, n, where))
    try:
        return Circuit(rows, cols, depth, seed, tuple(gates))
    except ValueError as exc:
        raise CircuitFormatError(str(exc)) from exc


def _parse_gate(raw: Any, n: int, where: str) -> Gate:
    if not isinstance(raw, dict):
        raise CircuitFormatError(f"{where}: expected an object")
    unknown = set(raw) - _GATE_FIELDS
    if unknown:
        raise CircuitFormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    for key in ("kind", "qubits", "cycle"):
        if key not in raw:
            raise CircuitFormatError(f"{where}: missing field '{key}'")
    try:
        kind = GateKind(raw["kind"])
    except ValueError:
        raise CircuitFormatError(f"{where}.kind: unknown gate kind {raw['kind']!r}") from None
    if not isinstance(raw["qubits"], list):
        raise CircuitFormatError(f"{where}.qubits: expected a list")
    qubits = [_require_int(q, f"{where}.qubits") for q in raw["qubits"]]
    for q in qubits:
        if not 0 <= q < n:
            raise CircuitFormatError(f"{where}.qubits: qubit {q} out of range 0..{n - 1}")
    cycle = _require_int(raw["cycle"], f"{where}.cycle")
    matrix = None
    if "matrix" in raw:
        matrix = _parse_matrix(raw["matrix"], kind, f"{where}.matrix")
    try:
        return Gate(kind, tuple(qubits), cycle, matrix)
    except ValueError as exc:
        raise CircuitFormatError(f"{where}: {exc}") from exc


def _parse_matrix(raw: Any, kind: GateKind, where: str) -> tuple[tuple[complex, ...], ...]:
    dim = 1 << kind.arity
    if not isinstance(raw, list) or len(raw) != dim * dim:
        raise CircuitFormatError(f"{where}: expected {dim * dim} [re, im] pairs")
    values = []
    for pair in raw:
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise CircuitFormatError(f"{where}: entries must be [re, im] number pairs")
        values.append(complex(pair[0], pair[1]))
    return tuple(tuple(values[r * dim : (r + 1) * dim]) for r in range(dim))


def gates_on(gates: Iterable[Gate], qubit: int) -> list[Gate]:
    return [g for g in gates if qubit in g.qubits]


def with_gates(circuit: Circuit, gates: Sequence[Gate]) -> Circuit:
    return Circuit(circuit.rows, circuit.cols, circuit.depth, circuit.seed, tuple(gates))
