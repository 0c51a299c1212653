"""
Random supremacy circuits
=========================

Build a circuit on a 2D grid and look at what it contains.
"""

# a 6x5 grid, 25 CZ cycles
from qcsim.circuit import GateKind, cz_pattern, generate_supremacy, simulated_gates, stats

circ = generate_supremacy(6, 5, 25, seed=1)
info = stats(circ)
print("qubits:", info["qubits"], "gates:", info["total"])
print("by kind:", info["by_kind"])

# The cycle-0 Hadamards and the CZs of the last cycle are not simulated: the
# first is replaced by a uniform initial state, the second only changes phases.
gates, uniform = simulated_gates(circ)
print("simulated gates:", len(gates), "start uniform:", uniform)

# CZ layouts repeat every 8 cycles
print("cycle 1 == cycle 9:", cz_pattern(6, 5, 1) == cz_pattern(6, 5, 9))

# Only single-qubit gates depend on the seed
other = generate_supremacy(6, 5, 25, seed=2)
cz = lambda c: [g for g in c.gates if g.kind is GateKind.CZ]  # noqa: E731
print("same CZs for another seed:", cz(circ) == cz(other))

# Gate totals for the four grid sizes used in large runs
for rows, cols in [(6, 5), (6, 6), (7, 6), (9, 5)]:
    n25 = stats(generate_supremacy(rows, cols, 25, 0))["simulated_total"]
    n24 = stats(generate_supremacy(rows, cols, 24, 0))["simulated_total"]
    print(f"{rows}x{cols}: {n25} simulated gates at 25 CZ cycles, {n24} at 24")
