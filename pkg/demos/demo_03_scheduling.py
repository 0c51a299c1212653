"""
Scheduling for few communication steps
======================================

With ``l`` local qubits, gates on the other ``n - l`` (global) qubits need
their qubits swapped in first. The scheduler groups gates into stages that
need no communication and fuses each stage into clusters.
"""

import time

from qcsim.circuit import generate_supremacy
from qcsim.scheduler import CompileConfig, compile

# Swaps for the larger grids with 30 local qubits. Every single-qubit gate on
# a global qubit is treated as dense, even when it is a T.
for rows, cols in [(6, 6), (7, 6), (9, 5)]:
    circ = generate_supremacy(rows, cols, 25, seed=0)
    for spec in (True, False):
        t0 = time.perf_counter()
        plan = compile(circ, CompileConfig(l=30, specialize=spec, worst_case_dense=True))
        print(f"{rows * cols} qubits, diagonal gates on globals {'free' if spec else 'swapped'}: "
              f"{plan.num_swaps} swaps ({time.perf_counter() - t0:.2f} s)")

# The swap count barely depends on l
circ = generate_supremacy(7, 6, 25, seed=3)
print("42 qubits, l=29..32:", [compile(circ, CompileConfig(l=l, worst_case_dense=True)).num_swaps
                               for l in (29, 30, 31, 32)])

# Clusters on one 30-qubit node for three kernel widths
circ = generate_supremacy(6, 5, 25, seed=0)
for k in (3, 4, 5):
    plan = compile(circ, CompileConfig(l=30, k_max=k))
    print(f"k_max={k}: {len(plan.clusters)} clusters, "
          f"{len(plan.gates) / len(plan.clusters):.1f} gates per cluster")

# The full report is what `qcsim schedule` prints
rep = compile(generate_supremacy(6, 6, 25, 0), CompileConfig(l=30)).report()
print({k: rep[k] for k in ("stages", "swaps", "clusters", "specialized", "swap_pairs")})
