"""
Running on emulated ranks
=========================

Each rank owns ``2^l`` amplitudes. Swaps are group all-to-alls. The final
vector does not depend on how many ranks were used.
"""

import math

import numpy as np

from qcsim import dist
from qcsim.circuit import generate_supremacy
from qcsim.scheduler import CompileConfig, compile

circ = generate_supremacy(4, 4, 25, seed=5)
results = {}
for g in range(5):
    plan = compile(circ, CompileConfig(l=16 - g))
    state = dist.run(plan)
    results[g] = state.to_logical()
    t = state.timings[0]
    print(f"{1 << g:2d} ranks: {plan.num_swaps} swaps, norm {dist.reduce_norm(state):.15f}, "
          f"rank 0 spent {t.compute:.3f} s computing and {t.exchange + t.wait:.3f} s exchanging")

print("largest difference to 1 rank:", max(np.max(np.abs(v - results[0])) for v in results.values()))

# Output probabilities of deep random circuits follow an exponential law, so
# the entropy sits near n ln 2 - 1 + gamma.
plan = compile(circ, CompileConfig(l=14))
state = dist.run(plan)
print("entropy:", dist.reduce_entropy(state), "expected about", 16 * math.log(2) - 1 + np.euler_gamma)
print("amplitude of |0...0>:", dist.query_amplitude(state, "0" * 16))
