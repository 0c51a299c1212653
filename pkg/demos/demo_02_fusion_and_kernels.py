"""
Fusing gates and applying them
==============================

Several small gates become one k-qubit matrix. The kernel applies it in place
to a state vector; the dense oracle checks the result.
"""

import numpy as np

from qcsim import kernel, oracle
from qcsim.circuit import Gate, GateKind
from qcsim.fusion import fuse, split_real_imag

# Three gates on qubits 2 and 5 fused into one 4x4 matrix.
# Later gates are left factors.
gates = [Gate(GateKind.H, (2,)), Gate(GateKind.CZ, (2, 5)), Gate(GateKind.SqrtX, (5,))]
m = fuse(gates, [2, 5])
print("fused on", m.qubit_order, "unitary:", np.allclose(m.entries.conj().T @ m.entries, np.eye(4)))

# apply to a random 8-qubit state and compare with the gate-by-gate oracle
rng = np.random.default_rng(0)
psi = rng.standard_normal(256) + 1j * rng.standard_normal(256)
psi /= np.linalg.norm(psi)
fast = psi.copy()
kernel.apply_gate(fast, m, m.qubit_order)
slow = psi.copy()
for g in gates:
    slow = oracle.apply_dense(slow, g, 8)
print("max difference:", np.max(np.abs(fast - slow)))

# The blocked update and the real/imaginary pair layout give the same numbers
alt = psi.copy()
kernel.apply_gate(alt, m, m.qubit_order, kernel.KernelConfig(block_size=1, layout="fma"))
print("block size 1, pair layout:", np.max(np.abs(alt - fast)))
rr, ni = split_real_imag(m)
print("pair tables:", rr.shape, ni.shape)

# Cost model: 8 * 2^k - 2 FLOPs per output amplitude
for k in range(1, 6):
    print(f"k={k}: {kernel.estimate_flops(k, 0)} FLOP per amplitude")
