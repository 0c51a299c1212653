"""In-place kernels on one rank's slice of the state vector.

A k-qubit gate on sorted bit-locations ``i_0 < ... < i_{k-1}`` touches, for
every value ``c`` of the remaining ``l - k`` bits, the ``2^k`` amplitudes whose
``locs`` bits spell ``x = x_{i_{k-1}} ... x_{i_0}``. Those are gathered into a
temporary, multiplied by the matrix with a blocked update, and scattered back.
The ``c`` range is flattened into one row axis and split across worker threads.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fusion import K_MAX_DEFAULT, K_MAX_LIMIT, GateMatrix, permute, split_real_imag

__all__ = [
    "StateSlice",
    "KernelConfig",
    "default_threads",
    "apply_gate",
    "local_swap",
    "apply_phase",
    "apply_diagonal_z",
    "local_norm_sq",
    "local_entropy_terms",
    "amplitude_at",
    "estimate_flops",
    "autotune_block_size",
]

PHASE_TOL = 1e-12


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("QCSIM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class KernelConfig:
    """``block_size=None`` means ``min(2^k, 8)`` for each applied gate.

    ``layout="fma"`` runs the update on split real/imaginary pair tables.
    """

    block_size: int | None = None
    threads: int = 1
    k_max: int = K_MAX_DEFAULT
    layout: str = "complex"

    def __post_init__(self) -> None:
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 1 <= self.k_max <= K_MAX_LIMIT:
            raise ValueError(f"k_max must be in 1..{K_MAX_LIMIT}")
        if self.layout not in ("complex", "fma"):
            raise ValueError(f"unknown layout {self.layout!r}")

    def block_for(self, k: int) -> int:
        dim = 1 << k
        b = min(dim, 8) if self.block_size is None else self.block_size
        if b > dim:
            raise ValueError(f"block size {b} exceeds 2^k = {dim}")
        return b


class StateSlice:
    """Contiguous block of ``2^l`` complex amplitudes owned by one rank."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes: np.ndarray) -> None:
        amplitudes = np.asarray(amplitudes)
        if amplitudes.ndim != 1 or amplitudes.size & (amplitudes.size - 1):
            raise ValueError("a state slice holds a power-of-two number of amplitudes")
        if not np.iscomplexobj(amplitudes):
            amplitudes = amplitudes.astype(complex)
        self.amplitudes = amplitudes

    @classmethod
    def zeros(cls, l: int, dtype: np.dtype | type = np.complex128) -> StateSlice:
        return cls(np.zeros(1 << l, dtype=dtype))

    @property
    def l(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def copy(self) -> StateSlice:
        return StateSlice(self.amplitudes.copy())

    def __len__(self) -> int:
        return self.amplitudes.size


def _amps(state: StateSlice | np.ndarray) -> np.ndarray:
    return state.amplitudes if isinstance(state, StateSlice) else state


def _nbits(amps: np.ndarray) -> int:
    return amps.size.bit_length() - 1


@lru_cache(maxsize=None)
def _pool(threads: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=threads, thread_name_prefix="qcsim-kernel")


def _chunks(rows: int, threads: int) -> list[tuple[int, int]]:
    threads = min(threads, rows)
    step = -(-rows // threads)
    return [(s, min(s + step, rows)) for s in range(0, rows, step)]


def _update_complex(v: np.ndarray, m: np.ndarray, block: int) -> np.ndarray:
    dim = m.shape[0]
    out = np.zeros_like(v)
    for b0 in range(0, dim, block):
        part = v[:, b0 : b0 + 1] * m[:, b0]
        for i in range(b0 + 1, min(b0 + block, dim)):
            part += v[:, i : i + 1] * m[:, i]
        out += part
    return out


def _update_fma(v: np.ndarray, rr: np.ndarray, ni: np.ndarray, block: int) -> np.ndarray:
    dim = rr.shape[0]
    vf = v.view(v.real.dtype).reshape(v.shape[0], dim, 2)
    vs = vf[..., ::-1]
    out = np.zeros_like(vf)
    for b0 in range(0, dim, block):
        part = vf[:, b0 : b0 + 1, :] * rr[:, b0, :]
        part += vs[:, b0 : b0 + 1, :] * ni[:, b0, :]
        for i in range(b0 + 1, min(b0 + block, dim)):
            part += vf[:, i : i + 1, :] * rr[:, i, :]
            part += vs[:, i : i + 1, :] * ni[:, i, :]
        out += part
    return out.reshape(v.shape[0], 2 * dim).view(v.dtype)


def _gather_view(amps: np.ndarray, locs: Sequence[int]) -> np.ndarray:
    """View with all non-``locs`` bits leading and ``locs`` bits trailing (high to low)."""
    l = _nbits(amps)
    shape = []
    top = l
    for loc in reversed(locs):
        shape += [1 << (top - loc - 1), 2]
        top = loc
    shape.append(1 << top)
    view = amps.reshape(shape)
    k = len(locs)
    perm = [2 * j for j in range(k + 1)] + [2 * j + 1 for j in range(k)]
    return view.transpose(perm)


def _check_locs(locs: Sequence[int], l: int) -> list[int]:
    locs = [int(x) for x in locs]
    if len(set(locs)) != len(locs):
        raise ValueError(f"bit-locations must be distinct, got {locs}")
    for x in locs:
        if not 0 <= x < l:
            raise ValueError(f"bit-location {x} outside 0..{l - 1}")
    return locs


def apply_gate(
    state: StateSlice | np.ndarray,
    g: GateMatrix | np.ndarray,
    locs: Sequence[int],
    config: KernelConfig | None = None,
) -> None:
    """Apply ``g`` in place; matrix bit ``j`` acts on bit-location ``locs[j]``."""
    config = config or KernelConfig(threads=default_threads())
    amps = _amps(state)
    entries = g.entries if isinstance(g, GateMatrix) else np.asarray(g, dtype=complex)
    locs = _check_locs(locs, _nbits(amps))
    k = len(locs)
    if k > config.k_max:
        raise ValueError(f"{k}-qubit gate exceeds k_max={config.k_max}")
    if entries.shape != (1 << k, 1 << k):
        raise ValueError(f"matrix shape {entries.shape} does not fit {k} location(s)")
    if any(a > b for a, b in zip(locs, locs[1:])):
        order = sorted(range(k), key=locs.__getitem__)
        entries = permute(entries, order)
        locs = [locs[j] for j in order]
    if k == 0:
        return
    block = config.block_for(k)
    m = entries.astype(amps.dtype, copy=False)

    view = _gather_view(amps, locs)
    v = view.reshape(-1, 1 << k)
    if config.layout == "fma":
        rr, ni = (t.astype(amps.real.dtype) for t in split_real_imag(GateMatrix(entries, tuple(locs))))
        work = lambda part: _update_fma(part, rr, ni, block)  # noqa: E731
    else:
        work = lambda part: _update_complex(part, m, block)  # noqa: E731

    rows = v.shape[0]
    if config.threads == 1 or rows == 1:
        out = work(v)
    else:
        out = np.empty_like(v)
        spans = _chunks(rows, config.threads)

        def run(span: tuple[int, int]) -> None:
            s, e = span
            out[s:e] = work(v[s:e])

        list(_pool(config.threads).map(run, spans))
    view[...] = out.reshape(view.shape)


def local_swap(state: StateSlice | np.ndarray, a: int, b: int) -> None:
    """Exchange bit-locations ``a`` and ``b`` of every index, in place."""
    amps = _amps(state)
    a, b = _check_locs([a], _nbits(amps))[0], _check_locs([b], _nbits(amps))[0]
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    l = _nbits(amps)
    v = amps.reshape(1 << (l - hi - 1), 2, 1 << (hi - lo - 1), 2, 1 << lo)
    tmp = v[:, 0, :, 1, :].copy()
    v[:, 0, :, 1, :] = v[:, 1, :, 0, :]
    v[:, 1, :, 0, :] = tmp


def apply_phase(state: StateSlice | np.ndarray, scalar: complex) -> None:
    if abs(abs(scalar) - 1) > PHASE_TOL:
        raise ValueError(f"phase {scalar} is not of unit modulus")
    amps = _amps(state)
    amps *= scalar


def apply_diagonal_z(state: StateSlice | np.ndarray, loc: int) -> None:
    amps = _amps(state)
    loc = _check_locs([loc], _nbits(amps))[0]
    v = amps.reshape(-1, 2, 1 << loc)
    v[:, 1, :] *= -1


def local_norm_sq(state: StateSlice | np.ndarray) -> float:
    amps = _amps(state)
    return float(np.vdot(amps, amps).real)


def local_entropy_terms(state: StateSlice | np.ndarray) -> float:
    """``-sum p ln p`` over the slice, with ``0 ln 0 = 0``."""
    p = np.abs(_amps(state)) ** 2
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def amplitude_at(state: StateSlice | np.ndarray, index: int) -> complex:
    return complex(_amps(state)[index])


def estimate_flops(k: int, n: int) -> int:
    """FLOPs of one k-qubit gate on ``2^n`` amplitudes: ``8 * 2^k - 2`` per output entry."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (1 << n) * (8 * (1 << k) - 2)


def autotune_block_size(
    k: int, l: int = 20, candidates: Sequence[int] | None = None, repeats: int = 3, seed: int = 0
) -> int:
    """Fastest block size for a k-qubit gate on a ``2^l`` slice, measured here and now."""
    rng = np.random.default_rng(seed)
    dim = 1 << k
    cands = list(candidates) if candidates else [1 << p for p in range(k + 1)]
    amps = (rng.standard_normal(1 << l) + 1j * rng.standard_normal(1 << l)).astype(complex)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    best, best_t = cands[0], math.inf
    for b in cands:
        cfg = KernelConfig(block_size=b, k_max=max(k, 1))
        t = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            apply_gate(amps, q, range(k), cfg)
            t = min(t, time.perf_counter() - t0)
        if t < best_t:
            best, best_t = b, t
    return best
