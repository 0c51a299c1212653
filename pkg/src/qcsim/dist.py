"""Emulated multi-rank execution of a :class:`~qcsim.scheduler.SchedulePlan`.

Each logical rank runs the whole plan in its own thread (SPMD). Ranks meet
only inside collectives, which are barrier-synchronized over a shared
buffer. The top ``g`` bits of a global index are the rank bits:
``index = rank * 2^l + local_index``.

A CNOT on two global bits is handled as a relabeling of ranks. Physical rank
``p`` holds the slice of logical rank ``comm.logical_rank``, and collectives
and rank-conditional actions address ranks logically.
"""

from __future__ import annotations

import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernel
from .kernel import KernelConfig, StateSlice
from .scheduler import QubitMap, SchedulePlan, SpecializedAction

__all__ = [
    "CommProtocolError",
    "EmulatedWorld",
    "Communicator",
    "DistributedState",
    "RunTimings",
    "spmd",
    "all_to_all",
    "global_to_local_swap",
    "apply_specialized_global",
    "run",
    "reduce_norm",
    "reduce_entropy",
    "query_amplitude",
    "dump_slices",
]

T_PHASE = complex(np.exp(1j * np.pi / 4))


class CommProtocolError(RuntimeError):
    """Ranks disagreed on a collective (block sizes, group membership)."""


class EmulatedWorld:
    """Shared rendezvous state for ``size`` in-process ranks."""

    def __init__(self, size: int) -> None:
        if size < 1 or size & (size - 1):
            raise ValueError(f"rank count must be a power of two, got {size}")
        self.size = size
        self.g = size.bit_length() - 1
        self._barrier = threading.Barrier(size)
        self._slots: list[object] = [None] * size
        self.calls: list[Counter] = [Counter() for _ in range(size)]
        self.bytes_sent = [0] * size
        self.wait_seconds = [0.0] * size

    def communicators(self) -> list[Communicator]:
        return [Communicator(self, r) for r in range(self.size)]

    def abort(self) -> None:
        self._barrier.abort()

    def wait(self, rank: int) -> None:
        t0 = time.perf_counter()
        self._barrier.wait()
        self.wait_seconds[rank] += time.perf_counter() - t0


class Communicator:
    """One rank's handle. ``rank`` is physical; ``logical_rank`` follows CNOT relabels."""

    def __init__(self, world: EmulatedWorld, rank: int) -> None:
        self.world = world
        self.rank = rank
        self.rank_relabel = list(range(world.size))  # physical -> logical

    @property
    def size(self) -> int:
        return self.world.size

    @property
    def g(self) -> int:
        return self.world.g

    @property
    def logical_rank(self) -> int:
        return self.rank_relabel[self.rank]

    def physical_of(self, logical: int) -> int:
        return self.rank_relabel.index(logical)

    def barrier(self) -> None:
        self.world.calls[self.rank]["barrier"] += 1
        self.world.wait(self.rank)

    def _exchange(self, payload: object) -> list[object]:
        """Everyone deposits under its logical rank; returns all deposits by logical rank."""
        w = self.world
        w._slots[self.logical_rank] = payload
        w.wait(self.rank)
        got = list(w._slots)
        return got

    def allreduce(self, value: complex | float) -> complex | float:
        """Sum over ranks in logical-rank order, so every rank gets the same bits."""
        self.world.calls[self.rank]["allreduce"] += 1
        vals = self._exchange(value)
        total = vals[0]
        for v in vals[1:]:
            total = total + v
        self.world.wait(self.rank)
        return total

    def alltoall(self, group: Sequence[int], blocks: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Group member ``j`` receives block ``j`` of every member, ordered by sender."""
        self.world.calls[self.rank]["alltoall"] += 1
        group = list(group)
        if len(blocks) != len(group):
            self.world.abort()
            raise CommProtocolError(f"{len(blocks)} blocks for a group of {len(group)}")
        if self.logical_rank not in group:
            self.world.abort()
            raise CommProtocolError(f"rank {self.logical_rank} is not in its own group {group}")
        me = group.index(self.logical_rank)
        self.world.bytes_sent[self.rank] += sum(b.nbytes for j, b in enumerate(blocks) if j != me)
        deposits = self._exchange((tuple(group), list(blocks)))
        out = []
        try:
            for sender in group:
                their_group, their_blocks = deposits[sender]
                if list(their_group) != group:
                    raise CommProtocolError(f"group mismatch: {group} vs {list(their_group)}")
                blk = their_blocks[me]
                if blk.shape != blocks[me].shape:
                    raise CommProtocolError(f"block size mismatch: {blk.shape} vs {blocks[me].shape}")
                out.append(blk.copy())
        except CommProtocolError:
            self.world.abort()
            raise
        self.world.wait(self.rank)  # nobody overwrites a block someone is still reading
        return out

    def apply_cnot_relabel(self, control_bit: int, target_bit: int) -> None:
        c, t = 1 << control_bit, 1 << target_bit
        self.rank_relabel = [r ^ t if r & c else r for r in self.rank_relabel]


def spmd(world: EmulatedWorld, fn: Callable[[Communicator], object],
         comms: Sequence[Communicator] | None = None) -> list[object]:
    """Run ``fn(comm)`` on every rank concurrently; results by physical rank."""
    comms = list(comms) if comms is not None else world.communicators()
    if len(comms) == 1:
        return [fn(comms[0])]
    results: list[object] = [None] * world.size
    errors: list[BaseException | None] = [None] * world.size

    def body(c: Communicator) -> None:
        try:
            results[c.rank] = fn(c)
        except BaseException as exc:  # noqa: BLE001 - re-raised below
            errors[c.rank] = exc
            world.abort()

    threads = [threading.Thread(target=body, args=(c,), name=f"rank-{c.rank}") for c in comms]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    primary = [e for e in errors if e is not None and not isinstance(e, threading.BrokenBarrierError)]
    if primary:
        raise primary[0]
    if any(errors):
        raise next(e for e in errors if e is not None)
    return results


# -- state ------------------------------------------------------------------------


@dataclass
class RunTimings:
    compute: float = 0.0
    exchange: float = 0.0
    wait: float = 0.0

    @property
    def total(self) -> float:
        return self.compute + self.exchange + self.wait


@dataclass
class DistributedState:
    """Per-physical-rank slices plus the bookkeeping needed to read them."""

    n: int
    l: int
    slices: list[StateSlice]
    qmap: QubitMap
    rank_relabel: list[int]
    timings: list[RunTimings] = field(default_factory=list)
    exchanges: int = 0

    @property
    def g(self) -> int:
        return self.n - self.l

    def by_location(self) -> np.ndarray:
        """Full vector indexed by bit-location (``logical_rank * 2^l + local``)."""
        out = np.empty(1 << self.n, dtype=self.slices[0].amplitudes.dtype)
        size = 1 << self.l
        for p, s in enumerate(self.slices):
            r = self.rank_relabel[p]
            out[r * size : (r + 1) * size] = s.amplitudes
        return out

    def to_logical(self) -> np.ndarray:
        """Full vector indexed by qubit ids (bit ``q`` of the index is qubit ``q``)."""
        return self.by_location()[location_indices(self.qmap)]

    def locate(self, index: int) -> tuple[int, int]:
        """Physical rank and local offset holding the amplitude of qubit-index ``index``."""
        loc_index = 0
        for q, loc in enumerate(self.qmap.locations):
            loc_index |= ((index >> q) & 1) << loc
        logical, local = loc_index >> self.l, loc_index & ((1 << self.l) - 1)
        return self.rank_relabel.index(logical), local


def location_indices(qmap: QubitMap) -> np.ndarray:
    """``out[i]`` is the bit-location index of qubit-index ``i``."""
    idx = np.arange(1 << qmap.n, dtype=np.int64)
    out = np.zeros_like(idx)
    for q, loc in enumerate(qmap.locations):
        out |= ((idx >> q) & 1) << loc
    return out


# -- collectives on slices -----------------------------------------------------------


def all_to_all(comm: Communicator, group: Sequence[int], blocks: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Group all-to-all. A group of one rank is a no-op."""
    group = list(group)
    if len(group) & (len(group) - 1):
        raise ValueError("group size must be a power of two")
    q = len(group).bit_length() - 1
    if q > comm.g:
        raise ValueError(f"group of 2^{q} ranks exceeds 2^{comm.g}")
    if q == 0:
        return [blocks[0]]
    return comm.alltoall(group, blocks)


def _move_to_top(state: StateSlice, targets: Sequence[int]) -> list[tuple[int, int]]:
    """Local swaps so that the qubit at ``targets[j]`` ends at location ``l - q + j``."""
    l, q = state.l, len(targets)
    order = list(range(l))  # order[loc] = original location now stored at loc
    where = list(range(l))
    done = []
    for j, src in enumerate(targets):
        dst = l - q + j
        cur = where[src]
        if cur != dst:
            kernel.local_swap(state, cur, dst)
            a, b = order[cur], order[dst]
            order[cur], order[dst] = b, a
            where[a], where[b] = dst, cur
            done.append((cur, dst))
    return done


def global_to_local_swap(comm: Communicator, state: StateSlice, pairs: Sequence[tuple[int, int]], l: int) -> None:
    """Exchange bit ``G`` with bit ``L`` for every ``(G, L)`` pair, collectively.

    1. local swaps bring the ``L`` bits to the top ``q`` local locations,
    2. one all-to-all inside each group of ``2^q`` ranks that differ only in
       the ``G`` bits,
    3. the local swaps of step 1 are undone.
    """
    pairs = sorted((int(G), int(L)) for G, L in pairs)
    gl = [G for G, _ in pairs]
    ll = [L for _, L in pairs]
    if len(set(gl)) != len(gl) or len(set(ll)) != len(ll):
        raise ValueError(f"overlapping swap pairs {pairs}")
    for G, L in pairs:
        if not l <= G < l + comm.g or not 0 <= L < l:
            raise ValueError(f"pair ({G}, {L}) is not (global, local) for l={l}, g={comm.g}")
    q = len(pairs)
    if q == 0:
        return
    undo = _move_to_top(state, ll)
    rank_bits = [G - l for G in gl]
    me = comm.logical_rank
    base = me & ~sum(1 << b for b in rank_bits)
    group = []
    for m in range(1 << q):
        r = base
        for j, b in enumerate(rank_bits):
            if (m >> j) & 1:
                r |= 1 << b
        group.append(r)
    amps = state.amplitudes
    blocks = list(amps.reshape(1 << q, -1))
    received = all_to_all(comm, group, blocks)
    amps.reshape(1 << q, -1)[...] = np.stack(received)
    for a, b in reversed(undo):
        kernel.local_swap(state, a, b)


def apply_specialized_global(comm: Communicator, state: StateSlice, action: SpecializedAction, l: int) -> None:
    """Diagonal gates on global bits as rank-conditional local work; CNOT as a relabel."""
    r = comm.logical_rank

    def bit(loc: int) -> int:
        if not l <= loc < l + comm.g:
            raise ValueError(f"location {loc} is not global for l={l}, g={comm.g}")
        return (r >> (loc - l)) & 1

    kind, locs = action.kind, action.locs
    if kind == "cz_gg":
        if bit(locs[0]) and bit(locs[1]):
            kernel.apply_phase(state, -1)
    elif kind == "cz_gl":
        if bit(locs[0]):
            kernel.apply_diagonal_z(state, locs[1])
    elif kind == "t_g":
        if bit(locs[0]):
            kernel.apply_phase(state, T_PHASE)
    elif kind == "z_g":
        if bit(locs[0]):
            kernel.apply_phase(state, -1)
    elif kind == "cnot_gg":
        bit(locs[0]), bit(locs[1])
        comm.apply_cnot_relabel(locs[0] - l, locs[1] - l)
    else:
        raise ValueError(f"no specialized form for {kind!r}")


# -- execution ---------------------------------------------------------------------


def _init_slice(init: str, n: int, l: int, logical_rank: int, dtype) -> StateSlice:
    if init == "uniform":
        return StateSlice(np.full(1 << l, 2 ** (-n / 2), dtype=dtype))
    if init == "basis0":
        s = StateSlice.zeros(l, dtype)
        if logical_rank == 0:
            s.amplitudes[0] = 1
        return s
    raise ValueError(f"unknown init {init!r}")


def run(
    plan: SchedulePlan,
    ranks: int | None = None,
    init: str | None = None,
    config: KernelConfig | None = None,
    *,
    precision: str = "double",
    world: EmulatedWorld | None = None,
) -> DistributedState:
    """Execute ``plan`` on ``2^g`` emulated ranks; ``init=None`` takes the plan's own."""
    size = (1 << plan.g) if ranks is None else ranks
    if world is None:
        world = EmulatedWorld(size)
    if world.size != size or size != 1 << plan.g:
        raise ValueError(f"plan needs 2^{plan.g} ranks, got {world.size}")
    init = plan.init if init is None else init
    dtype = {"double": np.complex128, "single": np.complex64}.get(precision)
    if dtype is None:
        raise ValueError(f"unknown precision {precision!r}")
    if config is None:
        config = KernelConfig(threads=kernel.default_threads(), k_max=max(plan.k_max, 1))
    l = plan.l

    def body(comm: Communicator):
        timing = RunTimings()
        state = _init_slice(init, plan.n, l, comm.logical_rank, dtype)
        for s, stage in enumerate(plan.stages):
            t0 = time.perf_counter()
            for op in stage.ops:
                if isinstance(op, SpecializedAction):
                    apply_specialized_global(comm, state, op, l)
                else:
                    kernel.apply_gate(state, op.fused, op.locs, config)
            timing.compute += time.perf_counter() - t0
            if s < len(plan.swaps):
                sw = plan.swaps[s]
                w0 = world.wait_seconds[comm.rank]
                t0 = time.perf_counter()
                global_to_local_swap(comm, state, sw.pairs, l)
                dt = time.perf_counter() - t0
                waited = world.wait_seconds[comm.rank] - w0
                timing.exchange += dt - waited
                timing.wait += waited
                t0 = time.perf_counter()
                for a, b in sw.relayout:
                    kernel.local_swap(state, a, b)
                timing.compute += time.perf_counter() - t0
        return state, comm.rank_relabel, timing

    out = spmd(world, body)
    slices = [o[0] for o in out]
    relabel = out[0][1]
    return DistributedState(
        n=plan.n,
        l=l,
        slices=slices,
        qmap=plan.final_map,
        rank_relabel=list(relabel),
        timings=[o[2] for o in out],
        exchanges=world.calls[0]["alltoall"],
    )


def _reduce(dstate: DistributedState, local: Callable[[StateSlice], float]) -> float:
    world = EmulatedWorld(len(dstate.slices))
    return spmd(world, lambda c: c.allreduce(local(dstate.slices[c.rank])))[0]


def reduce_norm(dstate: DistributedState) -> float:
    """``sqrt(sum |a|^2)`` over all ranks."""
    return float(np.sqrt(_reduce(dstate, kernel.local_norm_sq)))


def reduce_entropy(dstate: DistributedState) -> float:
    """Shannon entropy ``-sum p ln p`` (natural log) of the output distribution."""
    return float(_reduce(dstate, kernel.local_entropy_terms))


def query_amplitude(dstate: DistributedState, bitstring: str | int) -> complex:
    """Amplitude of a basis state; strings read with qubit 0 as the rightmost character."""
    if isinstance(bitstring, str):
        s = bitstring.strip()
        if len(s) != dstate.n or set(s) - {"0", "1"}:
            raise ValueError(f"expected {dstate.n} binary digits, got {bitstring!r}")
        index = int(s, 2)
    else:
        index = int(bitstring)
        if not 0 <= index < 1 << dstate.n:
            raise ValueError(f"index {index} out of range for {dstate.n} qubits")
    owner, local = dstate.locate(index)

    def part(s: StateSlice, rank: int) -> complex:
        return kernel.amplitude_at(s, local) if rank == owner else 0j

    world = EmulatedWorld(len(dstate.slices))
    return complex(spmd(world, lambda c: c.allreduce(part(dstate.slices[c.rank], c.rank)))[0])


def dump_slices(dstate: DistributedState, directory: str | Path) -> list[Path]:
    """Write each logical rank's slice as little-endian f64 (re, im) pairs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for p, s in enumerate(dstate.slices):
        path = directory / f"rank{dstate.rank_relabel[p]:05d}.bin"
        s.amplitudes.astype("<c16").tofile(path)
        paths.append(path)
    return sorted(paths)
