"""Compile a circuit into stages of fused clusters separated by global-to-local swaps.

Pipeline (:func:`compile`):

1. :func:`partition_stages` splits the gate list into maximal stages. Gates
   may only be reordered when their supports are disjoint. A stage runs every
   gate whose qubits are local, plus diagonal gates on global qubits when
   specialization is on.
2. :func:`cluster_gates` packs each stage into clusters of at most ``k_max``
   qubits.
3. :func:`adjust_swap_points` moves a stage's trailing cluster past the swap
   when the next stage can absorb it without needing another swap.
4. :func:`map_qubits` picks bit-locations so that most clusters touch low
   locations.

Ties are always broken towards the lowest qubit id or the lowest location.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .circuit import Circuit, Gate, GateKind, simulated_gates
from .fusion import K_MAX_DEFAULT, K_MAX_LIMIT, Cluster, GateMatrix, fuse

__all__ = [
    "QubitMap",
    "SpecializedAction",
    "Stage",
    "SwapDirective",
    "SchedulePlan",
    "Partition",
    "CompileConfig",
    "partition_stages",
    "select_swap_qubits",
    "stage_scan",
    "cluster_gates",
    "adjust_swap_points",
    "map_qubits",
    "compile",
    "replay_order",
    "global_gate_cycles",
]


# -- domain types --------------------------------------------------------------


@dataclass(frozen=True)
class QubitMap:
    """``locations[q]`` is the bit-location of qubit ``q``; locations ``>= l`` are global."""

    locations: tuple[int, ...]
    l: int

    def __post_init__(self) -> None:
        locs = tuple(int(x) for x in self.locations)
        object.__setattr__(self, "locations", locs)
        if sorted(locs) != list(range(len(locs))):
            raise ValueError(f"qubit map is not a bijection onto 0..{len(locs) - 1}: {locs}")
        if not 0 <= self.l <= len(locs):
            raise ValueError(f"l={self.l} outside 0..{len(locs)}")

    @classmethod
    def identity(cls, n: int, l: int) -> QubitMap:
        return cls(tuple(range(n)), l)

    @classmethod
    def from_order(cls, order: Sequence[int], l: int) -> QubitMap:
        """``order[loc]`` is the qubit placed at ``loc``."""
        locs = [0] * len(order)
        for loc, q in enumerate(order):
            locs[q] = loc
        return cls(tuple(locs), l)

    @property
    def n(self) -> int:
        return len(self.locations)

    @property
    def g(self) -> int:
        return self.n - self.l

    def loc(self, q: int) -> int:
        return self.locations[q]

    def order(self) -> list[int]:
        """Qubit at each location."""
        out = [0] * self.n
        for q, loc in enumerate(self.locations):
            out[loc] = q
        return out

    def qubit_at(self, loc: int) -> int:
        return self.order()[loc]

    def is_global(self, q: int) -> bool:
        return self.locations[q] >= self.l

    def global_qubits(self) -> list[int]:
        """Global qubits ordered by location."""
        return self.order()[self.l :]

    def local_qubits(self) -> list[int]:
        return self.order()[: self.l]

    def to_json(self) -> list[int]:
        return list(self.locations)


@dataclass(frozen=True)
class SpecializedAction:
    """A gate on global qubits executed without communication.

    ``kind`` is one of ``cz_gg``, ``cz_gl`` (locs = global, local), ``t_g``,
    ``z_g``, ``cnot_gg`` (locs = control, target).
    """

    kind: str
    locs: tuple[int, ...]
    gate_id: int = -1
    gate: Gate | None = None


Op = Cluster | SpecializedAction


@dataclass(frozen=True)
class Stage:
    ops: tuple[Op, ...]
    entry_map: QubitMap

    @property
    def clusters(self) -> list[Cluster]:
        return [op for op in self.ops if isinstance(op, Cluster)]

    @property
    def specialized(self) -> list[SpecializedAction]:
        return [op for op in self.ops if isinstance(op, SpecializedAction)]

    def gate_ids(self) -> list[int]:
        out: list[int] = []
        for op in self.ops:
            out.extend(op.gate_ids if isinstance(op, Cluster) else (op.gate_id,))
        return out


@dataclass(frozen=True)
class SwapDirective:
    """Exchange bit ``global_loc`` with bit ``local_loc`` for each pair, then apply
    the local transpositions in ``relayout`` (kernel locality, no communication)."""

    pairs: tuple[tuple[int, int], ...]
    relayout: tuple[tuple[int, int], ...] = ()

    @property
    def q(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class SchedulePlan:
    n: int
    l: int
    k_max: int
    init: str
    gates: tuple[Gate, ...]
    stages: tuple[Stage, ...]
    swaps: tuple[SwapDirective, ...]
    specialize: bool = True
    worst_case_dense: bool = False
    policy: str = "search"

    def __post_init__(self) -> None:
        if len(self.swaps) != max(len(self.stages) - 1, 0):
            raise ValueError("a plan has exactly one swap directive between consecutive stages")

    @property
    def g(self) -> int:
        return self.n - self.l

    @property
    def num_swaps(self) -> int:
        return len(self.swaps)

    @property
    def clusters(self) -> list[Cluster]:
        return [c for s in self.stages for c in s.clusters]

    @property
    def initial_map(self) -> QubitMap:
        return self.stages[0].entry_map if self.stages else QubitMap.identity(self.n, self.l)

    @property
    def final_map(self) -> QubitMap:
        if not self.stages:
            return QubitMap.identity(self.n, self.l)
        return self.stages[-1].entry_map

    def report(self) -> dict:
        clusters = self.clusters
        hist = Counter(len(c.gates) for c in clusters)
        ksizes = Counter(c.k for c in clusters)
        return {
            "qubits": self.n,
            "local_qubits": self.l,
            "global_qubits": self.g,
            "k_max": self.k_max,
            "policy": self.policy,
            "specialize": self.specialize,
            "worst_case_dense": self.worst_case_dense,
            "init": self.init,
            "gates": len(self.gates),
            "stages": len(self.stages),
            "swaps": self.num_swaps,
            "clusters": len(clusters),
            "specialized": sum(len(s.specialized) for s in self.stages),
            "gates_per_cluster": round(sum(len(c.gates) for c in clusters) / max(len(clusters), 1), 4),
            "gates_per_cluster_histogram": {str(k): hist[k] for k in sorted(hist)},
            "cluster_width_histogram": {str(k): ksizes[k] for k in sorted(ksizes)},
            "per_stage": [
                {
                    "gates": len(s.gate_ids()),
                    "clusters": len(s.clusters),
                    "specialized": len(s.specialized),
                    "global_qubits": s.entry_map.global_qubits(),
                }
                for s in self.stages
            ],
            "swap_pairs": [[list(p) for p in sw.pairs] for sw in self.swaps],
            "initial_map": self.initial_map.to_json(),
            "final_map": self.final_map.to_json(),
        }


@dataclass(frozen=True)
class CompileConfig:
    l: int
    k_max: int = K_MAX_DEFAULT
    specialize: bool = True
    worst_case_dense: bool = False
    skip_initial_h: bool = True
    skip_final_cz: bool = True
    policy: str = "search"
    adjust: bool = True
    mapping: bool = True

    def __post_init__(self) -> None:
        if not 1 <= self.k_max <= K_MAX_LIMIT:
            raise ValueError(f"k_max must be in 1..{K_MAX_LIMIT}")
        if self.policy not in ("search", "baseline"):
            raise ValueError(f"unknown swap policy {self.policy!r}")
        if self.l < 0:
            raise ValueError("l must be non-negative")


# -- stage partitioning --------------------------------------------------------


def _mode(gate: Gate, glob: Sequence[bool], specialize: bool, worst_case_dense: bool) -> str | None:
    """'local', 'special' or None (needs communication) for one gate."""
    flags = [glob[q] for q in gate.qubits]
    if not any(flags):
        return "local"
    if not specialize:
        return None
    kind = gate.kind
    if kind is GateKind.CZ or kind is GateKind.Z:
        return "special"
    if kind is GateKind.T and not worst_case_dense:
        return "special"
    if kind is GateKind.CNOT and all(flags):
        return "special"
    return None


def stage_scan(
    gates: Sequence[Gate],
    pending: Sequence[int],
    global_qubits: Iterable[int],
    n: int,
    *,
    specialize: bool = True,
    worst_case_dense: bool = False,
) -> tuple[list[int], list[int]]:
    """Maximal set of ``pending`` gates runnable with ``global_qubits`` held global.

    A gate runs iff it is runnable itself and no earlier pending gate on any of
    its qubits was held back. Returns ``(run, specialized)`` gate ids in
    program order; ``specialized`` is a subset of ``run``.
    """
    glob = [False] * n
    for q in global_qubits:
        glob[q] = True
    blocked = [False] * n
    run: list[int] = []
    special: list[int] = []
    for i in pending:
        qs = gates[i].qubits
        if any(blocked[q] for q in qs):
            for q in qs:
                blocked[q] = True
            continue
        mode = _mode(gates[i], glob, specialize, worst_case_dense)
        if mode is None:
            for q in qs:
                blocked[q] = True
            continue
        run.append(i)
        if mode == "special":
            special.append(i)
    return run, special


def _spec_class(gate: Gate, specialize: bool, worst_case_dense: bool) -> int:
    """0: needs all qubits local, 1: any global placement is fine, 2: fine only if all global."""
    if not specialize:
        return 0
    kind = gate.kind
    if kind is GateKind.CZ or kind is GateKind.Z or (kind is GateKind.T and not worst_case_dense):
        return 1
    return 2 if kind is GateKind.CNOT else 0


def _count_runnable(gates, classes, pending, glob, blocked, n) -> int:
    """Size of the :func:`stage_scan` result, without building it (hot loop of the search)."""
    for q in range(n):
        blocked[q] = False
    count = 0
    for i in pending:
        qs = gates[i].qubits
        ok = True
        for q in qs:
            if blocked[q]:
                ok = False
                break
        if ok:
            cls = classes[i]
            if cls == 0:
                ok = not any(glob[q] for q in qs)
            elif cls == 2:
                ok = all(glob[q] for q in qs) or not any(glob[q] for q in qs)
        if ok:
            count += 1
        else:
            for q in qs:
                blocked[q] = True
    return count


def select_swap_qubits(
    gates: Sequence[Gate],
    pending: Sequence[int],
    current: QubitMap,
    *,
    policy: str = "search",
    specialize: bool = True,
    worst_case_dense: bool = False,
    full_exchange: bool = True,
) -> list[tuple[int, int]]:
    """Choose which qubits become global next; returns ``(outgoing, incoming)`` qubit pairs.

    ``baseline`` swaps every global qubit with the qubits at the lowest local
    locations. ``search`` grows the new global set one qubit at a time, each
    time taking the candidate that lets the most pending gates run in the next
    stage (ties: lowest location). With ``full_exchange`` the new global set is
    disjoint from the old one.
    """
    n, l, g = current.n, current.l, current.g
    old = current.global_qubits()
    if g == 0:
        return []
    order = current.order()
    if policy == "baseline":
        k = min(g, l)
        return _pair(old[:k], order[:k], current)
    if policy != "search":
        raise ValueError(f"unknown swap policy {policy!r}")
    old_set = set(old)
    if full_exchange and g <= l:
        candidates = [q for q in order if q not in old_set]
    else:
        candidates = list(order)
    new = _greedy_globals(gates, pending, n, g, candidates, specialize, worst_case_dense)
    outgoing = [q for q in old if q not in new]
    incoming = [q for q in new if q not in old_set]
    return _pair(outgoing, incoming, current)


def _pair(outgoing: Sequence[int], incoming: Sequence[int], current: QubitMap) -> list[tuple[int, int]]:
    out = sorted(outgoing, key=current.loc)
    inc = sorted(incoming, key=current.loc)
    if len(out) != len(inc):
        raise ValueError("swap needs as many incoming as outgoing qubits")
    return list(zip(out, inc))


def _greedy_globals(gates, pending, n, g, candidates, specialize, worst_case_dense) -> list[int]:
    chosen: list[int] = []
    classes = [_spec_class(gt, specialize, worst_case_dense) for gt in gates]
    glob = [False] * n
    blocked = [False] * n
    for _ in range(g):
        best_q, best = None, -1
        for q in candidates:
            if glob[q]:
                continue
            glob[q] = True
            score = _count_runnable(gates, classes, pending, glob, blocked, n)
            glob[q] = False
            if score > best:
                best_q, best = q, score
        if best_q is None:
            raise ValueError("not enough candidate qubits to fill the global set")
        glob[best_q] = True
        chosen.append(best_q)
    return chosen


def _apply_pairs(current: QubitMap, pairs: Sequence[tuple[int, int]]) -> QubitMap:
    locs = list(current.locations)
    for out_q, in_q in pairs:
        locs[out_q], locs[in_q] = locs[in_q], locs[out_q]
    return QubitMap(tuple(locs), current.l)


@dataclass(frozen=True)
class Partition:
    """Per stage: gate ids in program order, the global qubits, and the
    location model used while partitioning (identity, then updated by swaps)."""

    stage_gates: tuple[tuple[int, ...], ...]
    maps: tuple[QubitMap, ...]
    specialized: frozenset[int] = field(default_factory=frozenset)

    @property
    def num_swaps(self) -> int:
        return max(len(self.stage_gates) - 1, 0)

    def global_sets(self) -> list[list[int]]:
        return [m.global_qubits() for m in self.maps]


def _partition(gates, n, l, specialize, worst_case_dense, policy) -> Partition:
    pending = list(range(len(gates)))
    if policy == "search" and l < n:
        # initial placement: same greedy search, any qubit may start global
        new = _greedy_globals(gates, pending, n, n - l, list(range(n)), specialize, worst_case_dense)
        local = [q for q in range(n) if q not in set(new)]
        current = QubitMap.from_order(local + sorted(new), l)
    else:
        current = QubitMap.identity(n, l)
    stages, maps, special = [], [], set()
    while True:
        run, spec = stage_scan(gates, pending, current.global_qubits(), n,
                               specialize=specialize, worst_case_dense=worst_case_dense)
        if not run and pending and stages:
            raise ValueError(
                f"no progress with {l} local qubits; a gate may need more local qubits than available"
            )
        stages.append(tuple(run))
        maps.append(current)
        special.update(spec)
        done = set(run)
        pending = [i for i in pending if i not in done]
        if not pending:
            break
        current = _next_map(gates, pending, current, policy, specialize, worst_case_dense)
    return Partition(tuple(stages), tuple(maps), frozenset(special))


def _next_map(gates, pending, current, policy, specialize, worst_case_dense) -> QubitMap:
    for full in (True, False):
        pairs = select_swap_qubits(gates, pending, current, policy=policy, specialize=specialize,
                                   worst_case_dense=worst_case_dense, full_exchange=full)
        nxt = _apply_pairs(current, pairs)
        run, _ = stage_scan(gates, pending, nxt.global_qubits(), current.n,
                            specialize=specialize, worst_case_dense=worst_case_dense)
        if run:
            return nxt
    if policy == "baseline":
        return _next_map(gates, pending, current, "search", specialize, worst_case_dense)
    return nxt


def partition_stages(
    gates: Sequence[Gate] | Circuit,
    l: int,
    *,
    n: int | None = None,
    specialize: bool = True,
    worst_case_dense: bool = False,
    policy: str = "search",
) -> Partition:
    """Greedy maximal stages.

    ``search`` also builds the baseline plan and, with specialization on, both
    plans without specialization, keeping whichever needs the fewest swaps.
    """
    if isinstance(gates, Circuit):
        n = gates.n if n is None else n
        gates = list(gates.gates)
    if n is None:
        n = 1 + max((q for g in gates for q in g.qubits), default=-1)
    if l > n:
        raise ValueError(f"l={l} exceeds the qubit count n={n}")
    if l < 0:
        raise ValueError("l must be non-negative")
    if not gates:
        return Partition(((),), (QubitMap.identity(n, l),))
    if policy == "baseline":
        return _partition(gates, n, l, specialize, worst_case_dense, "baseline")
    # candidates in order of preference; a strictly smaller swap count wins
    variants = [(specialize, "search"), (specialize, "baseline")]
    if specialize:
        # a plan that never specializes is still valid, so specializing can never cost swaps
        variants += [(False, "search"), (False, "baseline")]
    best: Partition | None = None
    error: ValueError | None = None
    for spec, pol in variants:
        try:
            cand = _partition(gates, n, l, spec, worst_case_dense, pol)
        except ValueError as exc:
            error = error or exc
            continue
        if best is None or cand.num_swaps < best.num_swaps:
            best = cand
    if best is None:
        raise error
    return best


def global_gate_cycles(gates: Sequence[Gate], global_qubits: Iterable[int], *, specialize: bool = True,
                       worst_case_dense: bool = True) -> int:
    """Cycles holding at least one gate that needs communication under a fixed map."""
    glob = set(global_qubits)
    n = 1 + max([q for g in gates for q in g.qubits] + list(glob), default=-1)
    flags = [q in glob for q in range(n)]
    cycles = {g.cycle for g in gates if _mode(g, flags, specialize, worst_case_dense) is None}
    return len(cycles)


# -- clustering ----------------------------------------------------------------


def cluster_gates(
    gates: Sequence[Gate],
    stage: Sequence[int],
    k_max: int,
    specialized: Iterable[int] = (),
) -> list[tuple[str, list[int]]]:
    """Split one stage into ordered units ``("cluster", ids)`` / ``("special", [id])``.

    Specialized gates are emitted as soon as they are ready. For clusters,
    every ready gate is tried as a seed; a seed grows by absorbing every gate
    that fits its support, then by the ready gate whose addition admits the
    most gates, until ``k_max`` is reached. The largest cluster is kept.
    """
    special = set(specialized)
    stage = list(stage)
    for i in stage:
        if i not in special and len(gates[i].qubits) > k_max:
            raise ValueError(f"gate {i} acts on {len(gates[i].qubits)} qubits > k_max={k_max}")
    perq: dict[int, list[int]] = {}
    for i in stage:
        for q in gates[i].qubits:
            perq.setdefault(q, []).append(i)
    qubits = sorted(perq)
    ptr = {q: 0 for q in qubits}

    def head(p: dict[int, int], q: int) -> int | None:
        lst = perq[q]
        return lst[p[q]] if p[q] < len(lst) else None

    def ready(p: dict[int, int], i: int) -> bool:
        return all(head(p, q) == i for q in gates[i].qubits)

    def take(p: dict[int, int], i: int) -> None:
        for q in gates[i].qubits:
            p[q] += 1

    def closure(support: set[int], p: dict[int, int], members: list[int]) -> None:
        changed = True
        while changed:
            changed = False
            for q in sorted(support):
                i = head(p, q)
                if (
                    i is not None
                    and i not in special
                    and all(x in support for x in gates[i].qubits)
                    and ready(p, i)
                ):
                    take(p, i)
                    members.append(i)
                    changed = True

    def frontier(p: dict[int, int]) -> list[int]:
        out = set()
        for q in qubits:
            i = head(p, q)
            if i is not None and i not in special and ready(p, i):
                out.add(i)
        return sorted(out)

    def grow(seed: int) -> tuple[list[int], dict[int, int]]:
        p = dict(ptr)
        support = set(gates[seed].qubits)
        members = [seed]
        take(p, seed)
        closure(support, p, members)
        while True:
            best = None
            for i in frontier(p):
                wider = support | set(gates[i].qubits)
                if len(wider) > k_max or len(wider) == len(support):
                    continue
                p2 = dict(p)
                m2 = [i]
                take(p2, i)
                closure(wider, p2, m2)
                key = (len(m2), -len(wider))
                if best is None or key > best[0]:
                    best = (key, wider, p2, m2)
            if best is None:
                return members, p
            _, support, p, extra = best
            members.extend(extra)

    units: list[tuple[str, list[int]]] = []
    remaining = len(stage)
    while remaining:
        progress = True
        while progress:
            progress = False
            for q in qubits:
                i = head(ptr, q)
                if i is not None and i in special and ready(ptr, i):
                    take(ptr, i)
                    units.append(("special", [i]))
                    remaining -= 1
                    progress = True
        if not remaining:
            break
        best_members, best_ptr = None, None
        for seed in frontier(ptr):
            members, p = grow(seed)
            if best_members is None or len(members) > len(best_members):
                best_members, best_ptr = members, p
        assert best_members is not None
        units.append(("cluster", best_members))
        ptr = best_ptr
        remaining -= len(best_members)
    return units


def _n_clusters(units) -> int:
    return sum(1 for kind, _ in units if kind == "cluster")


def adjust_swap_points(
    gates: Sequence[Gate],
    partition: Partition,
    k_max: int,
    units: list[list[tuple[str, list[int]]]] | None = None,
    *,
    specialize: bool = True,
    worst_case_dense: bool = False,
) -> tuple[Partition, list[list[tuple[str, list[int]]]]]:
    """Push each stage's trailing cluster into the next stage while that lowers the cluster count.

    The swap count never changes: a cluster only moves if every gate in it can
    run under the next stage's global set.
    """
    n = partition.maps[0].n
    stage_gates = [list(s) for s in partition.stage_gates]
    special = set(partition.specialized)
    if units is None:
        units = [cluster_gates(gates, s, k_max, special) for s in stage_gates]
    units = [list(u) for u in units]
    for s in range(len(stage_gates) - 1):
        while units[s] and units[s][-1][0] == "cluster":
            moved = sorted(units[s][-1][1])
            glob = [False] * n
            for q in partition.maps[s + 1].global_qubits():
                glob[q] = True
            modes = [_mode(gates[i], glob, specialize, worst_case_dense) for i in moved]
            if any(m is None for m in modes):
                break
            new_special = (special - set(moved)) | {i for i, m in zip(moved, modes) if m == "special"}
            nxt = moved + stage_gates[s + 1]
            new_units = cluster_gates(gates, nxt, k_max, new_special)
            before = _n_clusters(units[s]) + _n_clusters(units[s + 1])
            after = _n_clusters(units[s]) - 1 + _n_clusters(new_units)
            if after >= before:
                break
            units[s] = units[s][:-1]
            units[s + 1] = new_units
            moved_set = set(moved)
            stage_gates[s] = [i for i in stage_gates[s] if i not in moved_set]
            stage_gates[s + 1] = nxt
            special = new_special
    out = Partition(tuple(tuple(s) for s in stage_gates), partition.maps, frozenset(special))
    return out, units


# -- qubit mapping ---------------------------------------------------------------


def map_qubits(
    clusters: Sequence[Cluster | Iterable[int]],
    l: int,
    n: int | None = None,
    global_qubits: Sequence[int] = (),
) -> QubitMap:
    """Place local qubits so that many clusters act on low bit-locations.

    Locations 0-3: repeatedly take the qubit in the most still-counted
    clusters, then stop counting every cluster that contains it. Locations
    4-7: same, but a cluster stops counting once it holds two of the qubits
    placed at 4-7. The rest follow by total cluster count. Ties go to the
    larger total count, then the lowest qubit id. ``global_qubits`` fill
    locations ``l, l+1, ...`` in the given order.
    """
    supports = [set(c.support if isinstance(c, Cluster) else c) for c in clusters]
    if n is None:
        n = max(l + len(global_qubits), 1 + max((q for s in supports for q in s), default=-1))
    glob = list(global_qubits)
    if len(glob) != n - l or len(set(glob)) != len(glob):
        raise ValueError(f"need exactly {n - l} distinct global qubits, got {glob}")
    gset = set(glob)
    local = [q for q in range(n) if q not in gset]
    supports = [s - gset for s in supports]
    total = Counter(q for s in supports for q in s)

    placed: list[int] = []
    free = set(local)

    def pick(active: list[set[int]]) -> int:
        counts = Counter(q for s in active for q in s)
        return max(sorted(free), key=lambda q: (counts[q], total[q], -q))

    active = list(supports)
    for _ in range(min(4, len(local))):
        q = pick(active)
        placed.append(q)
        free.discard(q)
        active = [s for s in active if q not in s]
    active = list(supports)
    band: set[int] = set()
    for _ in range(min(4, len(free))):
        q = pick(active)
        placed.append(q)
        free.discard(q)
        band.add(q)
        active = [s for s in active if len(s & band) < 2]
    placed.extend(sorted(free, key=lambda q: (-total[q], q)))
    return QubitMap.from_order(placed + glob, l)


def _relayout(current: QubitMap, target: QubitMap) -> tuple[list[tuple[int, int]], QubitMap]:
    """Local transpositions turning ``current`` into ``target`` (globals must agree)."""
    cur = current.order()
    want = target.order()
    if cur[current.l :] != want[target.l :]:
        raise ValueError("relayout may only permute local locations")
    where = {q: loc for loc, q in enumerate(cur)}
    swaps = []
    for loc in range(current.l):
        q = want[loc]
        if cur[loc] != q:
            other = where[q]
            swaps.append((loc, other))
            cur[loc], cur[other] = cur[other], cur[loc]
            where[cur[loc]] = loc
            where[cur[other]] = other
    return swaps, QubitMap.from_order(cur, current.l)


# -- compile ---------------------------------------------------------------------


def _special_action(gate: Gate, gate_id: int, qmap: QubitMap) -> SpecializedAction:
    locs = tuple(qmap.loc(q) for q in gate.qubits)
    l = qmap.l
    if gate.kind is GateKind.CZ:
        if all(x >= l for x in locs):
            return SpecializedAction("cz_gg", tuple(sorted(locs)), gate_id, gate)
        glob = next(x for x in locs if x >= l)
        loc = next(x for x in locs if x < l)
        return SpecializedAction("cz_gl", (glob, loc), gate_id, gate)
    if gate.kind is GateKind.T:
        return SpecializedAction("t_g", locs, gate_id, gate)
    if gate.kind is GateKind.Z:
        return SpecializedAction("z_g", locs, gate_id, gate)
    if gate.kind is GateKind.CNOT:
        return SpecializedAction("cnot_gg", locs, gate_id, gate)
    raise ValueError(f"{gate.kind.value} cannot be specialized")


def _build_cluster(gates: Sequence[Gate], ids: list[int], qmap: QubitMap) -> Cluster:
    members = tuple(gates[i] for i in ids)
    support = sorted({q for g in members for q in g.qubits})
    fused = fuse(members, support)
    placed = GateMatrix(fused.entries, tuple(qmap.loc(q) for q in fused.qubit_order)).normalized()
    if any(x >= qmap.l for x in placed.qubit_order):
        raise AssertionError("cluster touches a global bit-location")
    return Cluster(members, tuple(support), tuple(ids), placed, placed.qubit_order)


def compile(circuit: Circuit, config: CompileConfig) -> SchedulePlan:
    """Partition, cluster, adjust swap points, map qubits and fuse."""
    n = circuit.n
    if config.l > n:
        raise ValueError(f"l={config.l} exceeds the qubit count n={n}")
    gates, uniform = simulated_gates(
        circuit, skip_initial_h=config.skip_initial_h, skip_final_cz=config.skip_final_cz
    )
    kw = dict(specialize=config.specialize, worst_case_dense=config.worst_case_dense)
    part = partition_stages(gates, config.l, n=n, policy=config.policy, **kw)
    units = [cluster_gates(gates, s, config.k_max, part.specialized) for s in part.stage_gates]
    if config.adjust:
        part, units = adjust_swap_points(gates, part, config.k_max, units, **kw)

    stages: list[Stage] = []
    swaps: list[SwapDirective] = []
    current: QubitMap | None = None
    for s, stage_units in enumerate(units):
        globals_now = part.maps[s].global_qubits()
        supports = [{q for i in ids for q in gates[i].qubits} for kind, ids in stage_units if kind == "cluster"]
        if current is None:
            target = _stage_layout(supports, config.l, n, globals_now, config.mapping)
            current = target
        else:
            prev_glob = current.global_qubits()
            outgoing = [q for q in prev_glob if q not in set(globals_now)]
            incoming = [q for q in globals_now if q not in set(prev_glob)]
            pairs = _pair(outgoing, incoming, current)
            exchanged = _apply_pairs(current, pairs)
            if config.mapping:
                target = map_qubits(supports, config.l, n, exchanged.global_qubits())
                relayout, current = _relayout(exchanged, target)
            else:
                relayout, current = [], exchanged
            loc_pairs = tuple(
                (exchanged.loc(in_q), exchanged.loc(out_q)) for out_q, in_q in pairs
            )
            swaps.append(SwapDirective(loc_pairs, tuple(relayout)))
        ops: list[Op] = []
        for kind, ids in stage_units:
            if kind == "special":
                ops.append(_special_action(gates[ids[0]], ids[0], current))
            else:
                ops.append(_build_cluster(gates, ids, current))
        stages.append(Stage(tuple(ops), current))
    return SchedulePlan(
        n=n,
        l=config.l,
        k_max=config.k_max,
        init="uniform" if uniform else "basis0",
        gates=tuple(gates),
        stages=tuple(stages),
        swaps=tuple(swaps),
        specialize=config.specialize,
        worst_case_dense=config.worst_case_dense,
        policy=config.policy,
    )


def _stage_layout(supports, l, n, globals_now, mapping: bool) -> QubitMap:
    if mapping:
        return map_qubits(supports, l, n, globals_now)
    local = [q for q in range(n) if q not in set(globals_now)]
    return QubitMap.from_order(local + list(globals_now), l)


def replay_order(plan: SchedulePlan) -> list[int]:
    """Gate ids in the order the plan executes them."""
    out: list[int] = []
    for stage in plan.stages:
        out.extend(stage.gate_ids())
    return out
