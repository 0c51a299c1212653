"""``qcsim`` command line: generate, schedule, run, verify, bench.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
Reports are JSON (``bench`` writes CSV).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dist, kernel, oracle
from .circuit import CircuitFormatError, generate_supremacy, parse, serialize, stats
from .fusion import K_MAX_LIMIT, Cluster, GateMatrix
from .kernel import KernelConfig
from .scheduler import CompileConfig, SchedulePlan, Stage, compile

DEFAULT_MEMORY_CAP_GIB = 16.0
GATE_COUNT_NOTE = (
    "gates counts what is simulated: no cycle-0 Hadamards, no CZs in the final cycle; "
    "depth counts CZ cycles"
)


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_circuit(path: str):
    try:
        return parse(Path(path).read_bytes())
    except OSError as exc:
        raise UsageError(f"cannot read circuit file: {exc}") from exc
    except CircuitFormatError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _local_qubits(n: int, ranks: int | None, l: int | None) -> int:
    if ranks is not None:
        if ranks < 1 or ranks & (ranks - 1):
            raise UsageError("--ranks must be a power of two")
        g = ranks.bit_length() - 1
        if l is not None and l + g != n:
            raise UsageError(f"--local-qubits {l} and --ranks {ranks} do not add up to {n} qubits")
        if g > n:
            raise UsageError(f"{ranks} ranks exceed 2^{n}")
        return n - g
    return n if l is None else l


def _check_memory(n: int, precision: str, cap_gib: float) -> None:
    need = (1 << n) * (16 if precision == "double" else 8)
    if need > cap_gib * 2**30:
        raise UsageError(
            f"a {n}-qubit state needs {need / 2**30:.1f} GiB, over the {cap_gib:g} GiB cap; "
            "use fewer qubits, --precision single, or raise --memory-cap-gib"
        )


# -- generate ----------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.rows < 1 or args.cols < 1 or args.depth < 0:
        raise UsageError("--rows and --cols must be >= 1 and --depth >= 0")
    circ = generate_supremacy(
        args.rows, args.cols, args.depth, args.seed,
        include_initial_h=not args.no_initial_h, include_final_cz=not args.no_final_cz,
    )
    data = serialize(circ)
    info = stats(circ)
    info["gate_count_note"] = GATE_COUNT_NOTE
    if args.out:
        Path(args.out).write_bytes(data)
        sys.stdout.write(_dumps(info))
    else:
        sys.stdout.buffer.write(data)
        sys.stderr.write(_dumps(info))
    return 0


# -- schedule ----------------------------------------------------------------------


def _config(args, n: int, k_max: int | None = None) -> CompileConfig:
    l = _local_qubits(n, getattr(args, "ranks", None), args.local_qubits)
    if l > n:
        raise UsageError(f"--local-qubits {l} exceeds the {n} qubits of the circuit")
    return CompileConfig(
        l=l,
        k_max=args.kmax if k_max is None else k_max,
        specialize=args.specialize,
        worst_case_dense=args.worst_case,
        policy=args.policy,
    )


def cmd_schedule(args) -> int:
    circ = _load_circuit(args.circuit)
    t0 = time.perf_counter()
    try:
        plan = compile(circ, _config(args, circ.n))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seconds = time.perf_counter() - t0
    report = plan.report()
    per_k = {}
    for k in sorted({3, 4, 5, args.kmax}):
        if k == args.kmax:
            per_k[str(k)] = len(plan.clusters)
        else:
            per_k[str(k)] = len(compile(circ, _config(args, circ.n, k)).clusters)
    report["clusters_per_kmax"] = per_k
    report["gate_count_note"] = GATE_COUNT_NOTE
    if args.timing:
        report["compile_seconds"] = round(seconds, 4)
    _emit(_dumps(report), args.out)
    return 0


# -- run ---------------------------------------------------------------------------


def _read_bitstrings(path: str, n: int) -> list[str]:
    try:
        lines = Path(path).read_text().split()
    except OSError as exc:
        raise UsageError(f"cannot read amplitude file: {exc}") from exc
    for s in lines:
        if len(s) != n or set(s) - {"0", "1"}:
            raise UsageError(f"bitstring {s!r} is not {n} binary digits")
    return lines


def cmd_run(args) -> int:
    circ = _load_circuit(args.circuit)
    _check_memory(circ.n, args.precision, args.memory_cap_gib)
    config = _config(args, circ.n)
    bitstrings = _read_bitstrings(args.amplitudes, circ.n) if args.amplitudes else []
    t0 = time.perf_counter()
    try:
        plan = compile(circ, config)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    kcfg = KernelConfig(threads=args.threads or kernel.default_threads(), k_max=plan.k_max,
                        block_size=args.block_size)
    state = dist.run(plan, config=kcfg, precision=args.precision)
    wall = time.perf_counter() - t0
    tm = state.timings
    spent = sum(t.total for t in tm) or 1.0
    report = {
        "qubits": circ.n,
        "gates": len(plan.gates),
        "ranks": 1 << plan.g,
        "local_qubits": plan.l,
        "swaps": plan.num_swaps,
        "exchanges": state.exchanges,
        "clusters": len(plan.clusters),
        "wall_seconds": round(wall, 4),
        "compute_pct": round(100 * sum(t.compute for t in tm) / spent, 2),
        "exchange_pct": round(100 * sum(t.exchange for t in tm) / spent, 2),
        "wait_pct": round(100 * sum(t.wait for t in tm) / spent, 2),
        "norm": dist.reduce_norm(state),
        "precision": args.precision,
    }
    if args.entropy:
        report["entropy"] = dist.reduce_entropy(state)
        report["entropy_porter_thomas"] = circ.n * math.log(2) - 1 + float(np.euler_gamma)
    if bitstrings:
        report["amplitudes"] = {
            s: [a.real, a.imag] for s in bitstrings for a in [dist.query_amplitude(state, s)]
        }
    if args.dump:
        report["dump"] = [str(p) for p in dist.dump_slices(state, args.dump)]
    if args.no_timing:
        for key in ("wall_seconds", "compute_pct", "exchange_pct", "wait_pct"):
            report.pop(key)
    _emit(_dumps(report), args.out)
    return 0


# -- verify ------------------------------------------------------------------------


def _grids(max_qubits: int) -> list[tuple[int, int]]:
    return [(r, c) for r in range(1, max_qubits + 1) for c in range(2, max_qubits + 1)
            if 4 <= r * c <= max_qubits and (r >= 2 or c >= 4)]


def inject_fault(plan: SchedulePlan) -> SchedulePlan:
    """Test hook: perturb one entry of the first fused matrix."""
    for s, stage in enumerate(plan.stages):
        for i, op in enumerate(stage.ops):
            if isinstance(op, Cluster):
                entries = op.fused.entries.copy()
                entries[0, 0] += 1
                bad = replace(op, fused=GateMatrix(entries, op.fused.qubit_order))
                ops = stage.ops[:i] + (bad,) + stage.ops[i + 1 :]
                stages = plan.stages[:s] + (Stage(ops, stage.entry_map),) + plan.stages[s + 1 :]
                return replace(plan, stages=stages)
    return plan


def cmd_verify(args) -> int:
    if args.max_qubits > oracle.MAX_SIMULATE_QUBITS or args.max_qubits < 4:
        raise UsageError(f"--max-qubits must be in 4..{oracle.MAX_SIMULATE_QUBITS}")
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    if args.trials == 0:
        sys.stderr.write("warning: --trials 0 checks nothing\n")
        sys.stdout.write(_dumps({"trials": 0, "failures": 0, "max_error": 0.0, "passed": True}))
        return 0
    rng = np.random.default_rng(args.seed)
    grids = _grids(args.max_qubits)
    worst, failures, rows = 0.0, 0, []
    for t in range(args.trials):
        r, c = grids[rng.integers(len(grids))]
        depth = int(rng.integers(5, 26))
        seed = int(rng.integers(0, 2**63))
        g = int(rng.integers(0, 3))
        circ = generate_supremacy(r, c, depth, seed)
        plan = compile(circ, CompileConfig(l=circ.n - g, k_max=args.kmax))
        if args.inject_fault:
            plan = inject_fault(plan)
        got = dist.run(plan).to_logical()
        ref = oracle.simulate_dense(circ, skip_initial_h=True, skip_final_cz=True).amplitudes
        err = float(np.max(np.abs(got - ref)))
        ok = err < args.tol
        failures += not ok
        worst = max(worst, err)
        rows.append({"trial": t, "rows": r, "cols": c, "depth": depth, "seed": seed, "g": g,
                     "max_error": err, "passed": ok})
    summary = {"trials": args.trials, "failures": failures, "max_error": worst,
               "tolerance": args.tol, "passed": failures == 0}
    if args.verbose:
        summary["details"] = rows
    sys.stdout.write(_dumps(summary))
    return 0 if failures == 0 else 1


# -- bench -------------------------------------------------------------------------


def _bench_locs(k: int, n: int, where: str) -> list[int]:
    return list(range(k)) if where == "low" else list(range(n - k, n))


def cmd_bench(args) -> int:
    ks = [int(x) for x in str(args.k).split(",") if x]
    if any(not 1 <= k <= K_MAX_LIMIT or k > args.qubits for k in ks):
        raise UsageError(f"--k values must be in 1..{min(K_MAX_LIMIT, args.qubits)}")
    _check_memory(args.qubits, "double", args.memory_cap_gib)
    rng = np.random.default_rng(args.seed)
    amps = (rng.standard_normal(1 << args.qubits) + 1j * rng.standard_normal(1 << args.qubits))
    amps /= np.linalg.norm(amps)
    threads = args.threads or kernel.default_threads()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "qubits", "locs", "block_size", "threads", "seconds", "gates_per_sec",
                "gflops", "bandwidth_gb_s"])
    for k in ks:
        dim = 1 << k
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
        block = args.block_size if args.block_size else min(dim, 8)
        if block > dim:
            block = dim
        cfg = KernelConfig(block_size=block, threads=threads, k_max=max(k, 1))
        locs = _bench_locs(k, args.qubits, args.locs)
        best = math.inf
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            kernel.apply_gate(amps, q, locs, cfg)
            best = min(best, time.perf_counter() - t0)
        flops = kernel.estimate_flops(k, args.qubits)
        moved = 2 * amps.nbytes
        w.writerow([k, args.qubits, args.locs, block, threads, f"{best:.6f}", f"{1 / best:.3f}",
                    f"{flops / best / 1e9:.4f}", f"{moved / best / 1e9:.4f}"])
    _emit(buf.getvalue(), args.out)
    return 0


# -- parser ------------------------------------------------------------------------


def _add_schedule_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--local-qubits", "-l", type=int, default=None, help="bits per rank (default: all)")
    p.add_argument("--kmax", type=int, default=5, choices=range(1, K_MAX_LIMIT + 1), metavar="K")
    p.add_argument("--specialize", action=argparse.BooleanOptionalAction, default=True,
                   help="run diagonal gates on global qubits without communication")
    p.add_argument("--worst-case", action="store_true",
                   help="treat single-qubit gates on global qubits as dense even when they are T")
    p.add_argument("--policy", choices=("search", "baseline"), default="search")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random supremacy circuit")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-initial-h", action="store_true")
    p.add_argument("--no-final-cz", action="store_true")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("schedule", help="compile a circuit and report stages, swaps and clusters")
    p.add_argument("circuit")
    _add_schedule_flags(p)
    p.add_argument("--timing", action="store_true", help="include compile time (not deterministic)")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("run", help="simulate a circuit on emulated ranks")
    p.add_argument("circuit")
    _add_schedule_flags(p)
    p.add_argument("--ranks", type=int, default=None, help="power of two; sets l = n - log2(ranks)")
    p.add_argument("--entropy", action="store_true")
    p.add_argument("--amplitudes", help="file of bitstrings (qubit 0 rightmost)")
    p.add_argument("--threads", type=int, default=None, help="kernel threads per rank (env QCSIM_THREADS)")
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--precision", choices=("double", "single"), default="double")
    p.add_argument("--memory-cap-gib", type=float, default=DEFAULT_MEMORY_CAP_GIB)
    p.add_argument("--dump", help="directory for per-rank binary slices")
    p.add_argument("--no-timing", action="store_true", help="omit timing fields (byte-stable report)")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="compare the pipeline against the dense oracle")
    p.add_argument("--max-qubits", type=int, default=10)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kmax", type=int, default=5, choices=range(1, K_MAX_LIMIT + 1), metavar="K")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="kernel throughput table (CSV)")
    p.add_argument("--k", default="1,2,3,4,5", help="comma-separated gate widths")
    p.add_argument("--qubits", type=int, default=20)
    p.add_argument("--locs", choices=("low", "high"), default="low")
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--memory-cap-gib", type=float, default=DEFAULT_MEMORY_CAP_GIB)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"qcsim {args.command}: error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
