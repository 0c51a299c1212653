import json
import subprocess
import sys

import pytest

from qcsim.cli import main
from qcsim.circuit import parse


def run_cli(capsys, *args):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def circ_file(tmp_path, capsys):
    path = tmp_path / "c.json"
    code, out, _ = run_cli(capsys, "generate", "--rows", 3, "--cols", 4, "--depth", 25, "--seed", 1, "-o", path)
    assert code == 0
    return path


def test_generate_writes_file(tmp_path, capsys):
    path = tmp_path / "c30.json"
    code, out, _ = run_cli(capsys, "generate", "--rows", 6, "--cols", 5, "--depth", 25, "--seed", 1, "-o", path)
    assert code == 0
    info = json.loads(out)
    assert info["qubits"] == 30 and parse(path.read_bytes()).n == 30
    # simulated-gate count lands within 5% of the reference 369
    assert abs(info["simulated_total"] - 369) / 369 < 0.05


def test_generate_stdout(capsys):
    code, out, err = run_cli(capsys, "generate", "--rows", 2, "--cols", 2, "--depth", 3)
    assert code == 0 and parse(out).n == 4 and "by_kind" in err


def test_generate_usage_errors(capsys):
    assert run_cli(capsys, "generate", "--rows", 0, "--cols", 5, "--depth", 3)[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--rows", "x"])
    assert exc.value.code == 2


def test_schedule_report(circ_file, capsys):
    code, out, _ = run_cli(capsys, "schedule", circ_file, "-l", 10, "--worst-case")
    rep = json.loads(out)
    assert code == 0
    assert rep["swaps"] == len(rep["per_stage"]) - 1
    assert set(rep["clusters_per_kmax"]) == {"3", "4", "5"}
    assert rep["clusters"] == rep["clusters_per_kmax"]["5"]
    assert sorted(rep["final_map"]) == list(range(12))
    assert "compile_seconds" not in rep


def test_schedule_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"rows":1,"cols":2,"depth":0,"seed":0,"gates":[{"kind":"CX","qubits":[0,1],"cycle":0}]}')
    code, _, err = run_cli(capsys, "schedule", bad)
    assert code == 2 and "CX" in err
    assert run_cli(capsys, "schedule", tmp_path / "missing.json")[0] == 2
    code, _, err = run_cli(capsys, "schedule", bad, "-l", 5)
    assert code == 2


def test_run_report(circ_file, tmp_path, capsys):
    amps = tmp_path / "bits.txt"
    amps.write_text("000000000000\n101010101010\n")
    code, out, _ = run_cli(capsys, "run", circ_file, "--ranks", 4, "--entropy", "--amplitudes", amps)
    rep = json.loads(out)
    assert code == 0
    assert rep["ranks"] == 4 and rep["local_qubits"] == 10
    assert abs(rep["norm"] - 1) < 1e-10
    assert rep["compute_pct"] + rep["exchange_pct"] + rep["wait_pct"] <= 100.01
    assert set(rep["amplitudes"]) == {"000000000000", "101010101010"}
    assert rep["swaps"] == rep["exchanges"]


def test_run_ranks_agree(circ_file, capsys):
    reps = []
    for ranks in (1, 8):
        bits = circ_file.parent / "b.txt"
        bits.write_text("\n".join(format(i, "012b") for i in range(0, 4096, 97)))
        code, out, _ = run_cli(capsys, "run", circ_file, "--ranks", ranks, "--amplitudes", bits)
        reps.append(json.loads(out)["amplitudes"])
    for k in reps[0]:
        assert max(abs(a - b) for a, b in zip(reps[0][k], reps[1][k])) < 1e-12


def test_run_refuses_over_memory_cap(circ_file, capsys):
    code, _, err = run_cli(capsys, "run", circ_file, "--memory-cap-gib", 1e-6)
    assert code == 2 and "cap" in err
    assert run_cli(capsys, "run", circ_file, "--ranks", 3)[0] == 2
    assert run_cli(capsys, "run", circ_file, "--ranks", 4, "-l", 5)[0] == 2


def test_verify_passes_and_fault_fails(capsys):
    code, out, _ = run_cli(capsys, "verify", "--trials", 4, "--max-qubits", 8)
    assert code == 0 and json.loads(out)["max_error"] < 1e-12
    code, out, _ = run_cli(capsys, "verify", "--trials", 2, "--max-qubits", 8, "--inject-fault")
    assert code == 1 and not json.loads(out)["passed"]


def test_verify_zero_trials(capsys):
    code, out, err = run_cli(capsys, "verify", "--trials", 0)
    assert code == 0 and "warning" in err and json.loads(out)["passed"]
    assert run_cli(capsys, "verify", "--max-qubits", 12)[0] == 2


def test_bench_csv(capsys):
    code, out, _ = run_cli(capsys, "bench", "--qubits", 12, "--k", "1,2", "--repeats", 1, "--locs", "high")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("k,qubits,locs")
    assert [l.split(",")[0] for l in lines[1:]] == ["1", "2"]
    assert run_cli(capsys, "bench", "--qubits", 4, "--k", "7")[0] == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "qcsim.cli", "generate", "--rows", "1", "--cols", "2",
                        "--depth", "1"], capture_output=True, text=True)
    assert r.returncode == 0 and parse(r.stdout).n == 2
