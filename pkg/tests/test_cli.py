"""Command-line surface: exit codes, artifacts on disk, report text."""

import json
import shutil
import subprocess

import numpy as np
import pytest

from muxnet.cli import DEFAULT_CONFIG, EXIT_CONFIG, EXIT_INPUT, EXIT_OK, EXIT_VERIFY, main
from muxnet.compiler import load_model


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """checkpoint + compiled model shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    ckpt = root / "model.muxf"
    compiled = root / "model.muxn"
    assert main(["init-model", "--out", str(ckpt), "--seed", "0"]) == EXIT_OK
    assert main(["compile", "--model", str(ckpt), "--out", str(compiled)]) == EXIT_OK
    return root, ckpt, compiled


def test_init_compile_report(tmp_path, capsys):
    ckpt = tmp_path / "m.muxf"
    out = tmp_path / "m.muxn"
    assert main(["init-model", "--out", str(ckpt)]) == EXIT_OK
    assert main(["compile", "--model", str(ckpt), "--out", str(out), "--report"]) == EXIT_OK
    text = capsys.readouterr().out
    lines = dict(line.split("=", 1) for line in text.splitlines()
                 if "=" in line and " " not in line)
    model = load_model(out)
    assert int(lines["weight_memory_bits"]) == model.storage_bits
    assert int(lines["lut_memory_bits"]) > model.storage_bits
    assert int(lines["table_entries"]) == 3 * (1 << 10) * 4


def test_verify_default_suite(artifacts, capsys):
    _, _, compiled = artifacts
    assert main(["verify", "--model", str(compiled), "--cases", "500"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "ok   exhaustive n=2 m=3 (2^6 * 4^2 cases): 1024 cases checked" in out
    assert "engine vs direct-MAC reference" in out
    assert "FAIL" not in out


def test_verify_fault_injection_exits_one(capsys):
    assert main(["verify", "--inject-fault"]) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "counterexample" in out


def test_verify_trace_written(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    assert main(["verify", "--cases", "64", "--trace", str(trace)]) == EXIT_OK
    lines = trace.read_text().strip().splitlines()
    assert lines[0] == "cycle,group,bitplane,key,selected_entry,accumulator"
    assert len(lines) > 2
    # final accumulator is the inner product 3*17 + (-7)*(-9)
    assert lines[-1].split(",")[-1] == "114"


def test_loop_synthetic_is_deterministic(artifacts, capsys):
    root, _, compiled = artifacts
    a, b = root / "a.jsonl", root / "b.jsonl"
    args = ["loop", "--model", str(compiled), "--synthetic", "3", "--seconds", "90"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rows = [json.loads(line) for line in a.read_text().splitlines()]
    assert sum(r["kind"] == "decision" for r in rows) == 3
    capsys.readouterr()


def test_loop_empty_trigger_classes(artifacts, capsys):
    root, _, compiled = artifacts
    out = root / "quiet.jsonl"
    rc = main(["loop", "--model", str(compiled), "--synthetic", "1",
               "--seconds", "30", "--trigger-classes", "", "--out", str(out)])
    assert rc == EXIT_OK
    assert "0 pulses" in capsys.readouterr().out
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert all(r["kind"] == "decision" for r in rows)


def test_loop_from_signal_file(artifacts, capsys):
    root, _, compiled = artifacts
    sig = root / "sig.muxs"
    out = root / "sig.jsonl"
    assert main(["make-signal", "--out", str(sig), "--seed", "4",
                 "--seconds", "60"]) == EXIT_OK
    assert main(["loop", "--model", str(compiled), "--signal", str(sig),
                 "--out", str(out)]) == EXIT_OK
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert sum(r["kind"] == "decision" for r in rows) == 2
    capsys.readouterr()


def test_loop_without_source_is_config_error(artifacts, capsys):
    root, _, compiled = artifacts
    rc = main(["loop", "--model", str(compiled), "--out", str(root / "x.jsonl")])
    assert rc == EXIT_CONFIG
    capsys.readouterr()


def test_cost_model_csv(artifacts, capsys):
    root, _, compiled = artifacts
    out = root / "cost.csv"
    assert main(["cost", "--model", str(compiled), "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "gating:" in text and "cycles=" in text
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("layer,kind,")
    assert lines[-1].startswith("total,")
    assert len(lines) == 1 + 4 + 1


def test_cost_sweep_csv(tmp_path, capsys):
    sweep = tmp_path / "sweep.json"
    sweep.write_text(json.dumps({"n": [2], "m": [4, 5, 10]}))
    out = tmp_path / "sweep.csv"
    assert main(["cost", "--sweep", str(sweep), "--out", str(out)]) == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 4
    m5 = lines[2].split(",")
    assert m5[1] == "5" and m5[4] == ""  # odd m: no even split
    m10 = lines[3].split(",")
    assert float(m10[4]) == 512.0
    capsys.readouterr()


def test_cost_without_input_is_config_error(tmp_path, capsys):
    assert main(["cost", "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    capsys.readouterr()


def test_eval_dataset(artifacts, tmp_path, capsys):
    _, _, compiled = artifacts
    rng = np.random.default_rng(6)
    data = tmp_path / "data.npz"
    np.savez(data, segments=rng.normal(scale=0.2, size=(3, 6, 320)),
             labels=rng.integers(0, 5, size=3))
    out = tmp_path / "eval.csv"
    assert main(["eval", "--model", str(compiled), "--data", str(data),
                 "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "accuracy=" in text and "savings_fraction=" in text
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "epoch,stage,classifications_used,v0,v1,v2,v3,v4,v5"
    assert len(lines) == 4


def test_eval_requires_segments_key(artifacts, tmp_path, capsys):
    _, _, compiled = artifacts
    data = tmp_path / "bad.npz"
    np.savez(data, foo=np.zeros(3))
    rc = main(["eval", "--model", str(compiled), "--data", str(data),
               "--out", str(tmp_path / "x.csv")])
    assert rc == EXIT_CONFIG
    capsys.readouterr()


def test_corrupt_model_is_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.muxn"
    bad.write_bytes(b"MUXN" + b"\x00" * 10)
    assert main(["verify", "--model", str(bad), "--cases", "16"]) == EXIT_INPUT
    assert main(["loop", "--model", str(bad), "--synthetic", "0",
                 "--out", str(tmp_path / "x.jsonl")]) == EXIT_INPUT
    capsys.readouterr()


def test_missing_file_is_input_error(tmp_path, capsys):
    rc = main(["compile", "--model", str(tmp_path / "nope.muxf"),
               "--out", str(tmp_path / "x.muxn")])
    assert rc == EXIT_INPUT
    capsys.readouterr()


def test_bad_config_is_config_error(artifacts, tmp_path, capsys):
    _, ckpt, _ = artifacts
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    rc = main(["compile", "--model", str(ckpt), "--out",
               str(tmp_path / "x.muxn"), "--config", str(broken)])
    assert rc == EXIT_CONFIG
    bad_values = tmp_path / "bad.json"
    bad_values.write_text(json.dumps({"loop": {"cic": {"decimation": 1}}}))
    rc = main(["loop", "--model", str(ckpt), "--synthetic", "0",
               "--out", str(tmp_path / "y.jsonl"), "--config", str(bad_values)])
    assert rc == EXIT_CONFIG
    capsys.readouterr()


def test_dump_config_is_valid_json(capsys):
    assert main(["dump-config"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == DEFAULT_CONFIG


def test_dump_table_golden(tmp_path, capsys):
    out = tmp_path / "table.txt"
    assert main(["dump-table", "--n", "2", "--m", "2", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 16
    assert lines[0] == "0 : 0 0 0 0"
    assert lines[1] == "1 : 0 1 0 1"
    capsys.readouterr()


def test_console_script_installed():
    exe = shutil.which("muxnet")
    assert exe is not None
    proc = subprocess.run([exe, "dump-config"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout) == DEFAULT_CONFIG
