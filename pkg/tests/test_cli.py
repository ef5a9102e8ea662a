import re
import subprocess
import sys

import pytest

from fedgen.experiment import read_csv

BASE = [sys.executable, "-m", "fedgen.cli"]


def run_cli(*args, **kw):
    return subprocess.run(
        BASE + list(args), capture_output=True, text=True, timeout=600, **kw
    )


def data_flags(idx_files):
    return [
        "--train-images", str(idx_files["train_images"]),
        "--train-labels", str(idx_files["train_labels"]),
        "--test-images", str(idx_files["test_images"]),
        "--test-labels", str(idx_files["test_labels"]),
    ]


def test_bound_reference_line():
    out = run_cli("bound", "--n", "100", "--K", "10", "--R", "1", "--theta", "0.5", "--B", "1", "--q", "0.5")
    assert out.returncode == 0
    match = re.fullmatch(
        r"bound_t5=([0-9.eE+-]+) k_condition=(true|false) k_condition_simplified=(true|false)",
        out.stdout.strip(),
    )
    assert match, out.stdout
    assert float(match.group(1)) == pytest.approx(0.0720, abs=5e-4)
    assert match.group(2) == "true"  # no condition needed for R = 1
    assert match.group(3) == "true"
    assert "term" in out.stderr  # human table on stderr


def test_bound_missing_required_flag_is_usage_error():
    out = run_cli("bound", "--n", "100", "--R", "1")
    assert out.returncode == 2


def test_bound_invalid_value_is_usage_error():
    out = run_cli("bound", "--n", "100", "--K", "10", "--R", "1", "--q", "0")
    assert out.returncode == 2
    assert "q" in out.stderr


def test_selftest_passes_and_is_deterministic():
    a = run_cli("selftest")
    b = run_cli("selftest")
    assert a.returncode == 0
    assert a.stdout == b.stdout
    assert "bounds.round_term pass" in a.stdout
    assert a.stdout.strip().endswith("all_checks=pass")


def test_ingest_reports_counts(idx_files):
    out = run_cli("ingest", *data_flags(idx_files))
    assert out.returncode == 0
    assert re.search(r"train_count=1400 test_count=300 dim=784 pos=1 neg=6", out.stdout)


def test_ingest_missing_file_is_runtime_error(idx_files, tmp_path):
    flags = data_flags(idx_files)
    flags[1] = str(tmp_path / "missing")
    out = run_cli("ingest", *flags)
    assert out.returncode == 1
    assert "error:" in out.stderr


def test_run_single_trial_line(idx_files):
    out = run_cli(
        "run", *data_flags(idx_files),
        "--K", "2", "--R", "2", "--n", "10",
        "--epochs", "2", "--rff-dim", "60", "--gamma", "0.00128", "--seed", "5",
    )
    assert out.returncode == 0, out.stderr
    match = re.fullmatch(
        r"emp=([0-9.eE+-]+) pop=([0-9.eE+-]+) gen=(-?[0-9.eE+-]+) theta=0.5",
        out.stdout.strip(),
    )
    assert match, out.stdout
    emp, pop, gen = (float(match.group(i)) for i in (1, 2, 3))
    assert gen == pytest.approx(pop - emp, abs=1e-9)
    again = run_cli(
        "run", *data_flags(idx_files),
        "--K", "2", "--R", "2", "--n", "10",
        "--epochs", "2", "--rff-dim", "60", "--gamma", "0.00128", "--seed", "5",
    )
    assert again.stdout == out.stdout


def _write_config(tmp_path, **overrides):
    lines = {
        "k_list": "2",
        "r_list": "1,2",
        "n_list": "10",
        "trials": "2",
        "rff_dim": "60",
        "epochs": "2",
        "gamma": "0.00128",
        "seed": "3",
        "out_csv": str(tmp_path / "sweep.csv"),
    }
    lines.update({k: str(v) for k, v in overrides.items()})
    path = tmp_path / "config.txt"
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
    return path


def test_sweep_writes_csv(idx_files, tmp_path):
    cfg = _write_config(tmp_path)
    out = run_cli("sweep", "--config", str(cfg), *data_flags(idx_files))
    assert out.returncode == 0, out.stderr
    rows = read_csv(tmp_path / "sweep.csv")
    assert [(r.K, r.R, r.n) for r in rows] == [(2, 1, 10), (2, 2, 10)]
    assert out.stdout.count("gen_mean=") == 2
    assert all(not r.heterogeneous for r in rows)


def test_sweep_heterogeneous_flagged(idx_files, tmp_path):
    cfg = _write_config(
        tmp_path, heterogeneous="true", noise_sigma="0.2", noise_fraction="0.2", r_list="1"
    )
    out = run_cli("sweep", "--config", str(cfg), *data_flags(idx_files))
    assert out.returncode == 0, out.stderr
    rows = read_csv(tmp_path / "sweep.csv")
    assert all(r.heterogeneous for r in rows)


def test_sweep_missing_config_exits_one(idx_files, tmp_path):
    out = run_cli("sweep", "--config", str(tmp_path / "nope.txt"), *data_flags(idx_files))
    assert out.returncode == 1


def test_sweep_unknown_config_key_exits_one(idx_files, tmp_path):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("mystery = 1\n")
    out = run_cli("sweep", "--config", str(cfg), *data_flags(idx_files))
    assert out.returncode == 1
    assert "mystery" in out.stderr


def test_estimate_q_reports_ratio(idx_files):
    out = run_cli(
        "estimate-q", *data_flags(idx_files),
        "--n", "20", "--R", "2", "--epochs", "2", "--rff-dim", "60",
        "--gamma", "0.00128", "--seed", "4",
    )
    assert out.returncode == 0, out.stderr
    match = re.search(r"q_hat=([0-9.eE+-]+) chunk_size=10", out.stdout)
    assert match
    assert 0.0 < float(match.group(1)) < 2.0


def test_no_subcommand_is_usage_error():
    out = run_cli()
    assert out.returncode == 2
