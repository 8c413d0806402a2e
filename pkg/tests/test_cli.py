import json

import numpy as np
import pytest

from gsn import bench, cli
from gsn.bench import PipelineError
from gsn.core import load_network
from gsn.sampling import load_dataset_csv


def run_cli(*argv):
    return cli.main(list(argv))


def bench_args(tmp_path, *extra):
    return ["bench", "ex1", "--seed", "0", "--out", str(tmp_path),
            "--epochs", "2", "--restarts", "1", "--threads", "1",
            "--config", str(write_tiny_config(tmp_path))] + list(extra)


def write_tiny_config(tmp_path, **fields):
    doc = {"n_train": 16, "n_val": 6, "n_test": 64, "dict_size": 150, "max_iter": 6}
    doc.update(fields)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def manifest_in(out_dir):
    runs = [p for p in out_dir.iterdir() if p.is_dir()]
    assert len(runs) == 1
    return json.loads((runs[0] / "manifest.json").read_text())


def test_bench_smoke(tmp_path, capsys):
    assert run_cli(*bench_args(tmp_path)) == 0
    doc = manifest_in(tmp_path)
    errs = doc["results"]["errors"]
    assert set(errs) == {"gsn_init", "gsn_trained", "random_trained"}
    assert all(np.isfinite(e["rel_l2"]) for e in errs.values())


def test_bench_unknown_example(tmp_path, capsys):
    code = run_cli("bench", "ex9", "--out", str(tmp_path))
    assert code == 2
    assert "usage" in capsys.readouterr().err


def test_bench_requires_example(tmp_path, capsys):
    assert run_cli("bench", "--out", str(tmp_path)) == 2


def test_config_file_validation(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_train": "many"}))
    code = run_cli("bench", "ex1", "--config", str(bad), "--out", str(tmp_path))
    assert code == 2
    assert "n_train" in capsys.readouterr().err


def test_prune_threshold_validation(tmp_path, capsys):
    out = tmp_path / "s"
    assert run_cli("sample", "ex1", "--seed", "0", "--out", str(out),
                   "--config", str(write_tiny_config(tmp_path))) == 0
    assert run_cli("dict", "--train", str(out / "train.csv"),
                   "--directions", str(out / "directions.csv"),
                   "--out", str(out / "dictionary.csv")) == 0
    code = run_cli("prune", "--train", str(out / "train.csv"),
                   "--dict", str(out / "dictionary.csv"),
                   "--field", str(out / "missing.csv"),
                   "--threshold", "1.0", "--out", str(out / "pruned.csv"))
    assert code == 2
    assert "threshold" in capsys.readouterr().err


def test_missing_input_exits_2(tmp_path, capsys):
    code = run_cli("dict", "--train", str(tmp_path / "nope.csv"),
                   "--directions", str(tmp_path / "alsono.csv"),
                   "--out", str(tmp_path / "d.csv"))
    assert code == 2


def test_numerical_failure_exits_3(tmp_path, capsys, monkeypatch):
    def boom(cfg):
        raise PipelineError("greedy", ValueError("synthetic failure"))

    monkeypatch.setattr(bench, "run_experiment", boom)
    code = run_cli(*bench_args(tmp_path))
    assert code == 3
    err = capsys.readouterr().err
    assert "greedy" in err


def test_ridgelet_stage_rows(tmp_path):
    out = tmp_path / "s"
    run_cli("sample", "ex1", "--seed", "0", "--out", str(out),
            "--config", str(write_tiny_config(tmp_path)))
    assert run_cli("ridgelet", "--train", str(out / "train.csv"),
                   "--directions", str(out / "directions.csv"),
                   "--threads", "1",
                   "--out", str(out / "field.csv")) == 0
    n_dirs = len((out / "directions.csv").read_text().strip().splitlines()) - 1
    n_rows = len((out / "field.csv").read_text().strip().splitlines()) - 1
    assert n_rows == n_dirs == 150


def test_stage_idempotence(tmp_path):
    out = tmp_path / "s"
    cfgp = write_tiny_config(tmp_path)
    run_cli("sample", "ex1", "--seed", "0", "--out", str(out), "--config", str(cfgp))
    first = (out / "train.csv").read_bytes()
    run_cli("sample", "ex1", "--seed", "0", "--out", str(out), "--config", str(cfgp))
    assert (out / "train.csv").read_bytes() == first


def test_stage_chain_matches_bench(tmp_path):
    """sample -> dict -> greedy -> fit reproduces the bench manifest numbers."""
    cfgp = write_tiny_config(tmp_path)
    bench_out = tmp_path / "bench"
    assert run_cli("bench", "ex1", "--seed", "3", "--out", str(bench_out),
                   "--no-prune", "--epochs", "0", "--restarts", "1",
                   "--threads", "1", "--config", str(cfgp)) == 0
    doc = manifest_in(bench_out)

    stage = tmp_path / "stage"
    assert run_cli("sample", "ex1", "--seed", "3", "--out", str(stage),
                   "--config", str(cfgp)) == 0
    assert run_cli("dict", "--train", str(stage / "train.csv"),
                   "--directions", str(stage / "directions.csv"),
                   "--out", str(stage / "dictionary.csv")) == 0
    assert run_cli("greedy", "--train", str(stage / "train.csv"),
                   "--val", str(stage / "val.csv"),
                   "--dict", str(stage / "dictionary.csv"),
                   "--max-iter", "6",
                   "--out", str(stage / "path.csv"),
                   "--nodes-out", str(stage / "nodes.json")) == 0
    assert run_cli("fit", "--train", str(stage / "train.csv"),
                   "--nodes", str(stage / "nodes.json"),
                   "--out", str(stage / "network.json")) == 0

    nodes_doc = json.loads((stage / "nodes.json").read_text())
    assert nodes_doc["selected_nodes"] == doc["results"]["selected_nodes"]
    net = load_network(stage / "network.json")
    test_set = load_dataset_csv(stage / "test.csv")
    err = bench.compute_errors(net, test_set)
    assert err.rel_l2 == doc["results"]["errors"]["gsn_init"]["rel_l2"]


def test_train_stage(tmp_path):
    cfgp = write_tiny_config(tmp_path)
    stage = tmp_path / "s"
    run_cli("sample", "ex1", "--seed", "0", "--out", str(stage), "--config", str(cfgp))
    run_cli("dict", "--train", str(stage / "train.csv"),
            "--directions", str(stage / "directions.csv"),
            "--out", str(stage / "dictionary.csv"))
    run_cli("greedy", "--train", str(stage / "train.csv"),
            "--val", str(stage / "val.csv"), "--dict", str(stage / "dictionary.csv"),
            "--max-iter", "4", "--out", str(stage / "path.csv"),
            "--nodes-out", str(stage / "nodes.json"))
    run_cli("fit", "--train", str(stage / "train.csv"),
            "--nodes", str(stage / "nodes.json"), "--out", str(stage / "net.json"))
    assert run_cli("train", "--network", str(stage / "net.json"),
                   "--train", str(stage / "train.csv"),
                   "--val", str(stage / "val.csv"),
                   "--epochs", "3", "--seed", "0",
                   "--out", str(stage / "trained.json"),
                   "--loss-out", str(stage / "loss.csv")) == 0
    assert (stage / "trained.json").exists()
    lines = (stage / "loss.csv").read_text().strip().splitlines()
    assert lines[0] == "epoch,train_loss" and len(lines) == 4


def test_report_command(tmp_path, capsys):
    run_cli(*bench_args(tmp_path))
    runs = [p for p in tmp_path.iterdir() if p.is_dir()]
    assert run_cli("report", str(runs[0])) == 0
    out = capsys.readouterr().out
    assert "gsn_init" in out and "rel_l2" in out


def test_bench_prune_flag_pairs_within_ten_percent(tmp_path):
    # desk-scale paired run: skipping the pruning stage must not move the
    # resulting error materially
    out_a, out_b = tmp_path / "pruned", tmp_path / "unpruned"
    args = ["bench", "ex1", "--seed", "0", "--epochs", "0", "--restarts", "1",
            "--threads", "2"]
    assert run_cli(*args, "--out", str(out_a)) == 0
    assert run_cli(*args, "--out", str(out_b), "--no-prune") == 0
    rel_a = manifest_in(out_a)["results"]["errors"]["gsn_init"]["rel_l2"]
    rel_b = manifest_in(out_b)["results"]["errors"]["gsn_init"]["rel_l2"]
    assert abs(rel_a - rel_b) <= 0.10 * rel_b


def test_gsn_threads_env(monkeypatch):
    monkeypatch.setenv("GSN_THREADS", "3")
    assert cli.default_threads() == 3
    monkeypatch.setenv("GSN_THREADS", "zero")
    with pytest.raises(cli.CliError):
        cli.default_threads()
