import csv
import json
import random

import pytest

import catfl_cli
from app.crypto import clpa
from app.crypto.group_core import SECP256K1
from app.sim.adversary import self_minted_credential
from app.sim.metrics import read_transcript_jsonl

SMALL_RUN = """\
pairs = 1
rounds = 2
participation = 2
"""


@pytest.fixture
def run_dir(tmp_path):
    config = tmp_path / "sim.conf"
    config.write_text(SMALL_RUN, encoding="utf-8")
    out = tmp_path / "out"
    assert catfl_cli.main(["run", "--config", str(config), "--out", str(out), "--seed", "3"]) == catfl_cli.EXIT_OK
    return out


def test_run_writes_outputs(run_dir):
    for name in ("metrics.csv", "transcript.jsonl", "summary.json", "tra_state.db"):
        assert (run_dir / name).is_file()
    with (run_dir / "metrics.csv").open(encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert [row["round"] for row in rows] == ["1", "2"]
    summary = json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))
    assert summary["rejected"] == 0
    assert summary["protocol_entities"] == 3
    assert summary["total_entities"] == 5


def test_run_with_missing_config_writes_nothing(tmp_path):
    out = tmp_path / "out"
    code = catfl_cli.main(["run", "--config", str(tmp_path / "absent.conf"), "--out", str(out)])
    assert code == catfl_cli.EXIT_USAGE
    assert not out.exists()


def test_run_with_invalid_config(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("pairs = 1\nrounds = -1\n", encoding="utf-8")
    assert catfl_cli.main(["run", "--config", str(config), "--out", str(tmp_path / "out")]) == catfl_cli.EXIT_USAGE


def test_trace_known_pseudonym(run_dir, capsys):
    events = read_transcript_jsonl(run_dir / "transcript.jsonl")
    aid = next(e.aid for e in events if e.kind == "pseudonym" and e.receiver == "user-02")
    capsys.readouterr()
    code = catfl_cli.main(["trace", "--transcript", str(run_dir / "transcript.jsonl"), "--aid", aid])
    assert code == catfl_cli.EXIT_OK
    assert capsys.readouterr().out.strip().splitlines()[-1] == "user-02"


def test_trace_unknown_pseudonym(run_dir, capsys):
    params, _, _ = clpa.setup(SECP256K1, random.Random(1))
    aid, _ = self_minted_credential(params, random.Random(2), 0)
    capsys.readouterr()
    code = catfl_cli.main(["trace", "--transcript", str(run_dir / "transcript.jsonl"), "--aid", aid.hex])
    assert code == catfl_cli.EXIT_FAILURE
    assert capsys.readouterr().out.strip().splitlines()[-1] == "not-found"


def test_trace_malformed_aid(run_dir):
    code = catfl_cli.main(["trace", "--transcript", str(run_dir / "transcript.jsonl"), "--aid", "xyz"])
    assert code == catfl_cli.EXIT_USAGE


def test_bench_requires_enough_iterations(tmp_path):
    assert catfl_cli.main(["bench", "--iters", "50", "--out", str(tmp_path)]) == catfl_cli.EXIT_USAGE
    assert not (tmp_path / "bench.csv").exists()


def test_cost_with_given_latencies(tmp_path):
    code = catfl_cli.main(
        ["cost", "--rounds", "10", "--messages", "5", "--t-sign", "2", "--t-veri", "3", "--out", str(tmp_path)]
    )
    assert code == catfl_cli.EXIT_OK
    with (tmp_path / "cost_report.csv").open(encoding="utf-8") as handle:
        rows = {row["scheme"]: row for row in csv.DictReader(handle)}
    assert float(rows["catfl"]["training_cost_us"]) == 50.0
    assert int(rows["catfl"]["bytes_per_message"]) < int(rows["pki-baseline"]["bytes_per_message"])


def test_cost_sweeps_pairs(tmp_path):
    code = catfl_cli.main(
        ["cost", "--t-sign", "2", "--t-veri", "3", "--pairs", "1,5,10", "--curve", "toy", "--out", str(tmp_path)]
    )
    assert code == catfl_cli.EXIT_OK
    with (tmp_path / "cost_report.csv").open(encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert [(row["scheme"], row["pairs"], row["entities"]) for row in rows if row["scheme"] == "catfl"] == [
        ("catfl", "1", "3"),
        ("catfl", "5", "11"),
        ("catfl", "10", "21"),
    ]


@pytest.mark.parametrize("pairs", ["0", "1,x", ","])
def test_cost_rejects_bad_pairs(tmp_path, pairs):
    assert catfl_cli.main(["cost", "--pairs", pairs, "--out", str(tmp_path)]) == catfl_cli.EXIT_USAGE


def test_bench_accepts_curve_file(tmp_path):
    curve_file = tmp_path / "toy17.curve"
    curve_file.write_text("17\n2\n2\n5\n1\n19\n", encoding="utf-8")
    code = catfl_cli.main(["bench", "--curve", str(curve_file), "--iters", "100", "--out", str(tmp_path)])
    assert code == catfl_cli.EXIT_OK
    with (tmp_path / "bench.csv").open(encoding="utf-8") as handle:
        assert len(list(csv.DictReader(handle))) == 4
    missing = str(tmp_path / "absent.curve")
    assert catfl_cli.main(["bench", "--curve", missing, "--out", str(tmp_path)]) == catfl_cli.EXIT_USAGE


def test_attack_sweep(tmp_path):
    code = catfl_cli.main(
        ["attack", "--scenario", "replay", "--seeds", "2", "--rounds", "2", "--out", str(tmp_path)]
    )
    assert code == catfl_cli.EXIT_OK
    with (tmp_path / "attack_report.csv").open(encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert [row["seed"] for row in rows] == ["1", "2"]
    assert all(float(row["detection_rate"]) == 1.0 and row["honest_rejected"] == "0" for row in rows)


def test_attack_sweep_uses_environment_defaults(tmp_path, monkeypatch):
    monkeypatch.setattr(catfl_cli.catfl_config, "seed", 5)
    code = catfl_cli.main(
        ["attack", "--scenario", "replay", "--seeds", "2", "--rounds", "2", "--curve", "toy", "--out", str(tmp_path)]
    )
    assert code == catfl_cli.EXIT_OK
    with (tmp_path / "attack_report.csv").open(encoding="utf-8") as handle:
        assert [row["seed"] for row in csv.DictReader(handle)] == ["5", "6"]


def test_usage_errors():
    assert catfl_cli.main([]) == catfl_cli.EXIT_USAGE
    assert catfl_cli.main(["teleport"]) == catfl_cli.EXIT_USAGE
