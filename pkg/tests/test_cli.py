import json
from pathlib import Path

import pytest

from ancillary_pricing.cli import cli
from ancillary_pricing.session_io import read_sessions, session_to_dict
from ancillary_pricing.simulator import default_market_spec, export_sessions

GRID_ARG = "30,35,40,45,50"
SIM_CFG = {
    "market": "default",
    "n_sessions": 500,
    "grid": [30, 35, 40, 45, 50],
    "price_noise": {"mean_discount": 10.0, "std_discount": 6.0},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "sim.json"
    cfg.write_text(json.dumps(SIM_CFG))
    log = root / "train.jsonl"
    assert cli(["simulate", "--config", str(cfg), "--out", str(log), "--seed", "3"]) == 0
    for model in ("gnb", "gnbc", "app-dnn", "dnn-cl"):
        code = cli(["train", "--model", model, "--data", str(log),
                    "--out", str(root / f"{model}.ckpt.json"), "--seed", "1",
                    "--grid", GRID_ARG, "--epochs", "2", "--k", "3"])
        assert code == 0
    return root


def test_no_arguments_is_usage_error(capsys):
    assert cli([]) == 1
    err = capsys.readouterr().err
    assert "usage" in err.lower()


def test_unknown_command_is_usage_error(capsys):
    assert cli(["frobnicate"]) == 1


def test_missing_required_flag_is_usage_error():
    assert cli(["simulate", "--out", "x.jsonl"]) == 1


def test_simulate_is_deterministic(workdir, tmp_path):
    cfg = workdir / "sim.json"
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert cli(["simulate", "--config", str(cfg), "--out", str(out1), "--seed", "9"]) == 0
    assert cli(["simulate", "--config", str(cfg), "--out", str(out2), "--seed", "9"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    sessions = read_sessions(out1)
    assert len(sessions) == 500
    assert all(s.purchased in (0, 1) for s in sessions)


def test_simulate_missing_config_is_data_error(tmp_path):
    assert cli(["simulate", "--config", str(tmp_path / "nope.json"),
                "--out", str(tmp_path / "x.jsonl"), "--seed", "0"]) == 2


def test_train_writes_checkpoints(workdir):
    for model in ("gnb", "gnbc", "app-dnn", "dnn-cl"):
        path = workdir / f"{model}.ckpt.json"
        assert path.exists()
        doc = json.loads(path.read_text())
        assert doc["format_version"] == 1
        assert "checksum" in doc


def test_train_on_malformed_log_is_data_error(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{broken\n")
    assert cli(["train", "--model", "gnb", "--data", str(bad),
                "--out", str(tmp_path / "m.json"), "--seed", "0"]) == 2


def test_evaluate_writes_report(workdir, tmp_path, capsys):
    report = tmp_path / "report.json"
    code = cli(["evaluate", "--ckpt", str(workdir / "gnbc.ckpt.json"),
                "--data", str(workdir / "train.jsonl"), "--report", str(report)])
    assert code == 0
    doc = json.loads(report.read_text())
    assert "APP-LM" in doc["model_rows"]
    row = doc["model_rows"]["APP-LM"]
    assert row["auc"] is None or 0.0 <= row["auc"] <= 1.0
    assert "APP-LM" in capsys.readouterr().out


def test_recommend_prints_quote(workdir, capsys):
    session = export_sessions(default_market_spec(), 1, seed=42)[0]
    doc = session_to_dict(session)
    del doc["purchased"]
    code = cli(["recommend", "--ckpt", str(workdir / "dnn-cl.ckpt.json"),
                "--session", json.dumps(doc)])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert 30.0 <= out["recommended_price"] <= 50.0
    assert out["policy"] == "DNN_CL"
    assert out["model_version"].startswith("dnn_cl:")


def test_recommend_matches_between_invocations(workdir, capsys):
    doc = session_to_dict(export_sessions(default_market_spec(), 1, seed=7)[0])
    args = ["recommend", "--ckpt", str(workdir / "gnb.ckpt.json"),
            "--session", json.dumps(doc)]
    assert cli(args) == 0
    first = capsys.readouterr().out
    assert cli(args) == 0
    assert capsys.readouterr().out == first


def test_recommend_malformed_session_is_data_error(workdir):
    assert cli(["recommend", "--ckpt", str(workdir / "gnb.ckpt.json"),
                "--session", "{not json"]) == 2


def test_recommend_incomplete_session_is_data_error(workdir):
    assert cli(["recommend", "--ckpt", str(workdir / "gnb.ckpt.json"),
                "--session", json.dumps({"session_id": "x"})]) == 2


def test_corrupted_checkpoint_is_data_error(workdir, tmp_path):
    doc = json.loads((workdir / "gnb.ckpt.json").read_text())
    doc["params"]["log_prior0"] = -0.123456
    bad = tmp_path / "bad.ckpt.json"
    bad.write_text(json.dumps(doc))
    assert cli(["recommend", "--ckpt", str(bad),
                "--session", json.dumps(session_to_dict(
                    export_sessions(default_market_spec(), 1, seed=1)[0]))]) == 2


def test_abtest_runs_and_is_deterministic(workdir, tmp_path):
    cfg = {
        "market": "default",
        "grid": SIM_CFG["grid"],
        "days": 3,
        "sessions_per_day": 400,
        "seed": 5,
        "arms": [
            {"name": "HUMAN", "policy": "human", "split": 0.4},
            {"name": "RANDOM", "policy": "random_discount", "split": 0.3,
             "mean_discount": 8.0, "std_discount": 4.0},
            {"name": "APP-LM", "policy": "app_lm", "split": 0.3,
             "checkpoint": "gnbc.ckpt.json"},
        ],
    }
    cfg_path = workdir / "ab.json"
    cfg_path.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "ab1.json", tmp_path / "ab2.json"
    assert cli(["abtest", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert cli(["abtest", "--config", str(cfg_path), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    doc = json.loads(out1.read_text())
    assert set(doc["report"]["arm_rows"]) == {"HUMAN", "RANDOM", "APP-LM"}
    assert len(doc["daily"]["HUMAN"]) == 3
    total = sum(r["offers"] for r in doc["report"]["arm_rows"].values())
    assert total == 1200


def test_abtest_seed_flag_overrides_config(workdir, tmp_path):
    out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
    cfg_path = workdir / "ab.json"
    assert cli(["abtest", "--config", str(cfg_path), "--out", str(out1),
                "--seed", "99"]) == 0
    assert cli(["abtest", "--config", str(cfg_path), "--out", str(out2)]) == 0
    assert out1.read_bytes() != out2.read_bytes()


def test_abtest_epsilon_greedy_arm(workdir, tmp_path):
    cfg = {
        "market": "default",
        "grid": SIM_CFG["grid"],
        "days": 2,
        "sessions_per_day": 200,
        "seed": 2,
        "arms": [
            {"name": "HUMAN", "policy": "human", "split": 0.5},
            {"name": "EPS", "policy": "epsilon_greedy", "split": 0.5,
             "epsilon": 0.3, "explore_checkpoint": "gnbc.ckpt.json",
             "exploit_checkpoint": "app-dnn.ckpt.json"},
        ],
    }
    cfg_path = workdir / "ab_eps.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "eps.json"
    assert cli(["abtest", "--config", str(cfg_path), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["arm_rows"]["EPS"]["offers"] > 0


def test_serve_bad_address_is_data_error(workdir):
    assert cli(["serve", "--ckpt", str(workdir / "gnb.ckpt.json"),
                "--addr", "nonsense"]) == 2


def test_serve_env_var_overrides_addr_flag(workdir, monkeypatch):
    # a broken env value must win over a valid flag, proving the override
    monkeypatch.setenv("ANCILLARY_PRICING_ADDR", "also-nonsense")
    assert cli(["serve", "--ckpt", str(workdir / "gnb.ckpt.json"),
                "--addr", "127.0.0.1:0"]) == 2


def test_log_level_flag_accepted(workdir, tmp_path):
    cfg = workdir / "sim.json"
    out = tmp_path / "log.jsonl"
    assert cli(["--log-level", "debug", "simulate", "--config", str(cfg),
                "--out", str(out), "--seed", "1"]) == 0


def test_abtest_bad_arm_config_is_data_error(workdir, tmp_path):
    cfg = {
        "market": "default",
        "grid": SIM_CFG["grid"],
        "days": 1,
        "sessions_per_day": 10,
        "arms": [
            {"name": "A", "policy": "human", "split": 0.5},
            {"name": "B", "policy": "dnn_cl", "split": 0.5,
             "checkpoint": str(workdir / "gnb.ckpt.json")},  # wrong model type
        ],
    }
    cfg_path = tmp_path / "bad_ab.json"
    cfg_path.write_text(json.dumps(cfg))
    assert cli(["abtest", "--config", str(cfg_path), "--out",
                str(tmp_path / "o.json")]) == 2
