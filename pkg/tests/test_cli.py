import io
import json

import pytest

from aloha_recurrence.cli import COMMANDS, run_command


def bern_config(tmp_path, lams, ps, name="c.json", **extra):
    users = [{"arrival": {"kind": "bernoulli", "p": lam}, "window": {"kind": "bernoulli", "p": p}}
             for lam, p in zip(lams, ps)]
    path = tmp_path / name
    path.write_text(json.dumps({"users": users, **extra}))
    return str(path)


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_command(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def test_classify(tmp_path):
    code, out, _ = run(["classify", "--config", bern_config(tmp_path, [0.1, 0.1], [0.5, 0.5])])
    rec = json.loads(out)
    assert code == 0
    assert rec["label"] == "Recurrent" and rec["load_sum"] == 0.8
    assert len(rec["config_digest"]) == 16 and rec["seed"] == 0


def test_witness_from_lambda():
    code, out, _ = run(["witness", "--lambda", "0.3,0.3"])
    rec = json.loads(out)
    assert code == 0
    assert rec["found"] is False
    assert rec["best_f"] == pytest.approx(2.4, abs=1e-6)


def test_bad_config_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"users": [{"arrival": {"kind": "finite_pmf", "pmf": [0.6, 0.5]},
                                           "window": {"kind": "bernoulli", "p": 0.5}}]}))
    code, out, err = run(["classify", "--config", str(path)])
    assert code == 2 and out == "" and "pmf" in err


def test_zero_prob_config_exit_2(tmp_path):
    path = tmp_path / "z.json"
    path.write_text(json.dumps({"users": [{"arrival": {"kind": "bernoulli", "p": 0.3},
                                           "window": {"kind": "finite_pmf",
                                                      "pmf": {"0": 0.5, "2": 0.5}}}]}))
    code, _, err = run(["classify", "--config", str(path)])
    assert code == 2 and "user 0" in err


@pytest.mark.parametrize("argv", [[], ["bogus"], ["classify"], ["witness", "--lambda", "x"],
                                  ["region-scan"]])
def test_usage_errors_exit_2(argv):
    assert run(argv)[0] == 2


def test_runtime_error_exit_1(tmp_path):
    cfg = bern_config(tmp_path, [0.1] * 3, [0.3] * 3)
    code, _, err = run(["oracle", "--config", cfg, "--truncation", "400"])
    assert code == 1 and "StateSpaceTooLarge" in err


def test_oracle_flags_truncation(tmp_path):
    cfg = bern_config(tmp_path, [0.6, 0.6], [0.5, 0.5])
    code, out, _ = run(["oracle", "--config", cfg, "--truncation", "10"])
    rec = json.loads(out)
    assert code == 0 and rec["status"] == "TruncationDominated"
    assert rec["expected_return_time"] is None


def test_oracle_triplets(tmp_path):
    cfg = bern_config(tmp_path, [0.3], [0.7])
    out_path = tmp_path / "p.txt"
    code, out, _ = run(["oracle", "--config", cfg, "--truncation", "100", "--out", str(out_path)])
    assert code == 0
    assert json.loads(out)["expected_return_time"] == pytest.approx(1.75, abs=1e-6)
    assert out_path.read_text().splitlines()[1] == "0 0 0.7"


def test_simulate_csv(tmp_path):
    cfg = bern_config(tmp_path, [0.2, 0.3], [0.5, 0.5])
    out_path = tmp_path / "t.csv"
    code, out, _ = run(["simulate", "--config", cfg, "--horizon", "50", "--seed", "4",
                        "--out", str(out_path)])
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == "slot,q_1,q_2,success_user,served" and len(lines) == 51
    assert json.loads(out)["seed"] == 4


def test_region_scan_csv(tmp_path):
    out_path = tmp_path / "scan.csv"
    code, out, _ = run(["region-scan", "--grid", "0.1,0.13", "--dim", "2", "--diagonal",
                        "--out", str(out_path)])
    rec = json.loads(out)
    assert code == 0 and rec["points"] == 2 and rec["witnesses"] == 1
    assert out_path.read_text().startswith("lambda_1,lambda_2,witness_found")


def test_region_scan_from_config(tmp_path):
    cfg = bern_config(tmp_path, [0.1], [0.5], sweep={"axes": [[0.5, 0.9]]})
    code, out, _ = run(["region-scan", "--config", cfg])
    assert code == 0 and json.loads(out)["witnesses"] == 2


def test_return_times_record(tmp_path):
    cfg = bern_config(tmp_path, [0.1, 0.1], [0.5, 0.5], seed=5, replications=300, horizon=1000)
    code, out, _ = run(["return-times", "--config", cfg, "--tail", "1,2,3"])
    rec = json.loads(out)
    assert code == 0
    for key in ("config_digest", "seed", "horizon", "replications", "mean",
                "mean_lower_bound", "n_censored", "tail"):
        assert key in rec
    assert rec["tail"][0] == [1, 1.0]


def test_lyapunov_and_escape(tmp_path):
    cfg = bern_config(tmp_path, [0.1, 0.1], [0.5, 0.5])
    code, out, _ = run(["lyapunov", "--config", cfg, "--replications", "100", "--n-max", "4"])
    assert code == 0 and len(json.loads(out)["y"]) == 4
    code, out, _ = run(["escape", "--config", cfg, "--replications", "50", "--horizon", "200"])
    assert code == 0 and json.loads(out)["init"] == [15, 15]
    code, _, _ = run(["escape", "--config", cfg, "--init", "0,0"])
    assert code == 2


ARGS = {
    "classify": [],
    "witness": ["--lambda", "0.1,0.2"],
    "simulate": ["--horizon", "300"],
    "return-times": ["--replications", "200", "--horizon", "500", "--tail", "2,4"],
    "lyapunov": ["--replications", "200", "--n-max", "6"],
    "escape": ["--replications", "50", "--horizon", "300"],
    "oracle": ["--truncation", "20"],
    "region-scan": ["--grid", "0.05,0.2", "--dim", "2", "--mc", "0", "--replications", "50"],
}


@pytest.mark.parametrize("command", COMMANDS)
def test_byte_identical_outputs(tmp_path, command):
    cfg = bern_config(tmp_path, [0.1, 0.12], [0.5, 0.4], seed=9)
    outputs = []
    for k in range(2):
        out_path = tmp_path / f"out{k}"
        code, out, _ = run([command, "--config", cfg, "--out", str(out_path)] + ARGS[command])
        assert code == 0
        outputs.append((out, out_path.read_bytes() if out_path.exists() else None))
    assert outputs[0] == outputs[1]
