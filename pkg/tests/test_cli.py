import json

import pytest

from advcal.cli import main
from advcal.finite_instance import random_instance
from advcal.scenarios import three_point
import numpy as np


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def tp_file(tmp_path):
    p = tmp_path / "tp.json"
    p.write_text(three_point().to_json())
    return p


def test_audit_loss_hinge(capsys):
    code, out, _ = run_cli(capsys, "audit-loss", "--loss", "hinge")
    assert code == 0
    assert json.loads(out)["adversarially_calibrated"] is False


def test_audit_loss_shifted_params(capsys):
    code, out, _ = run_cli(capsys, "audit-loss", "--loss", "shifted_ramp", "--tau", "0.5", "--lambda", "0.5")
    assert json.loads(out)["adversarially_calibrated"] is True


def test_list_losses(capsys):
    code, out, _ = run_cli(capsys, "list-losses")
    rows = json.loads(out)
    assert code == 0 and len(rows) == 8
    code, out, _ = run_cli(capsys, "--pretty", "list-losses")
    assert "shifted_ramp" in out and not out.lstrip().startswith("[")


def test_bayes_risk(capsys, tp_file):
    code, out, _ = run_cli(capsys, "bayes-risk", "--instance", str(tp_file))
    assert code == 0 and json.loads(out)["value"] == 0.5


def test_attack_writes_json_and_csv(capsys, tp_file, tmp_path):
    dest = tmp_path / "out" / "attack.json"
    code, _, _ = run_cli(capsys, "attack", "--instance", str(tp_file), "--out", str(dest))
    assert code == 0
    doc = json.loads(dest.read_text())
    assert doc["dual_value"] == 0.5
    assert dest.with_suffix(".csv").read_text().startswith("source_index,")


def test_attack_is_byte_identical(capsys, tp_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli(capsys, "attack", "--instance", str(tp_file), "--out", str(a))
    run_cli(capsys, "attack", "--instance", str(tp_file), "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_duality_random(capsys, tmp_path):
    p = tmp_path / "random_seed42.json"
    p.write_text(random_instance(np.random.default_rng(42)).to_json())
    code, out, _ = run_cli(capsys, "duality", "--instance", str(p))
    d = json.loads(out)
    assert code == 0 and d["holds"]
    assert d["mincut"] == pytest.approx(d["brute_force"]) == pytest.approx(d["dual_attack"])


def test_train(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"loss": "logistic", "scenario": "realizable_pair", "iterations": 500, "step": 1.0}))
    code, out, _ = run_cli(capsys, "train", "--config", str(cfg), "--out-dir", str(tmp_path / "run"))
    assert code == 0
    assert json.loads(out)["adv01_risk"] == 0.0
    assert (tmp_path / "run" / "trajectory.csv").read_text().startswith("iteration,surrogate_risk")
    assert json.loads((tmp_path / "run" / "classifier.json").read_text())["layout"] == "faces"


def test_train_inline_instance_and_loss_object(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "loss": {"kind": "shifted_sigmoid", "tau": 1.0},
        "instance": json.loads(three_point().to_json()),
        "iterations": 50,
        "init": "random",
    }))
    code, _, _ = run_cli(capsys, "train", "--config", str(cfg), "--out-dir", str(tmp_path / "r"), "--seed", "3")
    assert code == 0


def test_scenario_exit_codes(capsys):
    code, out, _ = run_cli(capsys, "scenario", "--name", "coincident_pair")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run_cli(capsys, "scenario", "--name", "three_point", "--no-train")
    assert code == 0 and json.loads(out)["checks"][1]["got"] == 0.5


def test_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["audit-loss", "--loss", "hinge", "--nope"])
    assert exc.value.code == 2


def test_parse_error_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"metric": "l2",\n "atoms": [ }')
    code, _, err = run_cli(capsys, "bayes-risk", "--instance", str(bad))
    assert code == 2 and "line 2" in err
    bad.write_text(json.dumps({"metric": "l2", "epsilon": 1, "atoms": [{"x": 0, "y": 3, "mass": 1}]}))
    code, _, err = run_cli(capsys, "bayes-risk", "--instance", str(bad))
    assert code == 2 and "atoms[0].y" in err


def test_bad_scenario_params_exit_2(capsys):
    code, _, err = run_cli(capsys, "scenario", "--name", "three_point", "--params", "a=5")
    assert code == 2


def test_invariant_violation_exit_3(capsys, monkeypatch, tp_file):
    from advcal import cli
    from advcal.errors import InvariantViolation

    def boom(inst):
        raise InvariantViolation("forced", {"x": 1.0})

    monkeypatch.setattr(cli, "adversarial_bayes_risk", boom)
    code, _, err = run_cli(capsys, "bayes-risk", "--instance", str(tp_file))
    assert code == 3 and "forced" in err
