import csv
import json
import shutil

import pytest

from oracles import pearson_direct, spearman_direct
from reward_lab.cli import main
from reward_lab.config import ConfigError, ExperimentConfig, config_from_dict, dump_config, load_config, preset_config

# --- config ---------------------------------------------------------------------------


def test_defaults_round_trip_through_yaml(tmp_path):
    path = tmp_path / "c.yaml"
    cfg = preset_config("l1_default")
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_every_problem_reported():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"env": {"max_depth": "six", "bogus": 1}, "grpo": {"group_size": 1}, "colour": 3})
    text = "\n".join(exc.value.errors)
    assert "env.max_depth" in text and "bogus" in text and "colour" in text and "grpo" in text
    assert len(exc.value.errors) == 4


def test_reward_section_validation():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"reward": {"kind": "huber", "r_min": 2.0}})
    assert any("reward" in e for e in exc.value.errors)


def test_bad_cold_start():
    with pytest.raises(ConfigError):
        config_from_dict({"cold_start": "warm"})


def test_preset_overrides_merge():
    cfg = config_from_dict({"scenario": "l1_default", "grpo": {"seed": 3}})
    assert cfg.env.depth_cost == 0.08 and cfg.grpo.seed == 3


def test_config_hash_stability():
    a = config_from_dict({"reward": {"kind": "l1", "lambda": 1}, "env": {"depth_cost": 0.08}})
    b = config_from_dict({"env": {"depth_cost": 0.08}, "reward": {"lambda": 1.0}})
    assert a.config_hash() == b.config_hash()
    c = config_from_dict({"output_dir": "elsewhere", "reward": {"lambda": 1.0}, "env": {"depth_cost": 0.08}})
    assert c.config_hash() == a.config_hash()
    assert a.with_seed(1).config_hash() != a.config_hash()


def test_all_presets_build():
    for name in ("l1_default", "gaussian_length", "gaussian_saturated", "reward_hacking", "l1_depth_heavy"):
        cfg = preset_config(name)
        assert cfg.scenario == name
        cfg.initial_policy()


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset_config("nope")


# --- mos ---------------------------------------------------------------------------------


def test_cli_mos_golden_and_rerun(tmp_path, fixtures_dir, golden_dir, capsys):
    out = tmp_path / "o"
    assert main(["mos", str(fixtures_dir / "ratings_15.csv"), "--out", str(out)]) == 0
    assert "p15" in capsys.readouterr().out
    assert (out / "mos_table.csv").read_text() == (golden_dir / "mos_table_15.csv").read_text()
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(manifest["files"]) == ["manifest.json", "mos_table.csv", "mos_z.csv", "screening.json"]
    first = {p: (out / p).read_bytes() for p in ("mos_table.csv", "mos_z.csv", "screening.json")}
    assert main(["mos", str(fixtures_dir / "ratings_15.csv"), "--out", str(out)]) == 0
    assert first == {p: (out / p).read_bytes() for p in first}


def test_cli_mos_empty_input(tmp_path, capsys):
    src = tmp_path / "empty.csv"
    src.write_text("")
    out = tmp_path / "o"
    assert main(["mos", str(src), "--out", str(out)]) == 2
    assert not out.exists()


def test_cli_mos_reports_rows(tmp_path, capsys):
    src = tmp_path / "bad.csv"
    src.write_text("p1,s1,overall,7\np1,s1,overall,8\np2,s2,overall,99\n")
    assert main(["mos", str(src), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "row 2" in err and "row 3" in err


def test_cli_missing_file_is_runtime_error(tmp_path):
    assert main(["mos", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "o")]) == 3


# --- eval ---------------------------------------------------------------------------------


def _ids_scores(path):
    rows = list(csv.reader(path.open()))[1:]
    return {r[0]: float(r[1]) for r in rows}


def test_cli_eval_self(tmp_path, fixtures_dir):
    gt = str(fixtures_dir / "gt.csv")
    assert main(["eval", gt, gt, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text()) == {"plcc": 1.0, "srocc": 1.0, "main_score": 1.0}


def test_cli_eval_fixture(tmp_path, fixtures_dir, golden_dir):
    assert main(["eval", str(fixtures_dir / "pred.csv"), str(fixtures_dir / "gt.csv"), "--out", str(tmp_path)]) == 0
    got = json.loads((tmp_path / "report.json").read_text())
    assert got == json.loads((golden_dir / "eval_report.json").read_text())
    pred, gt = _ids_scores(fixtures_dir / "pred.csv"), _ids_scores(fixtures_dir / "gt.csv")
    ids = sorted(gt)
    p = pearson_direct([pred[i] for i in ids], [gt[i] for i in ids])
    s = spearman_direct([pred[i] for i in ids], [gt[i] for i in ids])
    assert got == {"plcc": round(p, 4), "srocc": round(s, 4), "main_score": round((p + s) / 2, 4)}


def test_cli_eval_missing_id(tmp_path, fixtures_dir, capsys):
    pred = tmp_path / "pred.csv"
    lines = (fixtures_dir / "pred.csv").read_text().splitlines()
    dropped = lines.pop(5).split(",")[0]
    pred.write_text("\n".join(lines) + "\n")
    assert main(["eval", str(pred), str(fixtures_dir / "gt.csv"), "--out", str(tmp_path / "o")]) == 2
    assert dropped in capsys.readouterr().err


# --- reward -------------------------------------------------------------------------------


def test_cli_reward(capsys):
    assert main(["reward", "<think>x</think><answer>3.75</answer>", "--gt", "3.75"]) == 0
    assert capsys.readouterr().out.strip() == "format_ok=true score=3.75 r_acc=1.000000 r_fmt=1 r_total=2.000000"
    assert main(["reward", "<think>x</think><answer>5</answer>", "--gt", "3", "--kind", "gaussian"]) == 0
    assert "r_acc=0.472871" in capsys.readouterr().out


def test_cli_reward_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["reward", "x", "--gt", "3", "--kind", "huber"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_cli_reward_validation(capsys):
    assert main(["reward", "x", "--gt", "9"]) == 2
    assert main(["reward", "x", "--gt", "3", "--r-min", "1.5"]) == 2


# --- train / oracle ----------------------------------------------------------------------


def test_cli_train_golden(tmp_path, golden_dir):
    out = tmp_path / "run"
    assert main(["train", "--scenario", "l1_default", "--seed", "7", "--out", str(out), "--checkpoint-every", "1000"]) == 0
    assert (out / "train_log.csv").read_bytes() == (golden_dir / "l1_default_seed7.csv").read_bytes()
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["files"]) == {p.name for p in out.iterdir()}
    assert "checkpoint_001000.json" in manifest["files"]
    assert manifest["seed"] == 7
    assert manifest["config_hash"] == preset_config("l1_default").with_seed(7).config_hash()
    assert load_config(out / "config.yaml") == preset_config("l1_default").with_seed(7)


def test_cli_train_config_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("env:\n  dataset_size: 160\ngrpo:\n  episodes: 1\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "train_log.csv").read_text().splitlines()) == 11


def test_cli_train_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("env:\n  dataset_size: -1\n  wat: 2\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "wat" in err and "env" in err


def test_cli_train_config_and_scenario(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("{}\n")
    assert main(["train", "--config", str(cfg), "--scenario", "l1_default"]) == 1


def test_cli_oracle(tmp_path):
    args = ["oracle", "--scenario", "l1_length", "--samples", "20000", "--out", str(tmp_path / "a")]
    assert main(args) == 0
    rows = list(csv.DictReader((tmp_path / "a" / "oracle.csv").open()))
    unformatted = [float(r["expected_reward"]) for r in rows if r["format"] == "0"]
    assert unformatted == pytest.approx([-0.02 * k for k in range(7)], abs=1e-12)
    args[-1] = str(tmp_path / "b")
    assert main(args) == 0
    assert (tmp_path / "a" / "oracle.csv").read_bytes() == (tmp_path / "b" / "oracle.csv").read_bytes()


def test_cli_oracle_monotone_without_cost(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("reward:\n  kind: l2\n")
    assert main(["oracle", "--config", str(cfg), "--samples", "50000", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "oracle.csv").open()))
    col = [float(r["expected_reward"]) for r in rows if r["format"] == "1"]
    assert all(b > a for a, b in zip(col, col[1:]))
