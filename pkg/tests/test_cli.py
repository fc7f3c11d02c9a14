import csv
import json

import pytest

from alphasweep.cli import (ConfigError, RunConfig, load_run_config, main, parse_config_text, resolve_checkpoints)
from alphasweep.games import GameSpec
from alphasweep.net import ArchConfig, init_weights, write_checkpoint_file

SMALL = ArchConfig(channels=8, hidden=16, conv_layers=2)
TINY_SETS = ["--set", "I=2", "--set", "E=2", "--set", "m=4", "--set", "ep=1", "--set", "bs=16",
             "--set", "arena_enabled=false"]


@pytest.fixture(autouse=True)
def _out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("ALPHASWEEP_OUT", str(tmp_path / "default_out"))


def _ckpt(path, game="connect4", size=5, seed=0):
    spec = GameSpec(game, size)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_checkpoint_file(path, init_weights(spec, SMALL, seed=seed), {"iteration": 0})
    return str(path)


def _header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_config_text_round_trip():
    cfg = RunConfig.from_text("game=othello\nsize=6\nm=30  # fewer sims\n\nloss_target=weighted(0.3)\nc=2.5\n")
    assert cfg.spec == GameSpec("othello", 6)
    assert cfg.params.m == 30 and cfg.params.c == 2.5
    assert cfg.params.loss_target == "weighted" and cfg.params.lam == 0.3
    again = RunConfig.from_text(cfg.to_text())
    assert again == cfg
    assert again.to_text() == cfg.to_text()


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown config key 'mm'"):
        RunConfig.from_pairs([("mm", "3")])
    with pytest.raises(ConfigError):
        RunConfig.from_pairs([("m", "many")])
    with pytest.raises(ConfigError):
        RunConfig.from_pairs([("game", "chess")])
    with pytest.raises(ConfigError, match="cfg:2"):
        parse_config_text("m=3\nnonsense\n", "cfg")


def test_overrides_apply_after_file(tmp_path):
    (tmp_path / "c.txt").write_text("m=30\nI=7\n")
    cfg = load_run_config(tmp_path / "c.txt", ["m=11"])
    assert (cfg.params.m, cfg.params.I) == (11, 7)


def test_unknown_key_exits_2(tmp_path, capsys):
    assert main(["train", "--set", "bogus=1", "--out", str(tmp_path / "r")]) == 2
    assert "bogus" in capsys.readouterr().err


def test_train_writes_config_and_records(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", *TINY_SETS, "--seed", "4", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["iterations"] == 2
    lines = (out / "metrics.jsonl").read_text().splitlines()
    assert [json.loads(l)["iteration"] for l in lines] == [1, 2]
    cfg = RunConfig.from_text((out / "config.txt").read_text())
    assert cfg.seed == 4 and cfg.params.I == 2 and not cfg.params.arena_enabled
    # rerunning a finished run is a no-op that leaves the records intact
    assert main(["train", *TINY_SETS, "--seed", "4", "--out", str(out)]) == 0
    assert (out / "metrics.jsonl").read_text().splitlines() == lines
    # a different configuration in the same directory is refused
    assert main(["train", *TINY_SETS, "--set", "m=5", "--seed", "4", "--out", str(out)]) == 2


def test_train_default_output_root(tmp_path):
    assert main(["train", *TINY_SETS, "--set", "I=1"]) == 0
    assert (tmp_path / "default_out" / "train" / "connect4_5_seed0" / "best.ckpt").exists()


@pytest.mark.parametrize("argv,expected", [(["table1"], "25 settings, 25 runs scheduled"),
                                           (["table1", "--desk-scale", "--repetitions", "3"],
                                            "25 settings, 75 runs scheduled"),
                                           (["correlation"], "81 settings, 81 runs scheduled")])
def test_sweep_dry_run_counts(argv, expected, capsys):
    assert main(["sweep", *argv, "--dry-run"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == expected
    assert len(out) == 1 + int(expected.split(", ")[1].split()[0])


def test_sweep_json_plan_and_bad_values(tmp_path, capsys):
    plan = {"base": {"I": 1, "E": 1, "m": 2, "ep": 1, "arena_enabled": False}, "axes": [["m", [2, 3]]]}
    (tmp_path / "p.json").write_text(json.dumps(plan))
    assert main(["sweep", str(tmp_path / "p.json"), "--out", str(tmp_path / "sw")]) == 0
    assert _header(tmp_path / "sw" / "results.csv")[:3] == ["run_id", "setting", "seed"]
    assert main(["sweep", "table1", "--repetitions", "0", "--dry-run"]) == 2
    assert main(["sweep", str(tmp_path / "missing.json"), "--dry-run"]) == 2


def test_resolve_checkpoints_prefers_best(tmp_path):
    _ckpt(tmp_path / "a" / "connect4_5_iter0001.ckpt")
    best = _ckpt(tmp_path / "a" / "best.ckpt")
    other = _ckpt(tmp_path / "b" / "x.ckpt")
    assert resolve_checkpoints([str(tmp_path / "a")]) == [best]
    assert resolve_checkpoints([str(tmp_path / "b"), other]) == [other]


def test_tournament_needs_two_players(tmp_path, capsys):
    one = _ckpt(tmp_path / "one.ckpt")
    assert main(["tournament", one, "--dry-run"]) == 2
    assert main(["tournament", one, "--include-random", "--dry-run"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "2 players, 1 pairs, 10 games"


def test_tournament_rejects_mixed_games(tmp_path, capsys):
    a = _ckpt(tmp_path / "a.ckpt")
    b = _ckpt(tmp_path / "b.ckpt", seed=1)
    c = _ckpt(tmp_path / "c.ckpt", game="gobang")
    assert main(["tournament", a, b, c, "--dry-run"]) == 2
    err = capsys.readouterr().err
    assert "c.ckpt (gobang_5)" in err and "a.ckpt" not in err


def test_tournament_outputs(tmp_path):
    a = _ckpt(tmp_path / "a.ckpt")
    b = _ckpt(tmp_path / "b.ckpt", seed=1)
    out = tmp_path / "t"
    assert main(["tournament", a, b, "--include-random", "--games-per-pair", "2", "--m", "2",
                 "--out", str(out)]) == 0
    assert _header(out / "matches.csv") == ["pair_index", "round", "game", "player_a", "player_b", "score_a", "seed"]
    assert _header(out / "ratings.csv") == ["player", "games", "wins", "draws", "losses", "elo"]
    with open(out / "ratings.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 and all(int(r["games"]) == 4 for r in rows)
    assert abs(sum(float(r["elo"]) for r in rows) / 3 - 1000) < 0.1


def test_arena_command(tmp_path, capsys):
    assert main(["arena", "uniform", "random", "--game", "connect4", "--games", "4", "--m", "5"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["wins"] + res["draws"] + res["losses"] == 4
    assert main(["arena", "uniform", "random", "--games", "2"]) == 2
    gobang = _ckpt(tmp_path / "g.ckpt", game="gobang")
    assert main(["arena", gobang, "random", "--game", "connect4", "--games", "2"]) == 2


def test_report_golden_headers(tmp_path, capsys):
    run = tmp_path / "runs" / "r0"
    assert main(["train", *TINY_SETS, "--out", str(run)]) == 0
    capsys.readouterr()
    out = tmp_path / "rep"
    assert main(["report", str(tmp_path / "runs"), "--out", str(out)]) == 0
    assert _header(out / "loss_vs_iteration.csv") == ["run", "setting", "seed", "iteration", "epoch", "total",
                                                      "policy", "value"]
    assert _header(out / "training_elo.csv") == ["setting", "iteration", "runs", "elo_mean", "elo_std",
                                                 "loss_mean", "loss_std"]
    assert _header(out / "elo_vs_time.csv") == ["run_id", "setting", "seed", "total_s", "elo", "pareto"]
    assert _header(out / "time_table.csv") == ["parameter", "value_min", "value_default", "value_max",
                                               "time_min_s", "time_default_s", "time_max_s", "ratio",
                                               "classification"]
    with open(out / "loss_vs_iteration.csv", newline="") as fh:
        assert len(list(csv.DictReader(fh))) == 2  # two iterations of one epoch


def test_report_joins_ratings_by_checkpoint(tmp_path, capsys):
    plan = {"base": {"I": 1, "E": 1, "m": 2, "ep": 1, "arena_enabled": False}, "axes": [["m", [2, 3]]]}
    (tmp_path / "p.json").write_text(json.dumps(plan))
    sw = tmp_path / "sw"
    assert main(["sweep", str(tmp_path / "p.json"), "--out", str(sw)]) == 0
    assert main(["tournament", str(sw), "--include-random", "--games-per-pair", "2", "--m", "2",
                 "--out", str(tmp_path / "t")]) == 0
    assert main(["report", str(sw / "results.csv"), "--ratings", str(tmp_path / "t" / "ratings.csv"),
                 "--out", str(tmp_path / "rep")]) == 0
    with open(tmp_path / "rep" / "elo_vs_time.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and all(r["elo"] for r in rows)
    assert any(r["pareto"] == "1" for r in rows)
    with open(tmp_path / "rep" / "time_table.csv", newline="") as fh:
        (row,) = list(csv.DictReader(fh))
    assert row["parameter"] == "m" and row["classification"] in ("time-sensitive", "time-friendly")


def test_report_errors(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["report", str(tmp_path / "empty")]) == 2
    bad = tmp_path / "bad" / "metrics.jsonl"
    bad.parent.mkdir()
    bad.write_text('{"iteration": 1, "losses": [], "elo": {}}\n{"iteration": 2,\n')
    capsys.readouterr()
    assert main(["report", str(bad.parent)]) == 2
    assert f"{bad}:2:" in capsys.readouterr().err


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "alphasweep", "sweep", "correlation", "--dry-run"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("81 settings")
