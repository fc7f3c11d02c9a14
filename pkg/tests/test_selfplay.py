import json

import numpy as np
import pytest

from alphasweep.games import GameSpec, initial_state
from alphasweep.mcts import SearchConfig
from alphasweep.net import TrainingExample, init_weights, load_checkpoint_file
from alphasweep.rating import TrainingEloTrack
from alphasweep.selfplay import (HyperParams, ManifestMismatchError, RandomAgent, ReplayBuffer, accepts, arena,
                                 evaluate_vs_random, read_metrics, run_episode, run_iteration, train_full)

import oracles

C4 = GameSpec("connect4", 5)
TINY = HyperParams(I=2, E=2, m=4, ep=1, bs=32, n=2)


def test_table1_defaults():
    p = HyperParams()
    assert (p.I, p.E, p.T_prime, p.m, p.c, p.rs, p.ep, p.bs, p.lr, p.d, p.n, p.u) == \
        (100, 50, 15, 100, 1.0, 20, 10, 64, 0.005, 0.3, 40, 0.6)
    assert p.arena_enabled and p.loss_target == "sum"


@pytest.mark.parametrize("bad", [{"E": 0}, {"T_prime": -1}, {"u": 1.5}, {"d": 1.0}, {"loss_target": "l1"}])
def test_param_validation(bad):
    with pytest.raises(ValueError):
        HyperParams(**bad)


def test_from_dict_rejects_unknown():
    with pytest.raises(KeyError):
        HyperParams.from_dict({"foo": 1})
    assert HyperParams.from_dict(TINY.to_dict()) == TINY


def test_weighted_target_parsing():
    assert HyperParams(loss_target="weighted(0.2)").target.lam == 0.2
    assert HyperParams(loss_target="weighted", lam=0.7).target.lam == 0.7


def _examples(iteration, count=3):
    return [TrainingExample(np.zeros((3, 5, 5), np.float32), np.full(5, 0.2), 0.0, iteration) for _ in range(count)]


def test_buffer_window_and_capacity():
    p = HyperParams(rs=2)
    assert p.buffer_capacity == 40
    assert HyperParams(rs=45).buffer_capacity == 45
    buf = ReplayBuffer(3, 2)
    for it in range(1, 6):
        buf.add_iteration(_examples(it))
    assert len(buf.slots) == 3
    assert sorted({e.iteration for e in buf.training_set()}) == [4, 5]
    with pytest.raises(ValueError):
        ReplayBuffer(1, 2)


def test_buffer_save_load(tmp_path):
    buf = ReplayBuffer(40, 20)
    buf.add_iteration(_examples(1))
    buf.add_iteration(_examples(2, 1))
    buf.save(tmp_path / "b.npz")
    back = ReplayBuffer.load(tmp_path / "b.npz", 40, 20)
    assert [len(s) for s in back.slots] == [3, 1]
    assert [e.iteration for e in back.training_set()] == [1, 1, 1, 2]


def test_episode_augmentation_count():
    on = run_episode(None, C4, HyperParams(m=3), rng=4)
    off = run_episode(None, C4, HyperParams(m=3, augment_symmetries=False), rng=4)
    assert len(on) == 2 * len(off)
    for e in on:
        assert abs(e.pi.sum() - 1) < 1e-12


def _side(e):
    return 1 if e.state[2, 0, 0] == 1.0 else -1


def test_outcome_perspective():
    spec = GameSpec("othello", 6)
    seen = set()
    for seed in range(120):
        ex = run_episode(None, spec, HyperParams(m=4, T_prime=100, augment_symmetries=False), rng=seed)
        p1_view = {e.z * _side(e) for e in ex}
        assert len(p1_view) == 1  # one result, seen from each mover's side
        seen.add(p1_view.pop())
        if seen == {-1.0, 0.0, 1.0}:
            break
    assert 0.0 in seen and len(seen) == 3


def test_gobang_perspective_signs():
    ex = run_episode(None, GameSpec("gobang", 5), HyperParams(m=2, augment_symmetries=False), rng=0)
    zs = [e.z for e in ex]
    if zs[0] != 0:
        assert all(a == -b for a, b in zip(zs, zs[1:]))
        assert all(e.z == (1.0 if _side(e) == 1 else -1.0) * zs[0] for e in ex)


@pytest.mark.parametrize("wins,losses,u,expected", [(11, 9, 0.5, True), (14, 6, 0.7, False), (15, 5, 0.7, True),
                                                    (0, 0, 0.0, False), (2, 0, 0.99, True)])
def test_acceptance_rule(wins, losses, u, expected):
    assert accepts(wins, losses, u) is expected


def test_arena_first_game_challenger_moves_first():
    seen = []

    def logging_eval(state):
        seen.append(state.cells)
        return state.legal_mask / state.legal_mask.sum(), 0.0

    res = arena(logging_eval, None, C4, TINY.replace(n=1), rng=0)
    assert res.games == 1
    assert seen[0] == initial_state(C4).cells


def test_arena_mirror_match():
    w = init_weights(C4, seed=1)
    res = arena(w, w, C4, TINY.replace(n=6, m=8), rng=0)
    assert res.games == 6
    assert res.wins == res.losses


def test_perfect_player_never_loses():
    solver = oracles.ConnectFourSolver()
    res = arena(solver.evaluator, init_weights(C4, seed=5), C4, HyperParams(n=20, m=25), rng=0)
    assert res.losses == 0 and res.games == 20


def test_random_agent_plays_legal():
    spec = GameSpec("othello", 5)
    s = initial_state(spec)
    rng = np.random.default_rng(0)
    agent = RandomAgent()
    while not s.is_terminal:
        s = s.apply(agent.act(s, rng))
    assert s.is_terminal


def test_iteration_without_arena_auto_accepts():
    params = TINY.replace(arena_enabled=False)
    best = init_weights(C4)
    buf = ReplayBuffer(params.buffer_capacity, params.rs)
    new, rep = run_iteration(best, buf, params, C4, seed=0, iteration=1, elo=TrainingEloTrack())
    assert rep.accepted and rep.arena is None
    assert rep.elo == {"incumbent": 1000.0, "challenger": 1000.0}
    assert new is not best
    t = rep.timings
    assert min(t.selfplay, t.training, t.arena) >= 0
    assert abs(t.total - (t.selfplay + t.training + t.arena)) <= 0.01 * t.total + 1e-3


def test_iteration_with_arena_tallies_n():
    params = TINY.replace(n=3)
    best = init_weights(C4)
    new, rep = run_iteration(best, ReplayBuffer(40, 20), params, C4, seed=0, iteration=1)
    a = rep.arena
    assert a["wins"] + a["draws"] + a["losses"] == 3
    assert rep.accepted == accepts(a["wins"], a["losses"], params.u)
    assert (new is best) != rep.accepted


def test_value_only_reports_both_losses():
    params = TINY.replace(loss_target="value_only", arena_enabled=False)
    _, rep = run_iteration(init_weights(C4), ReplayBuffer(40, 20), params, C4, seed=0, iteration=1)
    assert rep.losses[0].policy > 0 and rep.losses[0].total == rep.losses[0].value


def test_window_never_older_than_rs():
    params = HyperParams(I=4, E=1, m=2, ep=1, bs=64, rs=1, arena_enabled=False)
    res = train_full(C4, params, seed=0)
    for r in res.reports:
        assert r.oldest_example_iteration == r.iteration
        assert r.training_examples == r.examples_generated


def test_train_full_outputs_and_determinism(tmp_path):
    a = train_full(C4, TINY, seed=3, out_dir=tmp_path / "a")
    train_full(C4, TINY, seed=3, out_dir=tmp_path / "b")
    assert (tmp_path / "a" / "metrics.jsonl").read_bytes() == (tmp_path / "b" / "metrics.jsonl").read_bytes()
    assert len(read_metrics(tmp_path / "a" / "metrics.jsonl")) == 2
    manifest = json.loads((tmp_path / "a" / "run.json").read_text())
    assert manifest["complete"] and manifest["completed_iterations"] == 2
    assert (tmp_path / "a" / "best.ckpt").exists()
    for p in a.checkpoints:
        assert p.name.startswith("connect4_5_iter")
        _, meta = load_checkpoint_file(p, C4)
        assert meta["loss_target"] == "sum" and meta["params"]["m"] == 4


def test_resume_matches_uninterrupted(tmp_path):
    params = TINY.replace(I=3, arena_enabled=False)
    full = train_full(C4, params, seed=1, out_dir=tmp_path / "full")
    part = train_full(C4, params, seed=1, out_dir=tmp_path / "part", stop_after=1)
    assert len(part.reports) == 1
    assert not json.loads((tmp_path / "part" / "run.json").read_text())["complete"]
    # a stray partial line from an interrupted write is dropped on resume
    with open(tmp_path / "part" / "metrics.jsonl", "a") as fh:
        fh.write('{"iteration": 2, "partial"')
    resumed = train_full(C4, params, seed=1, out_dir=tmp_path / "part")
    assert [r.iteration for r in resumed.reports] == [1, 2, 3]
    assert (tmp_path / "full" / "metrics.jsonl").read_bytes() == (tmp_path / "part" / "metrics.jsonl").read_bytes()
    for k in full.weights.arrays:
        assert np.array_equal(full.weights[k], resumed.weights[k])


def test_manifest_mismatch(tmp_path):
    train_full(C4, TINY.replace(I=1), seed=0, out_dir=tmp_path)
    with pytest.raises(ManifestMismatchError):
        train_full(C4, TINY.replace(I=1, m=5), seed=0, out_dir=tmp_path)


def test_evaluate_vs_random_tally():
    res = evaluate_vs_random(None, C4, 6, SearchConfig(10), seed=0)
    assert res.games == 6
    assert res.wins >= 3
