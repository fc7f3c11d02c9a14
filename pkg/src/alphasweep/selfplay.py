"""Self-play training loop: episode generation, network training on a replay
window, and arena gating of the freshly trained model."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import games
from .games import GameSpec, Outcome, initial_state, encode, symmetries
from .mcts import SearchConfig, NetworkEvaluator, as_evaluator, run_search, select_action
from .net import (ArchConfig, LossBreakdown, LossTarget, NetworkWeights, TrainConfig, TrainingExample,
                  init_weights, load_checkpoint_file, train_epochs, write_checkpoint_file)
from .rating import TrainingEloTrack

logger = logging.getLogger(__name__)

MIN_BUFFER_SLOTS = 40


@dataclass(frozen=True)
class HyperParams:
    """Training hyper-parameters with the standard defaults."""

    I: int = 100
    E: int = 50
    T_prime: int = 15
    m: int = 100
    c: float = 1.0
    rs: int = 20
    ep: int = 10
    bs: int = 64
    lr: float = 0.005
    d: float = 0.3
    n: int = 40
    u: float = 0.6
    loss_target: str = "sum"
    lam: float = 0.5
    arena_enabled: bool = True
    augment_symmetries: bool = True
    elo_k: float = 32.0

    SWEEPABLE = ("I", "E", "T_prime", "m", "c", "rs", "ep", "bs", "lr", "d", "n", "u")

    def __post_init__(self):
        for name in ("I", "E", "m", "rs", "ep", "bs", "n"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.T_prime < 0:
            raise ValueError("T_prime must be >= 0")
        if not 0.0 <= self.u <= 1.0:
            raise ValueError("u must lie in [0, 1]")
        if self.c < 0 or self.lr < 0 or not 0.0 <= self.d < 1.0:
            raise ValueError("invalid c, lr or d")
        self.target  # validates loss_target / lam

    @property
    def target(self) -> LossTarget:
        return LossTarget.parse(self.loss_target, self.lam) if self.loss_target.startswith("weighted") \
            else LossTarget(self.loss_target, self.lam)

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(self.ep, self.bs, self.lr, self.d)

    @property
    def search_config(self) -> SearchConfig:
        return SearchConfig(self.m, self.c)

    @property
    def buffer_capacity(self) -> int:
        return max(self.rs, MIN_BUFFER_SLOTS)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "HyperParams":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise KeyError(f"unknown hyper-parameter(s): {', '.join(sorted(unknown))}")
        return cls(**d)


class ReplayBuffer:
    """Per-iteration example lists; training draws on the newest ``rs`` of them."""

    def __init__(self, capacity: int, rs: int):
        if capacity < rs:
            raise ValueError("buffer capacity must hold the retrain window")
        self.capacity = capacity
        self.rs = rs
        self.slots: deque[list[TrainingExample]] = deque(maxlen=capacity)

    def add_iteration(self, examples: list[TrainingExample]) -> None:
        self.slots.append(list(examples))

    def training_set(self) -> list[TrainingExample]:
        window = list(self.slots)[-self.rs:]
        return [e for slot in window for e in slot]

    def __len__(self):
        return sum(len(s) for s in self.slots)

    def save(self, path) -> None:
        arrays = {}
        for i, slot in enumerate(self.slots):
            arrays[f"s{i}_state"] = np.stack([e.state for e in slot]) if slot else np.zeros((0,))
            arrays[f"s{i}_pi"] = np.stack([e.pi for e in slot]) if slot else np.zeros((0,))
            arrays[f"s{i}_z"] = np.array([e.z for e in slot], dtype=np.float64)
            arrays[f"s{i}_iter"] = np.array([e.iteration for e in slot], dtype=np.int64)
        tmp = f"{path}.tmp.npz"
        np.savez(tmp, count=np.array(len(self.slots)), **arrays)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, capacity: int, rs: int) -> "ReplayBuffer":
        buf = cls(capacity, rs)
        with np.load(path) as data:
            for i in range(int(data["count"])):
                z = data[f"s{i}_z"]
                buf.add_iteration([TrainingExample(data[f"s{i}_state"][j], data[f"s{i}_pi"][j], float(z[j]),
                                                   int(data[f"s{i}_iter"][j])) for j in range(len(z))])
        return buf


# ---------------------------------------------------------------------------
# agents and single games


class MCTSAgent:
    """Greedy player: argmax of the search policy."""

    def __init__(self, model, config: SearchConfig, name: str = "mcts"):
        self.evaluator = as_evaluator(model)
        self.config = config
        self.name = name

    def act(self, state, rng=None) -> int:
        return int(np.argmax(run_search(state, self.evaluator, self.config).pi))


class RandomAgent:
    """Uniform over legal actions."""

    name = "random"

    def act(self, state, rng=None) -> int:
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        return int(rng.choice(np.flatnonzero(state.legal_mask)))


def play_game(first, second, spec: GameSpec, rng=None) -> tuple[Outcome, int]:
    """Play one game, ``first`` as P1. Returns the outcome and the ply count."""
    rng = np.random.default_rng(rng)
    state = initial_state(spec)
    plies = 0
    while not state.is_terminal:
        agent = first if state.to_move == games.P1 else second
        state = state.apply(agent.act(state, rng))
        plies += 1
    return state.outcome, plies


def first_player_score(result: Outcome) -> float:
    return {Outcome.P1_WINS: 1.0, Outcome.P2_WINS: 0.0, Outcome.DRAW: 0.5}[result]


def run_episode(model, spec: GameSpec, params: HyperParams, rng=None, iteration: int = 0) -> list[TrainingExample]:
    """One self-play game; every position becomes a (state, pi, z) example.

    ``z`` is the final result from the side to move at that position. With
    ``params.augment_symmetries`` each position is expanded to its symmetric
    copies.
    """
    rng = np.random.default_rng(rng)
    evaluator = as_evaluator(model)
    config = params.search_config
    state = initial_state(spec)
    history = []
    step = 0
    while not state.is_terminal:
        pi = run_search(state, evaluator, config).pi
        history.append((state, pi))
        action = select_action(pi, step, params.T_prime, rng)
        state = state.apply(action)
        step += 1
    result = state.outcome
    examples = []
    for s, pi in history:
        z = result.value_for(s.to_move)
        pairs = symmetries(s, pi) if params.augment_symmetries else [(s, pi)]
        for s2, pi2 in pairs:
            examples.append(TrainingExample(encode(s2), pi2.astype(np.float64), z, iteration))
    return examples


# ---------------------------------------------------------------------------
# arena


@dataclass
class ArenaResult:
    wins: int
    draws: int
    losses: int
    scores: list[float]

    @property
    def games(self) -> int:
        return self.wins + self.draws + self.losses


def accepts(wins: int, losses: int, u: float) -> bool:
    """Challenger replaces the incumbent iff wins/(wins+losses) > u; draws are ignored."""
    decided = wins + losses
    return decided > 0 and wins / decided > u


def arena(challenger, incumbent, spec: GameSpec, params: HyperParams, rng=None) -> ArenaResult:
    """``params.n`` greedy games; the challenger moves first in even-numbered games."""
    if params.n < 1:
        raise ValueError("arena needs at least one game")
    rng = np.random.default_rng(rng)
    config = params.search_config
    chal = MCTSAgent(challenger, config, "challenger")
    inc = MCTSAgent(incumbent, config, "incumbent")
    seeds = rng.integers(0, 2**31 - 1, size=params.n)
    scores = []
    for g in range(params.n):
        if g % 2 == 0:
            result, _ = play_game(chal, inc, spec, seeds[g])
            scores.append(first_player_score(result))
        else:
            result, _ = play_game(inc, chal, spec, seeds[g])
            scores.append(1.0 - first_player_score(result))
    wins = sum(s == 1.0 for s in scores)
    draws = sum(s == 0.5 for s in scores)
    return ArenaResult(wins, draws, len(scores) - wins - draws, scores)


def evaluate_vs_random(model, spec: GameSpec, games_count: int, config: SearchConfig, seed=0) -> ArenaResult:
    """Greedy MCTS player against the uniform-random player, colours alternating."""
    rng = np.random.default_rng(seed)
    agent = MCTSAgent(model, config)
    rand = RandomAgent()
    scores = []
    for g in range(games_count):
        game_seed = int(rng.integers(2**31 - 1))
        if g % 2 == 0:
            scores.append(first_player_score(play_game(agent, rand, spec, game_seed)[0]))
        else:
            scores.append(1.0 - first_player_score(play_game(rand, agent, spec, game_seed)[0]))
    wins = sum(s == 1.0 for s in scores)
    draws = sum(s == 0.5 for s in scores)
    return ArenaResult(wins, draws, len(scores) - wins - draws, scores)


# ---------------------------------------------------------------------------
# iterations


@dataclass
class StageTimes:
    selfplay: float = 0.0
    training: float = 0.0
    arena: float = 0.0
    total: float = 0.0


@dataclass
class IterationReport:
    iteration: int
    losses: list[LossBreakdown]
    examples_generated: int
    training_examples: int
    oldest_example_iteration: int
    arena: dict | None
    accepted: bool
    elo: dict
    timings: StageTimes = field(default_factory=StageTimes)

    def metrics_record(self) -> dict:
        """The deterministic part of the report (everything except wall-clock times)."""
        return {
            "iteration": self.iteration,
            "losses": [{"total": l.total, "policy": l.policy, "value": l.value} for l in self.losses],
            "examples_generated": self.examples_generated,
            "training_examples": self.training_examples,
            "oldest_example_iteration": self.oldest_example_iteration,
            "arena": self.arena,
            "accepted": self.accepted,
            "elo": self.elo,
        }

    @classmethod
    def from_records(cls, metrics: dict, timings: dict | None = None) -> "IterationReport":
        losses = [LossBreakdown(l["total"], l["policy"], l["value"]) for l in metrics["losses"]]
        t = StageTimes(**{k: timings[k] for k in ("selfplay", "training", "arena", "total")}) if timings else StageTimes()
        return cls(metrics["iteration"], losses, metrics["examples_generated"], metrics["training_examples"],
                   metrics["oldest_example_iteration"], metrics["arena"], metrics["accepted"], metrics["elo"], t)


def _rng(seed, *path) -> np.random.Generator:
    return np.random.default_rng([int(seed), *path])


def run_iteration(best: NetworkWeights, buffer: ReplayBuffer, params: HyperParams, spec: GameSpec,
                  seed: int = 0, iteration: int = 1, elo: TrainingEloTrack | None = None):
    """One pass of self-play, training and (optionally) arena gating.

    Returns ``(new best weights, IterationReport)``. ``best`` is never
    modified; a rejected challenger leaves it as the returned best.
    """
    elo = elo if elo is not None else TrainingEloTrack(params.elo_k)
    timings = StageTimes()
    t_iter = time.perf_counter()

    t0 = time.perf_counter()
    evaluator = NetworkEvaluator(best)
    new_examples: list[TrainingExample] = []
    for episode in range(params.E):
        new_examples.extend(run_episode(evaluator, spec, params, _rng(seed, iteration, 0, episode), iteration))
    buffer.add_iteration(new_examples)
    timings.selfplay = time.perf_counter() - t0

    t0 = time.perf_counter()
    train_set = buffer.training_set()
    candidate, losses = train_epochs(best, train_set, params.train_config, params.target,
                                     _rng(seed, iteration, 1))
    timings.training = time.perf_counter() - t0

    t0 = time.perf_counter()
    if params.arena_enabled:
        result = arena(candidate, best, spec, params, _rng(seed, iteration, 2))
        accepted = accepts(result.wins, result.losses, params.u)
        arena_info = {"wins": result.wins, "draws": result.draws, "losses": result.losses, "accepted": accepted}
        inc, chal = elo.update(result.scores, accepted)
    else:
        accepted = True
        arena_info = None
        inc, chal = elo.update([], True)
    timings.arena = time.perf_counter() - t0
    timings.total = time.perf_counter() - t_iter

    report = IterationReport(
        iteration=iteration,
        losses=losses,
        examples_generated=len(new_examples),
        training_examples=len(train_set),
        oldest_example_iteration=min(e.iteration for e in train_set),
        arena=arena_info,
        accepted=accepted,
        elo={"incumbent": inc, "challenger": chal},
        timings=timings,
    )
    logger.info("iteration %d: loss %.4f -> %.4f, accepted=%s", iteration, losses[0].total, losses[-1].total, accepted)
    return (candidate if accepted else best), report


# ---------------------------------------------------------------------------
# full runs


@dataclass
class TrainResult:
    weights: NetworkWeights
    reports: list[IterationReport]
    checkpoints: list[Path]


class ManifestMismatchError(ValueError):
    pass


def checkpoint_name(spec: GameSpec, iteration: int) -> str:
    return f"{spec.kind.value}_{spec.size}_iter{iteration}.ckpt"


def _dump(record) -> str:
    return json.dumps(record, sort_keys=True)


def train_full(spec: GameSpec, params: HyperParams, seed: int = 0, out_dir=None, arch: ArchConfig = ArchConfig(),
               stop_after: int | None = None) -> TrainResult:
    """Run ``params.I`` iterations from random weights.

    With ``out_dir`` the run writes ``metrics.jsonl`` (deterministic per-iteration
    records), ``timings.jsonl`` (wall-clock stage times), one checkpoint per
    accepted model, ``best.ckpt``, ``buffer.npz`` and a ``run.json`` manifest,
    and resumes from the last completed iteration if the manifest already
    exists. ``stop_after`` ends the run early after that iteration (the
    manifest then records it as incomplete).
    """
    best = init_weights(spec, arch, seed=[int(seed), 7])
    buffer = ReplayBuffer(params.buffer_capacity, params.rs)
    elo = TrainingEloTrack(params.elo_k)
    reports: list[IterationReport] = []
    checkpoints: list[Path] = []
    start = 1
    out = Path(out_dir) if out_dir is not None else None
    manifest = {"game": spec.kind.value, "size": spec.size, "seed": int(seed), "params": params.to_dict(),
                "arch": dataclasses.asdict(arch), "completed_iterations": 0, "complete": False, "checkpoints": []}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        mpath = out / "run.json"
        if mpath.exists():
            old = json.loads(mpath.read_text())
            for key in ("game", "size", "seed", "params", "arch"):
                if old.get(key) != manifest[key]:
                    raise ManifestMismatchError(f"existing run in {out} has a different {key}")
            manifest = old
            done = int(old["completed_iterations"])
            if done > 0:
                best, _ = load_checkpoint_file(out / "best.ckpt", spec)
                buffer = ReplayBuffer.load(out / "buffer.npz", params.buffer_capacity, params.rs)
                elo = TrainingEloTrack.from_state(old["elo"])
                reports = _read_reports(out, done)
                checkpoints = [out / c for c in old["checkpoints"]]
                start = done + 1
                logger.info("resuming %s at iteration %d", out, start)
        _rewrite_streams(out, reports)

    for it in range(start, params.I + 1):
        best, report = run_iteration(best, buffer, params, spec, seed, it, elo)
        reports.append(report)
        if out is not None:
            meta = {"game": spec.kind.value, "size": spec.size, "iteration": it, "params": params.to_dict(),
                    "loss_target": params.target.name, "seed": int(seed)}
            if report.accepted:
                path = out / checkpoint_name(spec, it)
                write_checkpoint_file(path, best, meta)
                checkpoints.append(path)
                manifest["checkpoints"].append(path.name)
            write_checkpoint_file(out / "best.ckpt", best, meta)
            buffer.save(out / "buffer.npz")
            with open(out / "metrics.jsonl", "a") as fh:
                fh.write(_dump(report.metrics_record()) + "\n")
            with open(out / "timings.jsonl", "a") as fh:
                fh.write(_dump({"iteration": it, **dataclasses.asdict(report.timings)}) + "\n")
            manifest["completed_iterations"] = it
            manifest["elo"] = elo.state()
            manifest["complete"] = it == params.I
            _write_json(out / "run.json", manifest)
        if stop_after is not None and it >= stop_after and it < params.I:
            break
    return TrainResult(best, reports, checkpoints)


def _write_json(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True))
    os.replace(tmp, path)


def _read_reports(out: Path, done: int) -> list[IterationReport]:
    # only the first ``done`` lines are trusted; anything after may be a torn write
    metrics = [json.loads(l) for l in _lines(out / "metrics.jsonl")[:done]]
    tpath = out / "timings.jsonl"
    timings = [json.loads(l) for l in _lines(tpath)[:done]] if tpath.exists() else []
    timings += [None] * (len(metrics) - len(timings))
    return [IterationReport.from_records(m, t) for m, t in zip(metrics, timings)]


def _lines(path: Path) -> list[str]:
    return [l for l in path.read_text().splitlines() if l.strip()]


def _rewrite_streams(out: Path, reports: Sequence[IterationReport]) -> None:
    """Drop any lines written after the last completed iteration."""
    with open(out / "metrics.jsonl", "w") as fh:
        for r in reports:
            fh.write(_dump(r.metrics_record()) + "\n")
    with open(out / "timings.jsonl", "w") as fh:
        for r in reports:
            fh.write(_dump({"iteration": r.iteration, **dataclasses.asdict(r.timings)}) + "\n")


def read_metrics(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
