"""Elo ratings: incremental updates during training and maximum-likelihood
fits over tournament results."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ANCHOR = 1000.0
DEFAULT_K = 32.0


@dataclass(frozen=True)
class MatchRecord:
    player_a: str
    player_b: str
    score_a: float
    game: str = ""
    seed: int = 0
    moves: int = 0
    pair_index: int = 0
    round: int = 0
    game_index: int = 0

    def __post_init__(self):
        if self.score_a not in (0.0, 0.5, 1.0):
            raise ValueError(f"score_a must be 0, 0.5 or 1, got {self.score_a}")
        if self.player_a == self.player_b:
            raise ValueError(f"a player cannot play itself ({self.player_a})")


class DisconnectedGraphError(ValueError):
    def __init__(self, components):
        self.components = components
        names = "; ".join("{" + ", ".join(sorted(c)) + "}" for c in components)
        super().__init__(f"game graph is not connected; components: {names}")


def expected_score(r_a: float, r_b: float) -> float:
    """Probability that A beats B under the logistic Elo model."""
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


def incremental_update(r_a: float, e_a: float, s_a: float, k: float = DEFAULT_K) -> float:
    if k <= 0:
        raise ValueError("K-factor must be positive")
    return r_a + k * (s_a - e_a)


@dataclass
class EloTable:
    ratings: dict[str, float]
    anchor: float = ANCHOR

    def __getitem__(self, player: str) -> float:
        return self.ratings[player]

    def gap(self, a: str, b: str) -> float:
        return self.ratings[a] - self.ratings[b]

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(self.ratings.items(), key=lambda kv: (-kv[1], kv[0]))


def _components(players, edges) -> list[set]:
    parent = {p: p for p in players}

    def find(p):
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    for a, b in edges:
        parent[find(a)] = find(b)
    groups: dict = {}
    for p in players:
        groups.setdefault(find(p), set()).add(p)
    return list(groups.values())


def fit_mle_elo(records: Sequence[MatchRecord], players: Sequence[str] | None = None, prior: bool = True,
                tol: float = 1e-6, max_iter: int = 1_000_000) -> EloTable:
    """Maximum-likelihood Elo ratings by minorization-maximization.

    Draws count as half a win and half a loss. With ``prior`` one virtual draw
    is added for every pair that met at least once, which keeps ratings
    finite under perfect scores. Iterates until no rating moves by more than
    ``tol`` Elo points; the mean rating is anchored at 1000.
    """
    names = list(dict.fromkeys(players or []))
    for r in records:
        for p in (r.player_a, r.player_b):
            if p not in names:
                names.append(p)
    if not names:
        return EloTable({})
    index = {p: i for i, p in enumerate(names)}
    k = len(names)
    games = np.zeros((k, k))
    wins = np.zeros((k, k))  # wins[i, j]: points i scored against j
    for r in records:
        a, b = index[r.player_a], index[r.player_b]
        games[a, b] += 1
        games[b, a] += 1
        wins[a, b] += r.score_a
        wins[b, a] += 1.0 - r.score_a
    met = games > 0
    if prior:
        games = games + met
        wins = wins + 0.5 * met
    comps = _components(names, [(names[i], names[j]) for i, j in zip(*np.nonzero(np.triu(met)))])
    if len(comps) > 1:
        raise DisconnectedGraphError(comps)
    if not prior:
        # without smoothing the MLE exists only if every split has wins both ways
        beats = wins > 0
        for i in range(k):
            reach = _reachable(beats, i)
            if len(reach) < k:
                raise DisconnectedGraphError([{names[j] for j in reach},
                                              {names[j] for j in range(k) if j not in reach}])
    if k == 1:
        return EloTable({names[0]: ANCHOR})
    total_wins = wins.sum(axis=1)
    gamma = np.ones(k)
    scale = 400.0 / math.log(10.0)
    elo = np.zeros(k)
    for _ in range(max_iter):
        denom = (games / (gamma[:, None] + gamma[None, :])).sum(axis=1)
        gamma = total_wins / denom
        gamma /= math.exp(np.log(gamma).mean())
        new_elo = scale * np.log(gamma)
        change = np.abs(new_elo - elo).max()
        elo = new_elo
        if change < tol:
            break
    else:
        raise RuntimeError("Elo fit did not converge")
    elo = elo - elo.mean() + ANCHOR
    return EloTable({p: float(elo[i]) for i, p in enumerate(names)})


def _reachable(adj: np.ndarray, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return seen


@dataclass(frozen=True)
class ScheduledGame:
    pair_index: int
    round: int
    game: int
    player_a: str
    player_b: str
    a_moves_first: bool
    seed: int


def schedule_round_robin(players: Sequence[str], rounds: int, games_per_pair_per_round: int,
                         rng=None) -> list[ScheduledGame]:
    """Every unordered pair meets ``rounds * games_per_pair_per_round`` times.

    Colours alternate within each pair's sequence of games, starting with the
    first-listed player moving first.
    """
    if len(players) < 2:
        raise ValueError("a tournament needs at least two players")
    if len(set(players)) != len(players):
        raise ValueError("player ids must be unique")
    rng = np.random.default_rng(rng)
    pairs = list(itertools.combinations(players, 2))
    seeds = rng.integers(0, 2**31 - 1, size=len(pairs) * rounds * games_per_pair_per_round)
    out = []
    s = 0
    for rnd in range(rounds):
        for pi, (a, b) in enumerate(pairs):
            for g in range(games_per_pair_per_round):
                nth = rnd * games_per_pair_per_round + g
                out.append(ScheduledGame(pi, rnd, g, a, b, nth % 2 == 0, int(seeds[s])))
                s += 1
    return out


def round_robin(players: dict, rounds: int, games_per_pair_per_round: int, play: Callable, rng=None,
                game_name: str = "") -> list[MatchRecord]:
    """Play a full round-robin.

    ``players`` maps id -> agent. ``play(first_agent, second_agent, seed)``
    returns ``(score for the first mover, move count)``.
    """
    schedule = schedule_round_robin(list(players), rounds, games_per_pair_per_round, rng)
    records = []
    for g in schedule:
        first, second = (g.player_a, g.player_b) if g.a_moves_first else (g.player_b, g.player_a)
        score, moves = play(players[first], players[second], g.seed)
        records.append(scheduled_record(g, score, moves, game_name))
    return records


def scheduled_record(g: ScheduledGame, first_mover_score: float, moves: int, game_name: str = "") -> MatchRecord:
    """Turn a played scheduled game into a record from ``player_a``'s side."""
    score_a = first_mover_score if g.a_moves_first else 1.0 - first_mover_score
    return MatchRecord(g.player_a, g.player_b, float(score_a), game_name, g.seed, moves,
                       g.pair_index, g.round, g.game)


@dataclass
class TrainingEloTrack:
    """Running (incumbent, challenger) Elo pair fed by arena games."""

    k: float = DEFAULT_K
    incumbent: float = ANCHOR
    history: list = field(default_factory=list)

    def update(self, scores: Sequence[float], accepted: bool) -> tuple[float, float]:
        """Apply one iteration of arena scores (challenger's view, 1/0.5/0 per game)."""
        inc = self.incumbent
        chal = self.incumbent
        for s in scores:
            e = expected_score(chal, inc)
            chal, inc = incremental_update(chal, e, s, self.k), incremental_update(inc, 1.0 - e, 1.0 - s, self.k)
        self.incumbent = chal if accepted else inc
        pair = (inc, chal)
        self.history.append(pair)
        return pair

    def state(self) -> dict:
        return {"k": self.k, "incumbent": self.incumbent, "history": [list(p) for p in self.history]}

    @classmethod
    def from_state(cls, d: dict) -> "TrainingEloTrack":
        return cls(d["k"], d["incumbent"], [tuple(p) for p in d["history"]])


def training_elo_track(tallies: Sequence[tuple[Sequence[float], bool]], k: float = DEFAULT_K) -> list[tuple[float, float]]:
    """Rating pair after each iteration, from (per-game scores, accepted) tuples."""
    track = TrainingEloTrack(k)
    return [track.update(scores, accepted) for scores, accepted in tallies]


MATCH_COLUMNS = ["pair_index", "round", "game", "player_a", "player_b", "score_a", "seed"]
RATING_COLUMNS = ["player", "games", "wins", "draws", "losses", "elo"]


def write_match_csv(path, records: Sequence[MatchRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MATCH_COLUMNS)
        for r in records:
            w.writerow([r.pair_index, r.round, r.game_index, r.player_a, r.player_b, r.score_a, r.seed])


def read_match_csv(path) -> list[MatchRecord]:
    with open(path, newline="") as fh:
        return [MatchRecord(row["player_a"], row["player_b"], float(row["score_a"]), seed=int(row["seed"]),
                            pair_index=int(row["pair_index"]), round=int(row["round"]),
                            game_index=int(row["game"]))
                for row in csv.DictReader(fh)]


def rating_rows(records: Sequence[MatchRecord], table: EloTable) -> list[list]:
    stats = {p: [0, 0, 0, 0] for p in table.ratings}
    for r in records:
        for p, s in ((r.player_a, r.score_a), (r.player_b, 1.0 - r.score_a)):
            row = stats[p]
            row[0] += 1
            row[1 if s == 1.0 else 2 if s == 0.5 else 3] += 1
    return [[p, *stats[p], f"{elo:.2f}"] for p, elo in table.ranked()]


def write_rating_csv(path, records: Sequence[MatchRecord], table: EloTable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RATING_COLUMNS)
        w.writerows(rating_rows(records, table))
