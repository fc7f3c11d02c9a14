"""Network-guided Monte Carlo tree search (PUCT selection).

The search only needs a small duck-typed surface from states: ``legal_mask``,
``apply(action)``, ``outcome`` (with ``is_terminal`` and ``value_for``) and
``to_move``. Every action hands the move to the other player, so values are
negated once per ply on the way back up.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .games import GameState, encode
from .net import NetworkWeights, predict


class Evaluator(Protocol):
    def __call__(self, state) -> tuple[np.ndarray, float]:
        """Return (priors over the full action space, value for the side to move)."""


class UniformEvaluator:
    """Uniform priors over legal actions and a value of zero."""

    def __call__(self, state):
        mask = state.legal_mask
        return mask / mask.sum(), 0.0


class NetworkEvaluator:
    """Eval-mode network with illegal actions masked out of the softmax."""

    def __init__(self, weights: NetworkWeights, cache_size: int = 50_000):
        self.weights = weights
        self.cache_size = cache_size
        self._cache: dict = {}

    def __call__(self, state: GameState):
        key = state.key
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        out = predict(self.weights, encode(state), state.legal_mask)
        if len(self._cache) >= self.cache_size:
            self._cache.clear()
        self._cache[key] = out
        return out


def as_evaluator(model) -> Callable:
    if model is None:
        return UniformEvaluator()
    if isinstance(model, NetworkWeights):
        return NetworkEvaluator(model)
    return model


@dataclass(frozen=True)
class SearchConfig:
    m: int = 100
    c: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"need at least one simulation, got m={self.m}")
        if self.c < 0:
            raise ValueError(f"exploration constant must be >= 0, got c={self.c}")


class _Node:
    __slots__ = ("state", "actions", "priors", "N", "W", "children", "terminal_value", "value")

    def __init__(self, state):
        self.state = state
        self.children = None
        self.terminal_value = None
        out = state.outcome
        if out.is_terminal:
            self.terminal_value = out.value_for(state.to_move)

    def expand(self, evaluator) -> float:
        priors, value = evaluator(self.state)
        actions = np.flatnonzero(self.state.legal_mask)
        p = np.asarray(priors, dtype=np.float64)[actions]
        total = p.sum()
        self.priors = p / total if total > 0 else np.full(len(actions), 1.0 / len(actions))
        self.actions = actions
        self.N = np.zeros(len(actions), dtype=np.int64)
        self.W = np.zeros(len(actions), dtype=np.float64)
        self.children = [None] * len(actions)
        self.value = float(value)
        return self.value

    def select(self, c: float) -> int:
        total = self.N.sum()
        if total == 0:
            return int(np.argmax(self.priors))
        q = np.divide(self.W, self.N, out=np.zeros_like(self.W), where=self.N > 0)
        score = q + c * self.priors * math.sqrt(total) / (1.0 + self.N)
        return int(np.argmax(score))


@dataclass
class SearchResult:
    pi: np.ndarray
    visits: np.ndarray
    root_value: float
    priors: np.ndarray


def run_search(root, model, config: SearchConfig, rng=None, trace=None) -> SearchResult:
    """Run ``config.m`` simulations from ``root``; see :func:`search`.

    ``trace``, if given, is a writable text stream that receives one JSON
    line per simulation (action path and backed-up leaf value).
    """
    if root.outcome.is_terminal:
        raise ValueError("cannot search from a terminal state")
    evaluator = as_evaluator(model)
    tree = _Node(root)
    tree.expand(evaluator)
    for sim in range(config.m):
        node = tree
        path = []
        while True:
            if node.terminal_value is not None:
                value = node.terminal_value
                break
            if node.children is None:
                value = node.expand(evaluator)
                break
            i = node.select(config.c)
            child = node.children[i]
            if child is None:
                child = node.children[i] = _Node(node.state.apply(int(node.actions[i])))
            path.append((node, i))
            node = child
        leaf_value = value
        for parent, i in reversed(path):
            value = -value
            parent.N[i] += 1
            parent.W[i] += value
        if trace is not None:
            trace.write(json.dumps({"sim": sim, "path": [int(p.actions[i]) for p, i in path],
                                    "leaf_value": float(leaf_value)}) + "\n")
    size = len(root.legal_mask)
    visits = np.zeros(size, dtype=np.int64)
    visits[tree.actions] = tree.N
    pi = visits / visits.sum()
    priors = np.zeros(size)
    priors[tree.actions] = tree.priors
    root_value = float(tree.W.sum() / tree.N.sum())
    return SearchResult(pi, visits, root_value, priors)


def search(root, model, config: SearchConfig, rng=None, trace=None) -> np.ndarray:
    """Search policy at ``root``: root visit counts normalised to sum to one.

    ``model`` is NetworkWeights, any evaluator callable, or None for the
    uniform evaluator. The search itself is deterministic; ``rng`` is accepted
    for interface symmetry with the rest of the pipeline.
    """
    return run_search(root, model, config, rng, trace).pi


def select_action(pi, step_index: int, t_prime: int, rng=None) -> int:
    """Sample from ``pi`` while ``step_index < t_prime``; afterwards take the argmax.

    Ties in the argmax go to the lowest action index.
    """
    pi = np.asarray(pi, dtype=np.float64)
    if step_index < t_prime:
        rng = np.random.default_rng(rng)
        p = pi / pi.sum()
        return int(rng.choice(len(p), p=p))
    return int(np.argmax(pi))
