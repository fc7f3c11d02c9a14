"""Rule engines for Othello, Connect Four and Gobang on 5x5 and 6x6 boards.

All three games share one immutable :class:`GameState` type. Cells are kept as
a flat row-major tuple of ints (``0`` empty, ``1`` for P1, ``-1`` for P2) so
states hash cheaply and can be shared between search trees.

Action notation
---------------
* Othello: ``row * size + col`` for a placement, ``size * size`` for pass.
* Connect Four: the column index. Row 0 is the *bottom* row.
* Gobang: ``row * size + col``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

EMPTY = 0
P1 = 1
P2 = -1

_DIRECTIONS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


class GameConfigError(ValueError):
    """Raised for an unsupported game kind or board size."""


class IllegalActionError(ValueError):
    """Raised when an action is not legal in the given state."""

    def __init__(self, action, state):
        super().__init__(f"action {action} is not legal for {state.spec.name} "
                         f"(to_move={'P1' if state.to_move == P1 else 'P2'})")
        self.action = action


class TerminalStateError(RuntimeError):
    """Raised when a move is requested from a finished game."""


class GameKind(str, enum.Enum):
    OTHELLO = "othello"
    CONNECT_FOUR = "connect4"
    GOBANG = "gobang"


class Outcome(enum.Enum):
    P1_WINS = "p1_wins"
    P2_WINS = "p2_wins"
    DRAW = "draw"
    ONGOING = "ongoing"

    @property
    def is_terminal(self) -> bool:
        return self is not Outcome.ONGOING

    def value_for(self, player: int) -> float:
        """Game result from ``player``'s point of view: +1, -1 or 0."""
        if self is Outcome.P1_WINS:
            return 1.0 if player == P1 else -1.0
        if self is Outcome.P2_WINS:
            return 1.0 if player == P2 else -1.0
        return 0.0


_ALIASES = {
    "othello": GameKind.OTHELLO,
    "connect4": GameKind.CONNECT_FOUR,
    "connectfour": GameKind.CONNECT_FOUR,
    "connect_four": GameKind.CONNECT_FOUR,
    "gobang": GameKind.GOBANG,
}


@dataclass(frozen=True)
class GameSpec:
    kind: GameKind
    size: int

    def __post_init__(self):
        if not isinstance(self.kind, GameKind):
            try:
                object.__setattr__(self, "kind", _ALIASES[str(self.kind).lower()])
            except KeyError:
                raise GameConfigError(f"unknown game kind {self.kind!r}") from None
        if self.size not in (5, 6):
            raise GameConfigError(f"board size must be 5 or 6, got {self.size}")

    @classmethod
    def parse(cls, game: str, size: int) -> "GameSpec":
        return cls(game, int(size))

    @property
    def name(self) -> str:
        return f"{self.kind.value}_{self.size}"

    @property
    def action_space_size(self) -> int:
        if self.kind is GameKind.OTHELLO:
            return self.size * self.size + 1
        if self.kind is GameKind.CONNECT_FOUR:
            return self.size
        return self.size * self.size

    @property
    def win_length(self) -> int:
        return 4

    @property
    def pass_action(self) -> int | None:
        return self.size * self.size if self.kind is GameKind.OTHELLO else None

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (3, self.size, self.size)


@lru_cache(maxsize=None)
def _lines(size: int, length: int) -> tuple[tuple[int, ...], ...]:
    """Every straight window of ``length`` cells, as flat indices."""
    out = []
    for r in range(size):
        for c in range(size):
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                end_r, end_c = r + dr * (length - 1), c + dc * (length - 1)
                if 0 <= end_r < size and 0 <= end_c < size:
                    out.append(tuple((r + dr * k) * size + c + dc * k for k in range(length)))
    return tuple(out)


@lru_cache(maxsize=None)
def _rays(size: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """For each cell, the flat-index rays in the 8 compass directions (length >= 2 only)."""
    rays = []
    for r in range(size):
        for c in range(size):
            cell_rays = []
            for dr, dc in _DIRECTIONS:
                ray = []
                rr, cc = r + dr, c + dc
                while 0 <= rr < size and 0 <= cc < size:
                    ray.append(rr * size + cc)
                    rr += dr
                    cc += dc
                if len(ray) >= 2:
                    cell_rays.append(tuple(ray))
            rays.append(tuple(cell_rays))
    return tuple(rays)


def _othello_flips(cells, idx: int, player: int, size: int) -> list[int]:
    flips: list[int] = []
    opp = -player
    for ray in _rays(size)[idx]:
        run = []
        for j in ray:
            v = cells[j]
            if v == opp:
                run.append(j)
                continue
            if v == player and run:
                flips.extend(run)
            break
    return flips


def _othello_can_place(cells, player: int, size: int) -> list[bool]:
    out = [False] * (size * size)
    for idx, v in enumerate(cells):
        if v == EMPTY and _othello_flips(cells, idx, player, size):
            out[idx] = True
    return out


@dataclass(frozen=True, eq=False)
class GameState:
    """Immutable position plus side to move."""

    spec: GameSpec
    cells: tuple[int, ...]
    to_move: int = P1

    def __eq__(self, other):
        if not isinstance(other, GameState):
            return NotImplemented
        return self.spec == other.spec and self.cells == other.cells and self.to_move == other.to_move

    def __hash__(self):
        return hash((self.spec, self.cells, self.to_move))

    @property
    def key(self) -> tuple:
        return (self.cells, self.to_move)

    @property
    def size(self) -> int:
        return self.spec.size

    @property
    def grid(self) -> np.ndarray:
        """Board as a ``(size, size)`` int8 array, ``grid[row, col]``."""
        return np.asarray(self.cells, dtype=np.int8).reshape(self.size, self.size)

    def cell(self, row: int, col: int) -> int:
        return self.cells[row * self.size + col]

    @cached_property
    def _placements(self) -> tuple[list[bool], list[bool]]:
        # Othello only: (to_move placements, opponent placements)
        mine = _othello_can_place(self.cells, self.to_move, self.size)
        if any(mine):
            return mine, []
        return mine, _othello_can_place(self.cells, -self.to_move, self.size)

    @cached_property
    def outcome(self) -> Outcome:
        kind = self.spec.kind
        if kind is GameKind.OTHELLO:
            mine, theirs = self._placements
            if any(mine) or any(theirs):
                return Outcome.ONGOING
            diff = sum(self.cells)
            if diff > 0:
                return Outcome.P1_WINS
            if diff < 0:
                return Outcome.P2_WINS
            return Outcome.DRAW
        cells = self.cells
        win = self.spec.win_length
        for line in _lines(self.size, win):
            s = 0
            for j in line:
                s += cells[j]
            if s == win:
                return Outcome.P1_WINS
            if s == -win:
                return Outcome.P2_WINS
        if kind is GameKind.CONNECT_FOUR:
            top = (self.size - 1) * self.size
            full = all(cells[top + c] != EMPTY for c in range(self.size))
        else:
            full = EMPTY not in cells
        return Outcome.DRAW if full else Outcome.ONGOING

    @property
    def is_terminal(self) -> bool:
        return self.outcome.is_terminal

    @cached_property
    def legal_mask(self) -> np.ndarray:
        if self.is_terminal:
            raise TerminalStateError(f"no legal actions: game is over ({self.outcome.value})")
        n = self.size
        kind = self.spec.kind
        if kind is GameKind.OTHELLO:
            mine, _ = self._placements
            mask = np.zeros(n * n + 1, dtype=bool)
            mask[: n * n] = mine
            if not any(mine):
                mask[n * n] = True
        elif kind is GameKind.CONNECT_FOUR:
            top = (n - 1) * n
            mask = np.array([self.cells[top + c] == EMPTY for c in range(n)], dtype=bool)
        else:
            mask = np.array([v == EMPTY for v in self.cells], dtype=bool)
        mask.setflags(write=False)
        return mask

    def legal_actions(self) -> list[int]:
        return np.flatnonzero(self.legal_mask).tolist()

    def apply(self, action: int) -> "GameState":
        action = int(action)
        mask = self.legal_mask
        if not 0 <= action < mask.size or not mask[action]:
            raise IllegalActionError(action, self)
        n = self.size
        kind = self.spec.kind
        player = self.to_move
        cells = list(self.cells)
        if kind is GameKind.OTHELLO:
            if action != n * n:
                for j in _othello_flips(self.cells, action, player, n):
                    cells[j] = player
                cells[action] = player
        elif kind is GameKind.CONNECT_FOUR:
            for row in range(n):
                if cells[row * n + action] == EMPTY:
                    cells[row * n + action] = player
                    break
        else:
            cells[action] = player
        return GameState(self.spec, tuple(cells), -player)

    def render(self) -> str:
        """One character per cell, one line per row (top row first)."""
        chars = {EMPTY: ".", P1: "X", P2: "O"}
        rows = ["".join(chars[v] for v in self.cells[r * self.size:(r + 1) * self.size])
                for r in range(self.size)]
        if self.spec.kind is GameKind.CONNECT_FOUR:
            rows.reverse()
        return "\n".join(rows)

    def __repr__(self):
        side = "P1" if self.to_move == P1 else "P2"
        return f"GameState({self.spec.name}, to_move={side})\n{self.render()}"


def initial_state(spec: GameSpec) -> GameState:
    n = spec.size
    cells = [EMPTY] * (n * n)
    if spec.kind is GameKind.OTHELLO:
        lo, hi = n // 2 - 1, n // 2
        cells[lo * n + hi] = P1
        cells[hi * n + lo] = P1
        cells[lo * n + lo] = P2
        cells[hi * n + hi] = P2
    return GameState(spec, tuple(cells), P1)


def legal_actions(state: GameState) -> np.ndarray:
    """Boolean mask of length ``action_space_size``."""
    return state.legal_mask


def apply(state: GameState, action: int) -> GameState:
    return state.apply(action)


def outcome(state: GameState) -> Outcome:
    return state.outcome


def encode(state: GameState) -> np.ndarray:
    """Network input: float32 planes ``[P1 pieces, P2 pieces, side to move]``."""
    grid = state.grid
    planes = np.empty((3, state.size, state.size), dtype=np.float32)
    planes[0] = grid == P1
    planes[1] = grid == P2
    planes[2] = 1.0 if state.to_move == P1 else 0.0
    return planes


@lru_cache(maxsize=None)
def _dihedral_perms(size: int) -> tuple[np.ndarray, ...]:
    """Eight cell permutations; ``new_flat = old_flat[perm]``."""
    base = np.arange(size * size).reshape(size, size)
    perms = []
    for flip in (False, True):
        g = np.fliplr(base) if flip else base
        for k in range(4):
            perms.append(np.ascontiguousarray(np.rot90(g, k)).ravel())
    return tuple(perms)


def symmetry_count(spec: GameSpec) -> int:
    return 2 if spec.kind is GameKind.CONNECT_FOUR else 8


def _action_perm(spec: GameSpec, k: int) -> np.ndarray:
    n = spec.size
    if spec.kind is GameKind.CONNECT_FOUR:
        cols = np.arange(n)
        return cols[::-1].copy() if k == 1 else cols
    perm = _dihedral_perms(n)[k]
    if spec.kind is GameKind.OTHELLO:
        perm = np.append(perm, n * n)
    return perm


def inverse_symmetry(spec: GameSpec, k: int) -> int:
    """Index of the transform undoing transform ``k``."""
    target = np.argsort(_action_perm(spec, k))
    for j in range(symmetry_count(spec)):
        if np.array_equal(_action_perm(spec, j), target):
            return j
    raise AssertionError("symmetry group not closed")


def transform(state: GameState, policy: np.ndarray, k: int) -> tuple[GameState, np.ndarray]:
    spec = state.spec
    n = spec.size
    policy = np.asarray(policy)
    if spec.kind is GameKind.CONNECT_FOUR:
        cols = _action_perm(spec, k)
        cell_perm = (np.arange(n)[:, None] * n + cols[None, :]).ravel()
    else:
        cell_perm = _dihedral_perms(n)[k]
    cells = tuple(state.cells[i] for i in cell_perm)
    return GameState(spec, cells, state.to_move), policy[_action_perm(spec, k)]


def symmetries(state: GameState, policy) -> list[tuple[GameState, np.ndarray]]:
    """All symmetric copies of ``(state, policy)``, identity first."""
    policy = np.asarray(policy)
    if policy.shape != (state.spec.action_space_size,):
        raise ValueError(f"policy length {policy.shape} != {state.spec.action_space_size}")
    return [transform(state, policy, k) for k in range(symmetry_count(state.spec))]
