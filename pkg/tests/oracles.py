"""Independent reference implementations used only by the tests.

These are deliberately naive: 2-D lists, explicit loops, no shared code with
the package under test.
"""

import itertools
import math

import numpy as np

DIRS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def to_grid(state):
    n = state.spec.size
    return [[state.cells[r * n + c] for c in range(n)] for r in range(n)]


def othello_flips(grid, r, c, player):
    n = len(grid)
    if grid[r][c] != 0:
        return []
    flipped = []
    for dr, dc in DIRS:
        line = []
        rr, cc = r + dr, c + dc
        while 0 <= rr < n and 0 <= cc < n and grid[rr][cc] == -player:
            line.append((rr, cc))
            rr += dr
            cc += dc
        if line and 0 <= rr < n and 0 <= cc < n and grid[rr][cc] == player:
            flipped.extend(line)
    return flipped


def othello_moves(grid, player):
    n = len(grid)
    return [r * n + c for r in range(n) for c in range(n) if othello_flips(grid, r, c, player)]


def longest_run_winner(grid, length=4):
    """Player owning a straight run of >= length, scanning every start and direction."""
    n = len(grid)
    for r in range(n):
        for c in range(n):
            p = grid[r][c]
            if p == 0:
                continue
            for dr, dc in [(0, 1), (1, 0), (1, 1), (1, -1)]:
                k = 0
                rr, cc = r, c
                while 0 <= rr < n and 0 <= cc < n and grid[rr][cc] == p:
                    k += 1
                    rr += dr
                    cc += dc
                if k >= length:
                    return p
    return 0


def brute_outcome(kind, grid, to_move):
    """Returns 1 (P1 wins), -1 (P2 wins), 0 (draw) or None (ongoing)."""
    n = len(grid)
    if kind == "othello":
        if othello_moves(grid, 1) or othello_moves(grid, -1):
            return None
        s = sum(map(sum, grid))
        return (s > 0) - (s < 0)
    w = longest_run_winner(grid)
    if w:
        return w
    if kind == "connect4":
        full = all(grid[n - 1][c] != 0 for c in range(n))
    else:
        full = all(v != 0 for row in grid for v in row)
    return 0 if full else None


def brute_legal(kind, grid, to_move):
    n = len(grid)
    if kind == "othello":
        moves = othello_moves(grid, to_move)
        mask = [False] * (n * n + 1)
        for m in moves:
            mask[m] = True
        if not moves:
            mask[n * n] = True
        return mask
    if kind == "connect4":
        return [grid[n - 1][c] == 0 for c in range(n)]
    return [grid[r][c] == 0 for r in range(n) for c in range(n)]


def solve(state, cache):
    """Exact value for the side to move (+1 win, 0 draw, -1 loss); memoised full negamax."""
    key = state.key
    hit = cache.get(key)
    if hit is not None:
        return hit
    out = state.outcome
    if out.is_terminal:
        v = int(out.value_for(state.to_move))
    else:
        v = -1
        for a in state.legal_actions():
            v = max(v, -solve(state.apply(a), cache))
            if v == 1:
                break
    cache[key] = v
    return v


def minimax_value(state, depth):
    """Depth-limited plain minimax: +1/-1 if forced within depth, else 0 (side-to-move view)."""
    out = state.outcome
    if out.is_terminal:
        return out.value_for(state.to_move)
    if depth == 0:
        return 0.0
    return max(-minimax_value(state.apply(a), depth - 1) for a in state.legal_actions())


def winning_moves_in_one(state):
    return [a for a in state.legal_actions() if state.apply(a).outcome.value_for(state.to_move) == 1.0]


def pareto_brute(points):
    out = []
    for i, (t, e) in enumerate(points):
        dominated = False
        for j, (t2, e2) in enumerate(points):
            if j != i and t2 <= t and e2 >= e and (t2 < t or e2 > e):
                dominated = True
                break
        if not dominated:
            out.append((t, e))
    return sorted(out)


def two_player_gap(wins_a, games):
    """Closed-form maximum-likelihood Elo gap for a single pair."""
    p = wins_a / games
    return 400.0 * math.log10(p / (1.0 - p))


def _after_drop(grid, col, player):
    g = [row[:] for row in grid]
    for r in range(len(g)):
        if g[r][col] == 0:
            g[r][col] = player
            return g
    return None


def winning_moves_grid(kind, grid, to_move):
    """Actions that end the game at once with a win for ``to_move`` (depth-1 minimax on raw grids)."""
    n = len(grid)
    wins = []
    if kind == "othello":
        for a in othello_moves(grid, to_move):
            r, c = divmod(a, n)
            g = [row[:] for row in grid]
            for rr, cc in othello_flips(grid, r, c, to_move) + [(r, c)]:
                g[rr][cc] = to_move
            if brute_outcome(kind, g, -to_move) == to_move:
                wins.append(a)
        return wins
    if kind == "connect4":
        for col in range(n):
            g = _after_drop(grid, col, to_move)
            if g is not None and longest_run_winner(g) == to_move:
                wins.append(col)
        return wins
    for a in range(n * n):
        r, c = divmod(a, n)
        if grid[r][c] == 0:
            g = [row[:] for row in grid]
            g[r][c] = to_move
            if longest_run_winner(g) == to_move:
                wins.append(a)
    return wins


def win_in_one_positions(spec, count, seed):
    """Positions reached by random play, still ongoing, where the mover has an immediate win."""
    from alphasweep.games import initial_state

    rng = np.random.default_rng(seed)
    found, seen = [], set()
    while len(found) < count:
        s = initial_state(spec)
        while brute_outcome(spec.kind.value, to_grid(s), s.to_move) is None:
            wins = winning_moves_grid(spec.kind.value, to_grid(s), s.to_move)
            if wins and s.key not in seen and rng.random() < 0.5:
                seen.add(s.key)
                found.append((s, wins))
                break
            s = s.apply(int(rng.choice(s.legal_actions())))
    return found


class ConnectFourSolver:
    """Exact alpha-beta solver for 5x5 Connect Four on bitboards.

    Column c occupies bits c*6 .. c*6+4 (bit 0 = bottom row), so the four
    line directions are shifts by 1, 5, 6 and 7. Values are for the side to
    move: +1 win, 0 draw, -1 loss. The bounds table persists across calls.
    """

    N = 5
    H1 = N + 1

    def __init__(self):
        self.table = {}
        self.col_mask = [((1 << self.N) - 1) << (c * self.H1) for c in range(self.N)]
        self.full = sum(self.col_mask)
        self.order = sorted(range(self.N), key=lambda c: abs(c - self.N // 2))

    def _won(self, b):
        for s in (1, self.H1 - 1, self.H1, self.H1 + 1):
            m = b & (b >> s)
            if m & (m >> 2 * s):
                return True
        return False

    def _drop(self, mask, c):
        if mask & (1 << (c * self.H1 + self.N - 1)):
            return 0
        return ((mask + (1 << (c * self.H1))) & ~mask) & self.col_mask[c]

    def boards(self, state):
        cur = mask = 0
        n = self.N
        for r in range(n):
            for c in range(n):
                v = state.cells[r * n + c]
                if v:
                    bit = 1 << (c * self.H1 + r)
                    mask |= bit
                    if v == state.to_move:
                        cur |= bit
        return cur, mask

    def negamax(self, cur, mask, alpha=-1, beta=1):
        if self._won(cur ^ mask):
            return -1
        if mask == self.full:
            return 0
        for c in range(self.N):
            mv = self._drop(mask, c)
            if mv and self._won(cur | mv):
                return 1
        key = (cur, mask)
        lo, hi = self.table.get(key, (-1, 1))
        if lo >= beta:
            return lo
        if hi <= alpha:
            return hi
        alpha, beta = max(alpha, lo), min(beta, hi)
        a0, b0 = alpha, beta
        best = -1
        for c in self.order:
            mv = self._drop(mask, c)
            if not mv:
                continue
            best = max(best, -self.negamax(cur ^ mask, mask | mv, -beta, -alpha))
            alpha = max(alpha, best)
            if alpha >= beta:
                break
        if best <= a0:
            self.table[key] = (lo, best)
        elif best >= b0:
            self.table[key] = (best, hi)
        else:
            self.table[key] = (best, best)
        return best

    def move_values(self, state):
        """Exact value of each legal column for the side to move."""
        cur, mask = self.boards(state)
        out = {}
        for c in range(self.N):
            mv = self._drop(mask, c)
            if mv:
                out[c] = 1 if self._won(cur | mv) else -self.negamax(cur ^ mask, mask | mv)
        return out

    def evaluator(self, state):
        """MCTS evaluator with exact value and priors spread over the optimal columns only."""
        vals = self.move_values(state)
        best = max(vals.values())
        priors = np.zeros(self.N)
        for c, v in vals.items():
            if v == best:
                priors[c] = 1.0
        return priors / priors.sum(), float(best)
