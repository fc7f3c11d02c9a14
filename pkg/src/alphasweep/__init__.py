"""Self-play reinforcement learning on small board games with hyper-parameter
sweeps, Elo rating and time accounting."""

from .games import GameKind, GameSpec, GameState, Outcome, initial_state
from .mcts import SearchConfig, run_search, search, select_action
from .net import ArchConfig, LossTarget, NetworkWeights, TrainConfig, init_weights
from .rating import EloTable, MatchRecord, expected_score, fit_mle_elo, round_robin
from .selfplay import HyperParams, evaluate_vs_random, train_full
from .sweep import SweepPlan, execute, pareto_front, plan_correlation_grid, plan_table1_sweep

__version__ = "0.1.0"
