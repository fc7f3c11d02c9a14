"""Command-line entry point: train, sweep, arena, tournament and report."""

from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import math
import os
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rating, selfplay, sweep
from .games import GameConfigError, GameSpec
from .mcts import SearchConfig
from .net import CheckpointError, LossTarget, load_checkpoint_file

logger = logging.getLogger("alphasweep")

OUTPUT_ROOT_ENV = "ALPHASWEEP_OUT"
EXIT_OK, EXIT_USAGE, EXIT_INTERRUPTED = 0, 2, 130

PARAM_KEYS = ("I", "E", "T_prime", "m", "c", "rs", "ep", "bs", "lr", "d", "n", "u",
              "loss_target", "lambda", "arena_enabled", "augment_symmetries")
RUN_KEYS = ("game", "size", "seed", "out", "parallelism")
_INT_KEYS = {"I", "E", "T_prime", "m", "rs", "ep", "bs", "n", "size", "seed", "parallelism"}
_FLOAT_KEYS = {"c", "lr", "d", "u", "lambda"}
_BOOL_KEYS = {"arena_enabled", "augment_symmetries"}


class ConfigError(ValueError):
    pass


class ReportInputError(ValueError):
    def __init__(self, path, line, reason):
        super().__init__(f"{path}:{line}: {reason}")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "alphasweep_runs"))


# ---------------------------------------------------------------------------
# configuration


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, text: str):
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    if key in _BOOL_KEYS:
        return _parse_bool(text)
    return text.strip()


@dataclass
class RunConfig:
    game: str = "connect4"
    size: int = 5
    params: selfplay.HyperParams = field(default_factory=selfplay.HyperParams)
    seed: int = 0
    out: str | None = None
    parallelism: int = 1

    @property
    def spec(self) -> GameSpec:
        return GameSpec.parse(self.game, self.size)

    @classmethod
    def from_pairs(cls, pairs, base: "RunConfig | None" = None) -> "RunConfig":
        """Build a config from ``(key, value-text)`` pairs applied in order."""
        base = base or cls()
        run = {"game": base.game, "size": base.size, "seed": base.seed, "out": base.out,
               "parallelism": base.parallelism}
        params = base.params.to_dict()
        for key, text in pairs:
            if key not in PARAM_KEYS and key not in RUN_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                value = _convert(key, text)
                if key == "loss_target":
                    target = LossTarget.parse(value, params["lam"])
                    params["loss_target"] = target.kind
                    params["lam"] = target.lam
                elif key == "lambda":
                    params["lam"] = value
                elif key in RUN_KEYS:
                    run[key] = value
                else:
                    params[key] = value
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        try:
            cfg = cls(run["game"], run["size"], selfplay.HyperParams.from_dict(params), run["seed"], run["out"],
                      run["parallelism"])
            cfg.spec  # validates game and size
        except (ValueError, KeyError, GameConfigError) as exc:
            raise ConfigError(str(exc)) from None
        if cfg.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        return cfg

    def to_pairs(self) -> list[tuple[str, str]]:
        p = self.params
        pairs = [("game", self.game), ("size", str(self.size)), ("seed", str(self.seed))]
        if self.out is not None:
            pairs.append(("out", self.out))
        pairs.append(("parallelism", str(self.parallelism)))
        for key in PARAM_KEYS:
            value = p.lam if key == "lambda" else getattr(p, key)
            pairs.append((key, str(value).lower() if isinstance(value, bool) else repr(value)
                          if isinstance(value, float) else str(value)))
        return pairs

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_pairs())

    @classmethod
    def from_text(cls, text: str, source: str = "<config>", base: "RunConfig | None" = None) -> "RunConfig":
        return cls.from_pairs(parse_config_text(text, source), base)

    @classmethod
    def from_manifest(cls, manifest: dict, out: str | None = None) -> "RunConfig":
        return cls(manifest["game"], manifest["size"], selfplay.HyperParams.from_dict(manifest["params"]), manifest["seed"], out)


def parse_config_text(text: str, source: str = "<config>") -> list[tuple[str, str]]:
    """``key=value`` per line; blank lines and ``#`` comments are ignored."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_run_config(config_path, overrides) -> RunConfig:
    pairs = []
    if config_path:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        pairs += parse_config_text(text, str(config_path))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return RunConfig.from_pairs(pairs)


def _apply_common(cfg: RunConfig, args) -> RunConfig:
    changes = [(k, str(getattr(args, k))) for k in ("game", "size", "seed", "parallelism")
               if getattr(args, k, None) is not None]
    if getattr(args, "out", None):
        changes.append(("out", args.out))
    return RunConfig.from_pairs(changes, cfg) if changes else cfg


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    cfg = _apply_common(load_run_config(args.config, args.set), args)
    out = Path(cfg.out) if cfg.out else output_root() / "train" / f"{cfg.spec.name}_seed{cfg.seed}"
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    logger.info("training %s into %s", cfg.spec.name, out)
    result = selfplay.train_full(cfg.spec, cfg.params, cfg.seed, out)
    last = result.reports[-1] if result.reports else None
    print(json.dumps({"out": str(out), "iterations": len(result.reports),
                      "final_loss": last.losses[-1].total if last else None,
                      "checkpoints": len(result.checkpoints)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _build_plan(args) -> sweep.SweepPlan:
    if args.plan == "table1":
        plan = sweep.plan_table1_sweep(desk_scale=args.desk_scale, repetitions=args.repetitions)
    elif args.plan == "correlation":
        plan = sweep.plan_correlation_grid(repetitions=args.repetitions)
    else:
        try:
            plan = sweep.SweepPlan.from_dict(json.loads(Path(args.plan).read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load plan {args.plan}: {exc}") from None
    if args.set:
        pairs = [tuple(s.split("=", 1)) for s in args.set]
        base = RunConfig.from_pairs(pairs, RunConfig(params=plan.base)).params
        plan = sweep.SweepPlan(base, plan.axes, plan.mode, plan.repetitions, plan.seeds)
    return plan


def cmd_sweep(args) -> int:
    plan = _build_plan(args)
    try:
        spec = GameSpec.parse(args.game, args.size)
    except GameConfigError as exc:
        raise ConfigError(str(exc)) from None
    runs = plan.runs()
    print(f"{len(plan.settings())} settings, {len(runs)} runs scheduled")
    if args.dry_run:
        for setting, seed in runs:
            print(f"{sweep.run_id(setting.run_name, seed)}")
        return EXIT_OK
    out = Path(args.out) if args.out else output_root() / "sweep" / f"{args.plan_name}_{spec.name}"
    results = sweep.Sweep(plan, spec, out).execute(args.parallelism)
    failed = [r.run_id for r in results if r.status != "done"]
    print(json.dumps({"out": str(out), "runs": len(results), "failed": failed}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# agents for arena / tournament


@dataclass
class Player:
    name: str
    agent: object
    spec: GameSpec | None


def _load_player(ref: str, spec: GameSpec | None, config: SearchConfig):
    """``random``, ``uniform`` (network-free search) or a checkpoint path."""
    if ref == "random":
        return Player("random", selfplay.RandomAgent(), None)
    if ref == "uniform":
        return Player("uniform", selfplay.MCTSAgent(None, config, "uniform"), None)
    weights, meta = load_checkpoint_file(ref, spec)
    return Player(ref, selfplay.MCTSAgent(weights, config, ref), weights.spec)


def cmd_arena(args) -> int:
    config = SearchConfig(args.m, args.c)
    a = _load_player(args.player_a, None, config)
    b = _load_player(args.player_b, None, config)
    specs = {p.spec for p in (a, b) if p.spec is not None}
    if args.game:
        specs.add(GameSpec.parse(args.game, args.size))
    if len(specs) != 1:
        raise ConfigError("players disagree on the game, or no game given (use --game/--size)")
    spec = specs.pop()
    rng = np.random.default_rng(args.seed)
    wins = draws = losses = 0
    for g in range(args.games):
        seed = int(rng.integers(2**31 - 1))
        if g % 2 == 0:
            s = selfplay.first_player_score(selfplay.play_game(a.agent, b.agent, spec, seed)[0])
        else:
            s = 1.0 - selfplay.first_player_score(selfplay.play_game(b.agent, a.agent, spec, seed)[0])
        wins += s == 1.0
        draws += s == 0.5
        losses += s == 0.0
    accepted = selfplay.accepts(wins, losses, args.u)
    print(json.dumps({"player_a": a.name, "player_b": b.name, "wins": wins, "draws": draws, "losses": losses,
                      "a_accepted_at_u": accepted}))
    return EXIT_OK


def resolve_checkpoints(refs) -> list[str]:
    """Expand globs and directories. A directory contributes its ``best.ckpt``
    files (final models of runs or sweeps) if it has any, else every ``.ckpt``."""
    out = []
    for ref in refs:
        p = Path(ref)
        if p.is_dir():
            found = sorted(p.rglob("best.ckpt")) or sorted(p.rglob("*.ckpt"))
            out += [str(f) for f in found]
        elif any(ch in ref for ch in "*?["):
            out += sorted(glob.glob(ref, recursive=True))
        else:
            out.append(ref)
    return list(dict.fromkeys(out))


_WORKER_PLAYERS: dict = {}


def _init_worker(refs, game, size, m, c):
    spec = GameSpec.parse(game, size)
    config = SearchConfig(m, c)
    _WORKER_PLAYERS.clear()
    _WORKER_PLAYERS["spec"] = spec
    for ref in refs:
        _WORKER_PLAYERS[ref] = _load_player(ref, spec, config).agent


def _play_scheduled(item):
    first, second, seed = item
    result, moves = selfplay.play_game(_WORKER_PLAYERS[first], _WORKER_PLAYERS[second], _WORKER_PLAYERS["spec"], seed)
    return selfplay.first_player_score(result), moves


def cmd_tournament(args) -> int:
    refs = resolve_checkpoints(args.checkpoints)
    missing = [r for r in refs if not Path(r).is_file()]
    if missing:
        raise ConfigError("checkpoint(s) not found: " + ", ".join(missing))
    config = SearchConfig(args.m, args.c)
    specs = {}
    for ref in refs:
        try:
            specs[ref] = load_checkpoint_file(ref)[0].spec
        except CheckpointError as exc:
            raise ConfigError(f"{ref}: {exc}") from None
    kinds = defaultdict(list)
    for ref, spec in specs.items():
        kinds[spec].append(ref)
    if len(kinds) > 1:
        majority = max(kinds, key=lambda s: len(kinds[s]))
        offenders = [f"{r} ({s.name})" for s, rs in kinds.items() if s != majority for r in rs]
        raise ConfigError(f"incompatible checkpoints (expected {majority.name}): " + ", ".join(offenders))
    players = list(refs) + (["random"] if args.include_random else [])
    if len(players) < 2:
        raise ConfigError("a tournament needs at least two players (add checkpoints or --include-random)")
    if not kinds:
        raise ConfigError("no checkpoints given")
    spec = next(iter(kinds))
    schedule = rating.schedule_round_robin(players, args.rounds, args.games_per_pair, args.seed)
    pairs = len(players) * (len(players) - 1) // 2
    print(f"{len(players)} players, {pairs} pairs, {len(schedule)} games")
    if args.dry_run:
        return EXIT_OK
    items = [((g.player_a, g.player_b) if g.a_moves_first else (g.player_b, g.player_a)) + (g.seed,)
             for g in schedule]
    init = (players, spec.kind.value, spec.size, args.m, args.c)
    if args.parallelism > 1:
        with ProcessPoolExecutor(args.parallelism, initializer=_init_worker, initargs=init) as pool:
            played = list(pool.map(_play_scheduled, items, chunksize=8))
    else:
        _init_worker(*init)
        played = [_play_scheduled(it) for it in items]
    records = [rating.scheduled_record(g, s, mv, spec.name) for g, (s, mv) in zip(schedule, played)]
    table = rating.fit_mle_elo(records, players)
    out = Path(args.out) if args.out else output_root() / "tournament" / spec.name
    out.mkdir(parents=True, exist_ok=True)
    rating.write_match_csv(out / "matches.csv", records)
    rating.write_rating_csv(out / "ratings.csv", records, table)
    print(json.dumps({"out": str(out), "players": len(players), "games": len(records)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# report

LOSS_COLUMNS = ["run", "setting", "seed", "iteration", "epoch", "total", "policy", "value"]
TRAINING_ELO_COLUMNS = ["setting", "iteration", "runs", "elo_mean", "elo_std", "loss_mean", "loss_std"]
ELO_TIME_COLUMNS = ["run_id", "setting", "seed", "total_s", "elo", "pareto"]
TIME_TABLE_COLUMNS = ["parameter", "value_min", "value_default", "value_max", "time_min_s", "time_default_s",
                      "time_max_s", "ratio", "classification"]


@dataclass
class _Run:
    path: Path
    setting: str
    seed: int
    metrics: list[dict]


def _read_jsonl(path: Path) -> list[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rec["iteration"], rec["losses"], rec["elo"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ReportInputError(path, lineno, f"malformed metrics record ({exc})") from None
            out.append(rec)
    return out


def _setting_label(manifest: dict) -> str:
    p = dict(manifest["params"])
    return ";".join(f"{k}={p[k]}" for k in sorted(p)) + f";game={manifest['game']}_{manifest['size']}"


def _load_run(metrics_path: Path) -> _Run:
    manifest_path = metrics_path.parent / "run.json"
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text())
            setting, seed = _setting_label(manifest), int(manifest["seed"])
        except (ValueError, KeyError) as exc:
            raise ReportInputError(manifest_path, 1, f"malformed run manifest ({exc})") from None
    else:
        setting, seed = str(metrics_path.parent), 0
    return _Run(metrics_path.parent, setting, seed, _read_jsonl(metrics_path))


def _read_results(path: Path, ratings: dict[str, float]) -> list[sweep.RunResult]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "total_s" not in reader.fieldnames:
            raise ReportInputError(path, 1, "not a sweep results table")
        for lineno, row in enumerate(reader, 2):
            try:
                d = {k: row[k] for k in selfplay.HyperParams.SWEEPABLE}
                pairs = list(d.items()) + [("arena_enabled", row["arena_enabled"])]
                params = RunConfig.from_pairs(pairs).params
                t = sweep.StageTimings([float(row["selfplay_s"])], [float(row["training_s"])],
                                       [float(row["arena_s"])], [float(row["total_s"])])
                ckpt = row["checkpoint"] or None
                elo = float(row["elo"]) if row["elo"] else None
                if ckpt and elo is None:
                    elo = ratings.get(str(Path(ckpt).resolve()), ratings.get(ckpt))
                rows.append(sweep.RunResult(row["setting"], params, int(row["seed"]), ckpt, t,
                                            float(row["final_loss"]), elo, row["status"]))
            except (KeyError, ValueError, ConfigError) as exc:
                raise ReportInputError(path, lineno, f"malformed row ({exc})") from None
    return rows


def _read_ratings(path: Path) -> dict[str, float]:
    out = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), 2):
            try:
                out[row["player"]] = float(row["elo"])
                if row["player"] != "random":
                    out[str(Path(row["player"]).resolve())] = float(row["elo"])
            except (KeyError, ValueError) as exc:
                raise ReportInputError(path, lineno, f"malformed rating row ({exc})") from None
    return out


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6f}"


def cmd_report(args) -> int:
    metrics_files, results_files = [], []
    for ref in args.inputs:
        p = Path(ref)
        if p.is_dir():
            metrics_files += sorted(p.rglob("metrics.jsonl"))
            results_files += sorted(p.rglob("results.csv"))
        elif p.name.endswith(".jsonl"):
            metrics_files.append(p)
        elif p.suffix == ".csv":
            results_files.append(p)
        else:
            raise ConfigError(f"{ref}: not a run directory, metrics.jsonl or results.csv")
    if not metrics_files and not results_files:
        raise ConfigError("no metrics.jsonl or results.csv found in " + ", ".join(args.inputs))
    ratings = _read_ratings(Path(args.ratings)) if args.ratings else {}
    runs = [_load_run(p) for p in metrics_files]
    results = [r for p in results_files for r in _read_results(p, ratings)]
    out = Path(args.out) if args.out else output_root() / "report"
    out.mkdir(parents=True, exist_ok=True)

    loss_rows = []
    for run in runs:
        for rec in run.metrics:
            for ep, l in enumerate(rec["losses"], 1):
                loss_rows.append([str(run.path), run.setting, run.seed, rec["iteration"], ep,
                                  _num(l["total"]), _num(l["policy"]), _num(l["value"])])
    _write_csv(out / "loss_vs_iteration.csv", LOSS_COLUMNS, loss_rows)

    grouped: dict = defaultdict(lambda: defaultdict(list))
    for run in runs:
        for rec in run.metrics:
            grouped[run.setting][rec["iteration"]].append((rec["elo"]["incumbent"], rec["losses"][-1]["total"]))
    elo_rows = []
    for setting in sorted(grouped):
        for it in sorted(grouped[setting]):
            vals = np.array(grouped[setting][it], dtype=float)
            elo_rows.append([setting, it, len(vals), _num(vals[:, 0].mean()), _num(vals[:, 0].std()),
                             _num(vals[:, 1].mean()), _num(vals[:, 1].std())])
    _write_csv(out / "training_elo.csv", TRAINING_ELO_COLUMNS, elo_rows)

    rated = [r for r in results if r.elo is not None and r.status == "done"]
    mask = sweep.pareto_mask([(r.timings.total, r.elo) for r in rated])
    _write_csv(out / "elo_vs_time.csv", ELO_TIME_COLUMNS,
               [[r.run_id, r.run_name, r.seed, _num(r.timings.total), f"{r.elo:.2f}", int(k)]
                for r, k in zip(rated, mask)])

    time_rows = []
    if any(r.run_name == "default" for r in results):
        for row in sweep.time_report(results):
            v, t = row.values, row.mean_times
            mid = (v[1], t[1]) if len(v) == 3 else ("", None)
            time_rows.append([row.parameter, v[0], mid[0], v[-1], _num(t[0]), _num(mid[1]), _num(t[-1]),
                              _num(row.ratio), row.classification])
    _write_csv(out / "time_table.csv", TIME_TABLE_COLUMNS, time_rows)
    print(json.dumps({"out": str(out), "runs": len(runs), "results": len(results)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alphasweep", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one self-play training run")
    t.add_argument("--config", help="key=value config file")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    t.add_argument("--game")
    t.add_argument("--size", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="run a hyper-parameter sweep")
    s.add_argument("plan", help="table1, correlation, or a JSON plan file")
    s.add_argument("--game", default="connect4")
    s.add_argument("--size", type=int, default=5)
    s.add_argument("--desk-scale", action="store_true", help="scaled-down I, E and m values (table1 only)")
    s.add_argument("--repetitions", type=int, default=1)
    s.add_argument("--parallelism", type=int, default=1)
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override base parameters")
    s.add_argument("--out")
    s.add_argument("--dry-run", action="store_true", help="list the runs without executing them")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("arena", help="play two agents against each other")
    a.add_argument("player_a", help="checkpoint path, 'random' or 'uniform'")
    a.add_argument("player_b")
    a.add_argument("--games", type=int, default=40)
    a.add_argument("--m", type=int, default=100)
    a.add_argument("--c", type=float, default=1.0)
    a.add_argument("--u", type=float, default=0.6)
    a.add_argument("--game")
    a.add_argument("--size", type=int, default=5)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_arena)

    r = sub.add_parser("tournament", help="round-robin between checkpoints, rated by MLE Elo")
    r.add_argument("checkpoints", nargs="+", help="checkpoint files, globs or directories")
    r.add_argument("--rounds", type=int, default=1)
    r.add_argument("--games-per-pair", type=int, default=10)
    r.add_argument("--include-random", action="store_true")
    r.add_argument("--m", type=int, default=100)
    r.add_argument("--c", type=float, default=1.0)
    r.add_argument("--parallelism", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.add_argument("--dry-run", action="store_true", help="print the schedule size only")
    r.set_defaults(func=cmd_tournament)

    p = sub.add_parser("report", help="write plot-ready CSVs")
    p.add_argument("inputs", nargs="+", help="run/sweep directories, metrics.jsonl or results.csv files")
    p.add_argument("--ratings", help="ratings.csv from a tournament, joined on checkpoint path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if args.command == "sweep":
        args.plan_name = Path(args.plan).stem if args.plan not in ("table1", "correlation") else args.plan
        if args.repetitions < 1 or args.parallelism < 1:
            print("error: repetitions and parallelism must be >= 1", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, ReportInputError, GameConfigError, CheckpointError, selfplay.ManifestMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted; completed iterations are kept and the run can be resumed", file=sys.stderr)
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
