"""Experiment orchestration: one-factor and full-grid sweeps, per-stage
wall-clock accounting, Pareto fronts and time-sensitivity tables."""

from __future__ import annotations

import csv
import dataclasses
import enum
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .games import GameSpec
from .net import ArchConfig
from .selfplay import HyperParams, train_full

logger = logging.getLogger(__name__)

TABLE1_AXES: list[tuple[str, list]] = [
    ("I", [50, 100, 150]),
    ("E", [10, 50, 100]),
    ("T_prime", [10, 15, 20]),
    ("m", [25, 100, 200]),
    ("c", [0.5, 1.0, 2.0]),
    ("rs", [1, 20, 40]),
    ("ep", [5, 10, 15]),
    ("bs", [32, 64, 96]),
    ("lr", [0.001, 0.005, 0.01]),
    ("d", [0.2, 0.3, 0.4]),
    ("n", [20, 40, 100]),
    ("u", [0.5, 0.6, 0.7]),
]

# Scaled-down budgets for single-machine runs; only I, E and m shrink.
DESK_SCALE = {"I": [5, 10, 20], "E": [2, 5, 10], "m": [10, 25, 50]}

CORRELATION_AXES: list[tuple[str, list]] = [
    ("I", [25, 50, 75]),
    ("E", [10, 20, 30]),
    ("m", [25, 50, 75]),
    ("ep", [5, 10, 15]),
]

SENSITIVITY_RATIO = 1.25


class SweepMode(str, enum.Enum):
    ONE_FACTOR = "one_factor"
    FULL_GRID = "full_grid"


@dataclass(frozen=True)
class Setting:
    run_name: str
    params: HyperParams


@dataclass
class SweepPlan:
    base: HyperParams
    axes: list[tuple[str, list]]
    mode: SweepMode = SweepMode.ONE_FACTOR
    repetitions: int = 1
    seeds: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.mode = SweepMode(self.mode)
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for name, values in self.axes:
            if name not in HyperParams.SWEEPABLE:
                raise ValueError(f"unknown sweep axis {name!r}")
            if not values:
                raise ValueError(f"axis {name} has no values")
            for v in values:
                self.base.replace(**{name: v})  # raises on out-of-range values
        if not self.seeds:
            self.seeds = list(range(self.repetitions))
        elif len(self.seeds) != self.repetitions:
            raise ValueError("need one seed per repetition")

    def settings(self) -> list[Setting]:
        """Distinct parameter settings in plan order.

        One-factor plans vary a single axis at a time; the base setting is
        listed once, first. Full-grid plans take the Cartesian product.
        """
        if self.mode is SweepMode.FULL_GRID:
            names = [a for a, _ in self.axes]
            out = []
            for combo in itertools.product(*(v for _, v in self.axes)):
                changes = dict(zip(names, combo))
                label = ",".join(f"{k}={_fmt(v)}" for k, v in changes.items())
                out.append(Setting(label, self.base.replace(**changes)))
            return out
        out = [Setting("default", self.base)]
        seen = {self.base}
        for name, values in self.axes:
            for v in values:
                p = self.base.replace(**{name: v})
                if p not in seen:
                    seen.add(p)
                    out.append(Setting(f"{name}={_fmt(v)}", p))
        return out

    def runs(self) -> list[tuple[Setting, int]]:
        """(setting, seed) pairs, seed-major so that slow patches of machine
        time are spread across settings instead of landing on one of them."""
        return [(s, seed) for seed in self.seeds for s in self.settings()]

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "axes": [[a, list(v)] for a, v in self.axes],
                "mode": self.mode.value, "repetitions": self.repetitions, "seeds": list(self.seeds)}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        return cls(HyperParams.from_dict(d.get("base", {})), [(a, list(v)) for a, v in d["axes"]],
                   SweepMode(d.get("mode", "one_factor")), int(d.get("repetitions", 1)), list(d.get("seeds", [])))


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def plan_table1_sweep(desk_scale: bool = False, repetitions: int = 1) -> SweepPlan:
    """Minimum, default and maximum of each of the twelve parameters, one at a time."""
    axes = [(name, list(DESK_SCALE.get(name, values) if desk_scale else values)) for name, values in TABLE1_AXES]
    base = HyperParams(**{name: values[1] for name, values in axes})
    return SweepPlan(base, axes, SweepMode.ONE_FACTOR, repetitions)


def plan_correlation_grid(repetitions: int = 1) -> SweepPlan:
    """3^4 grid over I, E, m, ep with the arena stage switched off."""
    base = HyperParams(arena_enabled=False)
    return SweepPlan(base, [(a, list(v)) for a, v in CORRELATION_AXES], SweepMode.FULL_GRID, repetitions)


# ---------------------------------------------------------------------------
# results


@dataclass
class StageTimings:
    """Per-iteration wall-clock seconds for each stage."""

    selfplay: list[float] = field(default_factory=list)
    training: list[float] = field(default_factory=list)
    arena: list[float] = field(default_factory=list)
    iteration_totals: list[float] = field(default_factory=list)

    @property
    def selfplay_total(self) -> float:
        return float(sum(self.selfplay))

    @property
    def training_total(self) -> float:
        return float(sum(self.training))

    @property
    def arena_total(self) -> float:
        return float(sum(self.arena))

    @property
    def total(self) -> float:
        return float(sum(self.iteration_totals))

    @classmethod
    def from_reports(cls, reports) -> "StageTimings":
        t = cls()
        for r in reports:
            t.selfplay.append(r.timings.selfplay)
            t.training.append(r.timings.training)
            t.arena.append(r.timings.arena)
            t.iteration_totals.append(r.timings.total)
        return t


@dataclass
class RunResult:
    run_name: str
    params: HyperParams
    seed: int
    checkpoint: str | None
    timings: StageTimings
    final_loss: float
    elo: float | None = None
    status: str = "done"
    error: str = ""
    parallelism: int = 1

    @property
    def run_id(self) -> str:
        return run_id(self.run_name, self.seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["params"] = self.params.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        d = dict(d)
        d["params"] = HyperParams.from_dict(d["params"])
        d["timings"] = StageTimings(**d["timings"])
        return cls(**d)


def run_id(run_name: str, seed: int) -> str:
    return f"{run_name}__seed{seed}"


def _safe_dirname(rid: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-=" else "_" for ch in rid)


def _run_one(run_name: str, params_dict: dict, seed: int, game: tuple[str, int], out_dir: str | None,
             arch: dict, parallelism: int) -> dict:
    """Worker body. Returns a RunResult dict; never raises."""
    params = HyperParams.from_dict(params_dict)
    try:
        res = train_full(GameSpec.parse(*game), params, seed, out_dir, ArchConfig(**arch))
        ckpt = str(Path(out_dir) / "best.ckpt") if out_dir else None
        final_loss = res.reports[-1].losses[-1].total
        out = RunResult(run_name, params, seed, ckpt, StageTimings.from_reports(res.reports), final_loss,
                        parallelism=parallelism)
    except Exception as exc:  # a failed run is recorded, the sweep carries on
        logger.exception("run %s seed %d failed", run_name, seed)
        out = RunResult(run_name, params, seed, None, StageTimings(), float("nan"), status="failed",
                        error=f"{type(exc).__name__}: {exc}", parallelism=parallelism)
    return out.to_dict()


RESULT_COLUMNS = ["run_id", "setting", "seed", *HyperParams.SWEEPABLE, "arena_enabled", "selfplay_s",
                  "training_s", "arena_s", "total_s", "final_loss", "elo", "status", "parallelism", "checkpoint"]


def write_results_csv(path, results: Sequence[RunResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in results:
            t = r.timings
            w.writerow([r.run_id, r.run_name, r.seed, *(getattr(r.params, k) for k in HyperParams.SWEEPABLE),
                        r.params.arena_enabled, f"{t.selfplay_total:.6f}", f"{t.training_total:.6f}",
                        f"{t.arena_total:.6f}", f"{t.total:.6f}", f"{r.final_loss:.6f}",
                        "" if r.elo is None else f"{r.elo:.2f}", r.status, r.parallelism, r.checkpoint or ""])


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class Sweep:
    """A plan bound to an output directory with a resumable JSON manifest."""

    MANIFEST = "sweep.json"
    RESULTS = "results.csv"

    def __init__(self, plan: SweepPlan, spec: GameSpec, out_dir, arch: ArchConfig = ArchConfig()):
        self.plan = plan
        self.spec = spec
        self.out = Path(out_dir)
        self.arch = arch

    @property
    def manifest_path(self) -> Path:
        return self.out / self.MANIFEST

    def load_manifest(self) -> dict:
        if self.manifest_path.exists():
            m = json.loads(self.manifest_path.read_text())
            if m["plan"] != self.plan.to_dict() or m["game"] != self.spec.name:
                raise ValueError(f"{self.manifest_path} belongs to a different sweep")
            return m
        runs = {}
        for setting, seed in self.plan.runs():
            rid = run_id(setting.run_name, seed)
            runs[rid] = {"setting": setting.run_name, "seed": seed, "params": setting.params.to_dict(),
                         "dir": str(Path("runs") / _safe_dirname(rid)), "status": "pending", "result": None}
        return {"game": self.spec.name, "plan": self.plan.to_dict(), "runs": runs}

    def save_manifest(self, m: dict) -> None:
        tmp = self.manifest_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(m, indent=2, sort_keys=True))
        os.replace(tmp, self.manifest_path)

    def execute(self, parallelism: int = 1) -> list[RunResult]:
        """Run every pending (setting, seed) pair; completed runs are skipped."""
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = self.load_manifest()
        self.save_manifest(manifest)
        pending = [rid for rid, r in manifest["runs"].items() if r["status"] != "done"]
        logger.info("sweep %s: %d runs, %d pending", self.out, len(manifest["runs"]), len(pending))
        jobs = {rid: (manifest["runs"][rid]["setting"], manifest["runs"][rid]["params"], manifest["runs"][rid]["seed"],
                      (self.spec.kind.value, self.spec.size), str(self.out / manifest["runs"][rid]["dir"]), dataclasses.asdict(self.arch),
                      parallelism) for rid in pending}

        def record(rid, result):
            entry = manifest["runs"][rid]
            entry["status"] = result["status"]
            entry["result"] = result
            self.save_manifest(manifest)
            self._write_results(manifest)

        if parallelism == 1:
            for rid, args in jobs.items():
                record(rid, _run_one(*args))
        else:
            with ProcessPoolExecutor(max_workers=parallelism) as pool:
                futures = {pool.submit(_run_one, *args): rid for rid, args in jobs.items()}
                for fut in as_completed(futures):
                    record(futures[fut], fut.result())
        self._write_results(manifest)
        return self.results(manifest)

    def results(self, manifest: dict | None = None) -> list[RunResult]:
        manifest = manifest or self.load_manifest()
        return [RunResult.from_dict(r["result"]) for r in manifest["runs"].values() if r["result"] is not None]

    def _write_results(self, manifest: dict) -> None:
        write_results_csv(self.out / self.RESULTS, self.results(manifest))


def execute(plan: SweepPlan, spec: GameSpec, parallelism: int = 1, out_dir=None,
            arch: ArchConfig = ArchConfig()) -> list[RunResult]:
    """Run a plan. Without ``out_dir`` runs happen in memory and nothing is persisted."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if out_dir is not None:
        return Sweep(plan, spec, out_dir, arch).execute(parallelism)
    return [RunResult.from_dict(_run_one(s.run_name, s.params.to_dict(), seed, (spec.kind.value, spec.size), None,
                                         dataclasses.asdict(arch), parallelism))
            for s, seed in plan.runs()]


# ---------------------------------------------------------------------------
# analysis


def pareto_mask(points: Sequence[tuple[float, float]]) -> list[bool]:
    """True for every (time, elo) point not dominated by another.

    A point dominates another if its time is no larger and its Elo no
    smaller, with at least one strict inequality.
    """
    order = sorted(range(len(points)), key=lambda i: (points[i][0], -points[i][1]))
    keep = [False] * len(points)
    best = -np.inf
    for _, group in itertools.groupby(order, key=lambda i: points[i][0]):
        group = list(group)
        top = points[group[0]][1]
        if top > best:
            for i in group:
                if points[i][1] == top:
                    keep[i] = True
            best = top
    return keep


def pareto_front(points: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Non-dominated (time, elo) points sorted by time ascending."""
    points = [tuple(p) for p in points]
    return sorted((p for p, k in zip(points, pareto_mask(points)) if k), key=lambda p: (p[0], -p[1]))


@dataclass
class TimeRow:
    parameter: str
    values: list
    mean_times: list[float]
    ratio: float
    classification: str


def time_report(results: Sequence[RunResult], base: HyperParams | None = None, axes=None,
                ratio: float = SENSITIVITY_RATIO) -> list[TimeRow]:
    """Mean total run time per value of each one-factor axis.

    A parameter is time-sensitive when the slower of its minimum and maximum
    settings takes more than ``ratio`` times as long as the faster one.
    """
    done = [r for r in results if r.status == "done"]
    if base is None:
        base = next((r.params for r in done if r.run_name == "default"), None)
        if base is None:
            raise ValueError("no default run found; pass base explicitly")
    if axes is None:
        axes = []
        for name in HyperParams.SWEEPABLE:
            vals = sorted({getattr(r.params, name) for r in done if _differs_only_in(r.params, base, name)})
            if len(vals) > 1:
                axes.append((name, vals))
    rows = []
    for name, values in axes:
        times = []
        for v in values:
            target = base.replace(**{name: v})
            ts = [r.timings.total for r in done if r.params == target]
            times.append(float(np.mean(ts)) if ts else float("nan"))
        lo, hi = times[0], times[-1]
        if np.isnan(lo) or np.isnan(hi):
            r_ = float("nan")
        else:
            r_ = max(lo, hi) / min(lo, hi) if min(lo, hi) > 0 else (1.0 if lo == hi else float("inf"))
        cls = "time-sensitive" if r_ > ratio else "time-friendly"
        rows.append(TimeRow(name, list(values), times, r_, cls))
    return rows


def _differs_only_in(p: HyperParams, base: HyperParams, name: str) -> bool:
    a, b = p.to_dict(), base.to_dict()
    return all(a[k] == b[k] for k in a if k != name)
