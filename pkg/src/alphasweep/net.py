"""Policy-value network written directly in numpy.

Architecture: four 3x3 "same" convolutions (batch norm + ReLU each), a hidden
fully connected layer with ReLU and dropout, then a policy head (softmax) and
a value head (tanh). Activations are NHWC internally; public inputs use the
``(3, size, size)`` planes produced by :func:`alphasweep.games.encode`.

Weights are float32. Anything can be run in float64 by casting the arrays,
which is what :func:`gradient_check` does.
"""

from __future__ import annotations

import json
import math
import os
import re
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .games import GameSpec

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
PROB_FLOOR = 1e-12
_LOG_FLOOR = math.log(PROB_FLOOR)


class ShapeMismatchError(ValueError):
    """Input or weight shapes do not fit the game/architecture."""


class TrainingDivergedError(FloatingPointError):
    """A minibatch produced a non-finite loss."""


@dataclass(frozen=True)
class ArchConfig:
    channels: int = 64
    hidden: int = 256
    conv_layers: int = 4


@dataclass(frozen=True)
class LossTarget:
    """Which combination of policy loss and value loss is minimised.

    ``kind`` is one of ``policy_only``, ``value_only``, ``sum``, ``product``,
    ``weighted``; ``lam`` is only read by ``weighted``.
    """

    kind: str = "sum"
    lam: float = 0.5

    KINDS = ("policy_only", "value_only", "sum", "product", "weighted")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown loss target {self.kind!r}; expected one of {self.KINDS}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    @classmethod
    def parse(cls, text: str, lam: float | None = None) -> "LossTarget":
        """Accepts ``sum``, ``product``, ``policy_only``, ``value_only``,
        ``weighted`` and ``weighted(0.3)``."""
        text = text.strip().lower()
        m = re.fullmatch(r"weighted\(\s*([0-9.eE+-]+)\s*\)", text)
        if m:
            return cls("weighted", float(m.group(1)))
        if text == "weighted":
            return cls("weighted", 0.5 if lam is None else float(lam))
        return cls(text)

    @property
    def name(self) -> str:
        return f"weighted({self.lam:g})" if self.kind == "weighted" else self.kind

    def combine(self, lp: float, lv: float) -> tuple[float, float, float]:
        """Return ``(total, d total/d lp, d total/d lv)``."""
        if self.kind == "policy_only":
            return lp, 1.0, 0.0
        if self.kind == "value_only":
            return lv, 0.0, 1.0
        if self.kind == "sum":
            return lp + lv, 1.0, 1.0
        if self.kind == "product":
            return lp * lv, lv, lp
        lam = self.lam
        return lam * lp + (1.0 - lam) * lv, lam, 1.0 - lam


@dataclass(frozen=True)
class TrainConfig:
    ep: int = 10
    bs: int = 64
    lr: float = 0.005
    d: float = 0.3

    def __post_init__(self):
        if self.ep < 1 or self.bs < 1:
            raise ValueError("ep and bs must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not 0.0 <= self.d < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class TrainingExample:
    state: np.ndarray          # encoded planes (3, size, size)
    pi: np.ndarray             # search policy over the action space
    z: float                   # outcome for the side to move at ``state``
    iteration: int = 0


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    policy: float
    value: float


@dataclass
class NetOutput:
    policy: np.ndarray
    value: np.ndarray | float
    logits: np.ndarray
    value_pre: np.ndarray | float


@dataclass
class NetworkWeights:
    """Named arrays of one network, plus the game it was built for."""

    spec: GameSpec
    arch: ArchConfig
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def is_buffer(name: str) -> bool:
        return name.endswith(".running_mean") or name.endswith(".running_var")

    def trainable(self) -> list[str]:
        return [k for k in self.arrays if not self.is_buffer(k)]

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(self.spec, self.arch, {k: v.copy() for k, v in self.arrays.items()})

    def astype(self, dtype) -> "NetworkWeights":
        return NetworkWeights(self.spec, self.arch,
                              {k: v.astype(dtype) for k, v in self.arrays.items()})

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def num_parameters(self) -> int:
        return sum(self.arrays[k].size for k in self.trainable())


def expected_shapes(spec: GameSpec, arch: ArchConfig) -> dict[str, tuple[int, ...]]:
    n, c = spec.size, arch.channels
    shapes: dict[str, tuple[int, ...]] = {}
    cin = 3
    for i in range(arch.conv_layers):
        shapes[f"conv{i}.weight"] = (3, 3, cin, c)
        shapes[f"bn{i}.gamma"] = (c,)
        shapes[f"bn{i}.beta"] = (c,)
        shapes[f"bn{i}.running_mean"] = (c,)
        shapes[f"bn{i}.running_var"] = (c,)
        cin = c
    shapes["fc.weight"] = (n * n * c, arch.hidden)
    shapes["fc.bias"] = (arch.hidden,)
    shapes["policy.weight"] = (arch.hidden, spec.action_space_size)
    shapes["policy.bias"] = (spec.action_space_size,)
    shapes["value.weight"] = (arch.hidden, 1)
    shapes["value.bias"] = (1,)
    return shapes


def init_weights(spec: GameSpec, arch: ArchConfig = ArchConfig(), seed=0) -> NetworkWeights:
    """He-normal init for conv/fc layers, unit batch-norm scale.

    The policy and value projections start at zero, so an untrained network
    gives uniform priors and a value of 0 rather than confident noise.
    """
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in expected_shapes(spec, arch).items():
        if name.endswith(".weight") and not name.startswith(("policy.", "value.")):
            fan_in = int(np.prod(shape[:-1]))
            arr = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
        elif name.endswith(".gamma") or name.endswith(".running_var"):
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        arrays[name] = arr.astype(np.float32)
    return NetworkWeights(spec, arch, arrays)


def zero_weights(spec: GameSpec, arch: ArchConfig = ArchConfig()) -> NetworkWeights:
    """All-zero parameters: uniform policy and zero value for every input.

    Running variances stay at one so batch norm remains well defined.
    """
    arrays = {name: (np.ones(shape) if name.endswith(".running_var") else np.zeros(shape)).astype(np.float32)
              for name, shape in expected_shapes(spec, arch).items()}
    return NetworkWeights(spec, arch, arrays)


def check_compatible(weights: NetworkWeights, spec: GameSpec) -> None:
    if weights.spec != spec:
        raise ShapeMismatchError(f"weights were built for {weights.spec.name}, not {spec.name}")
    want = expected_shapes(spec, weights.arch)
    if set(want) != set(weights.arrays):
        raise ShapeMismatchError("weight names do not match the architecture")
    for name, shape in want.items():
        if weights.arrays[name].shape != shape:
            raise ShapeMismatchError(f"{name}: shape {weights.arrays[name].shape} != {shape}")


# ---------------------------------------------------------------------------
# layers


def _im2col(x: np.ndarray) -> np.ndarray:
    n, h, w, c = x.shape
    xp = np.zeros((n, h + 2, w + 2, c), dtype=x.dtype)
    xp[:, 1:-1, 1:-1, :] = x
    cols = np.empty((n, h, w, 9, c), dtype=x.dtype)
    for i in range(3):
        for j in range(3):
            cols[:, :, :, i * 3 + j, :] = xp[:, i:i + h, j:j + w, :]
    return cols.reshape(n * h * w, 9 * c)


def _col2im(dcols: np.ndarray, shape) -> np.ndarray:
    n, h, w, c = shape
    dcols = dcols.reshape(n, h, w, 9, c)
    dxp = np.zeros((n, h + 2, w + 2, c), dtype=dcols.dtype)
    for i in range(3):
        for j in range(3):
            dxp[:, i:i + h, j:j + w, :] += dcols[:, :, :, i * 3 + j, :]
    return dxp[:, 1:-1, 1:-1, :]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits, mask=None) -> np.ndarray:
    """Softmax over the last axis; entries where ``mask`` is False get probability 0."""
    logits = np.asarray(logits, dtype=np.float64)
    if mask is not None:
        logits = np.where(mask, logits, -np.inf)
    return _softmax(logits)


def _as_batch(weights: NetworkWeights, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    single = x.ndim == 3
    if single:
        x = x[None]
    want = weights.spec.input_shape
    if x.ndim != 4 or x.shape[1:] != want:
        raise ShapeMismatchError(f"input shape {x.shape} does not match (N, {want[0]}, {want[1]}, {want[2]})")
    dtype = weights.arrays["fc.weight"].dtype
    return np.ascontiguousarray(x.transpose(0, 2, 3, 1), dtype=dtype), single


def _forward(arrays, x, *, train: bool, dropout: float, rng, keep_cache: bool, relu_masks=None):
    """Forward pass on an NHWC batch. Returns logits, pre-tanh value, cache, batch stats.

    ``relu_masks`` (list, one per ReLU) replaces each ``pre > 0`` test with a
    fixed on/off pattern.
    """
    cache: dict = {}
    stats = {}
    h = x
    i = 0
    while f"conv{i}.weight" in arrays:
        wk = arrays[f"conv{i}.weight"]
        n, hh, ww, c = h.shape
        cols = _im2col(h)
        out = (cols @ wk.reshape(-1, wk.shape[-1])).reshape(n, hh, ww, -1)
        gamma, beta = arrays[f"bn{i}.gamma"], arrays[f"bn{i}.beta"]
        if train:
            mean = out.mean(axis=(0, 1, 2))
            var = out.var(axis=(0, 1, 2))
            stats[i] = (mean, var, out.shape[0] * hh * ww)
        else:
            mean, var = arrays[f"bn{i}.running_mean"], arrays[f"bn{i}.running_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (out - mean) * inv_std
        pre = xhat * gamma + beta
        on = pre > 0 if relu_masks is None else relu_masks[i]
        act = pre * on
        if keep_cache:
            cache[f"conv{i}"] = (cols, h.shape, xhat, inv_std, on)
        h = act
        i += 1
    flat = h.reshape(h.shape[0], -1)
    hid_pre = flat @ arrays["fc.weight"] + arrays["fc.bias"]
    hid_on = hid_pre > 0 if relu_masks is None else relu_masks[-1]
    hid = hid_pre * hid_on
    drop_mask = None
    if train and dropout > 0.0:
        keep = 1.0 - dropout
        drop_mask = (rng.random(hid.shape) < keep).astype(hid.dtype) / keep
        hid = hid * drop_mask
    logits = hid @ arrays["policy.weight"] + arrays["policy.bias"]
    vpre = (hid @ arrays["value.weight"] + arrays["value.bias"])[:, 0]
    if keep_cache:
        cache["fc"] = (flat, hid_on, drop_mask, hid, h.shape)
    return logits, vpre, cache, stats


def forward(weights: NetworkWeights, x, mode: str = "eval", rng=None, dropout: float = 0.0) -> NetOutput:
    """Evaluate the network on one encoded state ``(3, n, n)`` or a batch ``(N, 3, n, n)``.

    ``mode="train"`` uses batch statistics and applies dropout with
    probability ``dropout``; ``mode="eval"`` is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    xb, single = _as_batch(weights, x)
    rng = np.random.default_rng(rng)
    logits, vpre, _, _ = _forward(weights.arrays, xb, train=mode == "train", dropout=dropout,
                                  rng=rng, keep_cache=False)
    policy = _softmax(logits.astype(np.float64))
    value = np.tanh(vpre)
    if single:
        return NetOutput(policy[0], float(value[0]), logits[0], float(vpre[0]))
    return NetOutput(policy, value, logits, vpre)


def predict(weights: NetworkWeights, encoded: np.ndarray, mask: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Eval-mode ``(priors, value)`` for a single state, priors restricted to ``mask``."""
    xb, _ = _as_batch(weights, encoded)
    logits, vpre, _, _ = _forward(weights.arrays, xb, train=False, dropout=0.0, rng=None, keep_cache=False)
    return softmax(logits[0], mask), float(np.tanh(vpre[0]))


# ---------------------------------------------------------------------------
# losses


def _validate_targets(pi: np.ndarray, z: np.ndarray) -> None:
    if np.any(pi < -1e-12):
        raise ValueError("target policy has negative entries")
    sums = pi.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError(f"target policy is not normalised (sums {sums.min():.6g}..{sums.max():.6g})")
    if np.any(np.abs(z) > 1.0 + 1e-12):
        raise ValueError("target outcome outside [-1, 1]")


def _policy_terms(logits, pi):
    """Per-example cross entropy with the probability floor, and its gradient wrt logits."""
    ls = _log_softmax(logits)
    live = ls > _LOG_FLOOR
    logp = np.where(live, ls, _LOG_FLOOR)
    lp = -(pi * logp).sum(axis=-1)
    g = -pi * live
    p = np.exp(ls)
    dlogits = g - p * g.sum(axis=-1, keepdims=True)
    return lp, dlogits


def loss(logits, value, target_pi, target_z, target: LossTarget) -> LossBreakdown:
    """Training loss for network logits and (post-tanh) value against ``(pi, z)``.

    Accepts a single example or a batch; per-example policy and value losses
    are averaged over the batch before being combined per ``target``.
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    v = np.atleast_1d(np.asarray(value, dtype=np.float64))
    pi = np.atleast_2d(np.asarray(target_pi, dtype=np.float64))
    z = np.atleast_1d(np.asarray(target_z, dtype=np.float64))
    _validate_targets(pi, z)
    lp, _ = _policy_terms(logits, pi)
    lv = (v - z) ** 2
    lp_m, lv_m = float(lp.mean()), float(lv.mean())
    total, _, _ = target.combine(lp_m, lv_m)
    return LossBreakdown(total, lp_m, lv_m)


def loss_and_grads(weights: NetworkWeights, x, pi, z, target: LossTarget, *, mode: str = "train",
                   dropout: float = 0.0, rng=None):
    """Loss breakdown, gradients of every trainable array, and batch-norm batch statistics."""
    arrays = weights.arrays
    xb, _ = _as_batch(weights, x)
    dtype = xb.dtype
    pi = np.atleast_2d(np.asarray(pi, dtype=dtype))
    z = np.atleast_1d(np.asarray(z, dtype=dtype))
    _validate_targets(pi, z)
    nb = xb.shape[0]
    train = mode == "train"
    logits, vpre, cache, stats = _forward(arrays, xb, train=train, dropout=dropout,
                                          rng=np.random.default_rng(rng), keep_cache=True)
    lp, dlogits = _policy_terms(logits, pi)
    v = np.tanh(vpre)
    lv = (v - z) ** 2
    lp_m, lv_m = float(lp.mean()), float(lv.mean())
    total, a, b = target.combine(lp_m, lv_m)
    dlogits = dlogits * (a / nb)
    dvpre = (b / nb) * 2.0 * (v - z) * (1.0 - v * v)

    grads: dict[str, np.ndarray] = {}
    flat, hid_on, drop_mask, hid, hshape = cache["fc"]
    grads["policy.weight"] = hid.T @ dlogits
    grads["policy.bias"] = dlogits.sum(axis=0)
    grads["value.weight"] = hid.T @ dvpre[:, None]
    grads["value.bias"] = np.array([dvpre.sum()], dtype=dtype)
    dhid = dlogits @ arrays["policy.weight"].T + dvpre[:, None] @ arrays["value.weight"].T
    if drop_mask is not None:
        dhid = dhid * drop_mask
    dhid = dhid * hid_on
    grads["fc.weight"] = flat.T @ dhid
    grads["fc.bias"] = dhid.sum(axis=0)
    dh = (dhid @ arrays["fc.weight"].T).reshape(hshape)

    layers = sorted(int(k[4:]) for k in cache if k.startswith("conv"))
    for i in reversed(layers):
        cols, in_shape, xhat, inv_std, relu_on = cache[f"conv{i}"]
        gamma = arrays[f"bn{i}.gamma"]
        dpre = dh * relu_on
        grads[f"bn{i}.gamma"] = (dpre * xhat).sum(axis=(0, 1, 2))
        grads[f"bn{i}.beta"] = dpre.sum(axis=(0, 1, 2))
        dxhat = dpre * gamma
        if train:
            count = dxhat.shape[0] * dxhat.shape[1] * dxhat.shape[2]
            dout = (inv_std / count) * (count * dxhat - dxhat.sum(axis=(0, 1, 2))
                                        - xhat * (dxhat * xhat).sum(axis=(0, 1, 2)))
        else:
            dout = dxhat * inv_std
        dflat = dout.reshape(-1, dout.shape[-1])
        wk = arrays[f"conv{i}.weight"]
        grads[f"conv{i}.weight"] = (cols.T @ dflat).reshape(wk.shape)
        if i > 0:
            dh = _col2im(dflat @ wk.reshape(-1, wk.shape[-1]).T, in_shape)
    return LossBreakdown(total, lp_m, lv_m), grads, stats


# ---------------------------------------------------------------------------
# optimisation


class Adam:
    """Adaptive moment estimation over a dict of arrays (updated in place)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            p = params[name]
            g = g.astype(p.dtype, copy=False)
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


def _update_running_stats(arrays, stats) -> None:
    for i, (mean, var, count) in stats.items():
        unbiased = var * count / max(count - 1, 1)
        rm, rv = arrays[f"bn{i}.running_mean"], arrays[f"bn{i}.running_var"]
        rm *= 1.0 - BN_MOMENTUM
        rm += (BN_MOMENTUM * mean).astype(rm.dtype)
        rv *= 1.0 - BN_MOMENTUM
        rv += (BN_MOMENTUM * unbiased).astype(rv.dtype)


def stack_examples(examples: Sequence[TrainingExample]):
    x = np.stack([e.state for e in examples]).astype(np.float32)
    pi = np.stack([e.pi for e in examples]).astype(np.float64)
    z = np.array([e.z for e in examples], dtype=np.float64)
    return x, pi, z


def train_epochs(weights: NetworkWeights, examples: Sequence[TrainingExample], config: TrainConfig,
                 target: LossTarget, rng=None) -> tuple[NetworkWeights, list[LossBreakdown]]:
    """Train a copy of ``weights`` for ``config.ep`` shuffled epochs.

    Returns the new weights and one mean-over-minibatches loss record per
    epoch. The input weights are left untouched.
    """
    if len(examples) == 0:
        raise ValueError("no training examples")
    rng = np.random.default_rng(rng)
    new = weights.copy()
    x, pi, z = stack_examples(examples)
    opt = Adam(config.lr)
    trainable = new.trainable()
    trace = []
    count = len(examples)
    for epoch in range(config.ep):
        order = rng.permutation(count)
        totals = []
        for start in range(0, count, config.bs):
            idx = order[start:start + config.bs]
            parts, grads, stats = loss_and_grads(new, x[idx], pi[idx], z[idx], target, mode="train",
                                                 dropout=config.d, rng=rng)
            if not math.isfinite(parts.total):
                raise TrainingDivergedError(
                    f"non-finite loss in epoch {epoch}, batch starting at {start}: {parts}")
            opt.step(new.arrays, {k: grads[k] for k in trainable})
            _update_running_stats(new.arrays, stats)
            totals.append((parts.total, parts.policy, parts.value))
        mean = np.mean(totals, axis=0)
        trace.append(LossBreakdown(float(mean[0]), float(mean[1]), float(mean[2])))
    if not new.all_finite():
        raise TrainingDivergedError("weights became non-finite during training")
    return new, trace


def evaluate_loss(weights: NetworkWeights, examples: Sequence[TrainingExample], target: LossTarget) -> LossBreakdown:
    """Eval-mode loss over a set of examples (no dropout, running statistics)."""
    x, pi, z = stack_examples(examples)
    out = forward(weights, x, mode="eval")
    return loss(out.logits, out.value, pi, z, target)


def _relu_pattern(weights, x, mode):
    _, _, cache, _ = _forward(weights.arrays, x, train=mode == "train", dropout=0.0, rng=None, keep_cache=True)
    layers = sorted(int(k[4:]) for k in cache if k.startswith("conv"))
    return [cache[f"conv{i}"][4] for i in layers] + [cache["fc"][1]]


def _total_loss(weights, x, pi, z, target, mode, relu_masks):
    logits, vpre, _, _ = _forward(weights.arrays, x, train=mode == "train", dropout=0.0, rng=None,
                                  keep_cache=False, relu_masks=relu_masks)
    lp, _ = _policy_terms(logits, pi)
    lv = (np.tanh(vpre) - z) ** 2
    return target.combine(float(lp.mean()), float(lv.mean()))[0]


def gradient_check(weights: NetworkWeights, example, target: LossTarget, epsilon: float = 1e-4,
                   num_samples: int = 256, mode: str = "eval", seed=0) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Runs in float64 with dropout disabled. ``example`` is a TrainingExample or
    a list of them (a batch). ``num_samples`` trainable scalars are drawn
    round-robin over the arrays. The ReLU on/off pattern is frozen at the
    unperturbed point while differencing: a +/- epsilon step routinely moves
    some of the tens of thousands of units across zero, and the analytic
    gradient is by definition that of the active linear piece. Relative error
    is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    examples = [example] if isinstance(example, TrainingExample) else list(example)
    x, pi, z = stack_examples(examples)
    w = weights.astype(np.float64)
    xb, _ = _as_batch(w, x.astype(np.float64))
    _, grads, _ = loss_and_grads(w, x.astype(np.float64), pi, z, target, mode=mode)
    masks = _relu_pattern(w, xb, mode)
    rng = np.random.default_rng(seed)
    names = w.trainable()
    worst = 0.0
    for i in range(num_samples):
        name = names[i % len(names)]
        arr = w.arrays[name]
        idx = np.unravel_index(int(rng.integers(arr.size)), arr.shape)
        old = arr[idx]
        arr[idx] = old + epsilon
        f_plus = _total_loss(w, xb, pi, z, target, mode, masks)
        arr[idx] = old - epsilon
        f_minus = _total_loss(w, xb, pi, z, target, mode, masks)
        arr[idx] = old
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        analytic = float(grads[name][idx])
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return worst


# ---------------------------------------------------------------------------
# checkpoints
#
# Layout (all integers little-endian):
#   magic     4 bytes  b"AZSW"
#   version   uint32   CHECKPOINT_VERSION
#   hlen      uint32   length of the JSON header
#   header    hlen bytes UTF-8 JSON: game, size, arch, arrays=[{name, shape}], metadata
#   payload   the arrays in header order, each as little-endian float32, C order
#   trailer   uint64   payload byte count (guards against truncation)

CHECKPOINT_MAGIC = b"AZSW"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError, ShapeMismatchError):
    pass


def save_checkpoint(weights: NetworkWeights, metadata: dict | None = None) -> bytes:
    manifest = [{"name": k, "shape": list(v.shape)} for k, v in weights.arrays.items()]
    header = {
        "game": weights.spec.kind.value,
        "size": weights.spec.size,
        "arch": {"channels": weights.arch.channels, "hidden": weights.arch.hidden,
                 "conv_layers": weights.arch.conv_layers},
        "arrays": manifest,
        "metadata": metadata or {},
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(v, dtype="<f4").tobytes() for v in weights.arrays.values())
    return (CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(hbytes)) + hbytes
            + payload + struct.pack("<Q", len(payload)))


def load_checkpoint(data: bytes, expected_spec: GameSpec | None = None) -> tuple[NetworkWeights, dict]:
    """Inverse of :func:`save_checkpoint`; optionally checks the game matches ``expected_spec``."""
    if len(data) < 12 or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointCorruptError("not a checkpoint (bad magic or too short)")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, expected {CHECKPOINT_VERSION}")
    if len(data) < 12 + hlen + 8:
        raise CheckpointCorruptError("checkpoint truncated inside header")
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"unreadable checkpoint header: {exc}") from None
    spec = GameSpec(header["game"], header["size"])
    arch = ArchConfig(**header["arch"])
    payload = data[12 + hlen:-8]
    (declared,) = struct.unpack("<Q", data[-8:])
    need = sum(4 * int(np.prod(a["shape"], dtype=np.int64)) for a in header["arrays"])
    if declared != need or len(payload) != need:
        raise CheckpointCorruptError(f"checkpoint payload is {len(payload)} bytes, expected {need}")
    arrays = {}
    offset = 0
    for a in header["arrays"]:
        shape = tuple(a["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arrays[a["name"]] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).astype(np.float32).reshape(shape)
        offset += 4 * count
    weights = NetworkWeights(spec, arch, arrays)
    try:
        check_compatible(weights, spec)
        if expected_spec is not None:
            check_compatible(weights, expected_spec)
    except ShapeMismatchError as exc:
        raise CheckpointShapeError(str(exc)) from None
    return weights, header["metadata"]


def load_checkpoint_file(path, expected_spec: GameSpec | None = None):
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read(), expected_spec)


def write_checkpoint_file(path, weights: NetworkWeights, metadata: dict | None = None) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(save_checkpoint(weights, metadata))
    os.replace(tmp, path)
