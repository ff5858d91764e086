"""Warm-up imitation of WalkSAT followed by REINFORCE on a training set."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .cnf import CnfFormula
from .engine import SlsConfig, WalkSAT, run_sls, walksat_pickvar
from .evaluator import EvalConfig, evaluate
from .optim import AdamW, one_cycle_lr
from .policy import N_THETA, PolicyParams, PolicyPicker, extract_features, stack_steps, weighted_grad
from .rng import derive_seed, shuffle, substream

log = logging.getLogger(__name__)

WARMUP_STREAM = 21
EPISODE_STREAM = 22
SHUFFLE_STREAM = 23
VAL_STREAM = 24


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    warmup_epochs: int = 5
    gamma: float = 0.5
    batch_size: int = 32
    max_flips_train: int = 10_000
    lr_max: float = 1e-2
    weight_decay: float = 1e-4
    seed: int = 0
    noise_variant: str = "constant"
    p_init: float = 0.25
    warmup_lr: float = 0.1
    warmup_batch: int = 512
    warmup_noise: float = 0.5
    baseline: bool = False
    val_max_tries: int = 10
    val_max_flips: int = 10_000
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.epochs < 0 or self.warmup_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.batch_size < 1 or self.max_flips_train < 1:
            raise ValueError("batch_size and max_flips_train must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# warm-up
# ---------------------------------------------------------------------------

class _Teacher:
    """WalkSAT picker that logs (features, least-break mask) at greedy steps."""

    def __init__(self, p: float):
        self.p = p
        self.samples: list[tuple[list, list]] = []

    def __call__(self, s, c, rng, record=False):
        vs = s.clause_vars[c]
        feats = [extract_features(s, v) for v in vs]
        v, greedy = walksat_pickvar(s, c, self.p, rng)
        if greedy:
            breaks = [s.break_value(u) for u in vs]
            low = min(breaks)
            self.samples.append((feats, [b == low for b in breaks]))
        return v, greedy, None


def imitation_grad(theta: np.ndarray, feats: np.ndarray, target: np.ndarray, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy between softmax scores and the target rows, with its gradient."""
    phi = np.concatenate([np.ones(feats.shape[:2] + (1,)), feats], axis=2)
    scores = np.where(mask, phi @ theta, -np.inf)
    scores -= scores.max(axis=1, keepdims=True)
    logz = np.log(np.exp(scores).sum(axis=1, keepdims=True))
    logp = np.where(mask, scores - logz, 0.0)
    loss = -(target * logp).sum(axis=1).mean()
    soft = np.exp(logp) * mask
    grad = np.einsum("tk,tkj->j", soft - target, phi) / len(feats)
    return float(loss), grad


def fit_imitation(theta, opt: AdamW, feats, target, mask, lr: float, batch: int, rng) -> tuple[np.ndarray, float]:
    """One shuffled pass of minibatch steps on the imitation log-loss; returns theta and mean loss."""
    order = rng.permutation(len(feats))
    total = 0.0
    nb = 0
    for start in range(0, len(order), batch):
        sel = order[start:start + batch]
        loss, grad = imitation_grad(theta, feats[sel], target[sel], mask[sel])
        theta = opt.step(theta, grad, lr)
        total += loss
        nb += 1
    return theta, total / max(nb, 1)


def _pack_samples(samples):
    K = max(len(f) for f, _ in samples)
    T = len(samples)
    feats = np.zeros((T, K, 5))
    target = np.zeros((T, K))
    mask = np.zeros((T, K), dtype=bool)
    for t, (f, low) in enumerate(samples):
        k = len(f)
        feats[t, :k] = f
        mask[t, :k] = True
        target[t, :k] = np.asarray(low, dtype=float) / sum(low)
    return feats, target, mask


def warmup(train: Sequence[CnfFormula], config: TrainConfig, params: Optional[PolicyParams] = None) -> tuple[PolicyParams, list[float]]:
    """Fit the scoring weights to imitate WalkSAT's least-break choice.

    Each pass runs one WalkSAT episode per training formula, collects its
    greedy decisions and takes one sweep of Adam steps on the log-loss.
    Noise weights are left untouched.  Returns the params and the mean
    loss per pass.
    """
    if not train:
        raise ValueError("warm-up needs training formulas")
    if params is None:
        params = PolicyParams.initial(config.noise_variant, config.p_init)
    if config.warmup_epochs == 0:
        return params, []
    theta = np.asarray(params.theta)
    opt = AdamW(N_THETA, weight_decay=0.0, maximize=False)
    losses = []
    for epoch in range(config.warmup_epochs):
        teacher = _Teacher(config.warmup_noise)
        for i, f in enumerate(train):
            cfg = SlsConfig(config.max_flips_train, 1, derive_seed(config.seed, WARMUP_STREAM, epoch, i))
            run_sls(f, cfg, teacher)
        if not teacher.samples:
            losses.append(0.0)
            continue
        feats, target, mask = _pack_samples(teacher.samples)
        rng = np.random.default_rng(derive_seed(config.seed, WARMUP_STREAM, epoch))
        theta, loss = fit_imitation(theta, opt, feats, target, mask, config.warmup_lr, config.warmup_batch, rng)
        losses.append(loss)
        log.info("warm-up %d: loss %.4f over %d samples", epoch + 1, losses[-1], len(feats))
    return PolicyParams(tuple(theta), params.w, params.variant, params.meta), losses


# ---------------------------------------------------------------------------
# REINFORCE
# ---------------------------------------------------------------------------

@dataclass
class EpisodeRecord:
    steps: list
    reward: float

    @property
    def length(self) -> int:
        return len(self.steps)


def run_episode(formula: CnfFormula, params: PolicyParams, max_flips_train: int, seed: int) -> EpisodeRecord:
    out = run_sls(formula, SlsConfig(max_flips_train, 1, seed), PolicyPicker(params), trace=True)
    return EpisodeRecord(out.trace, 1.0 if out.solved else 0.0)


def discount_weights(T: int, gamma: float) -> np.ndarray:
    """gamma ** (T - 1 - t): the last action gets weight 1."""
    return gamma ** np.arange(T - 1, -1, -1, dtype=float)


def episode_grad(ep: EpisodeRecord, params: PolicyParams, gamma: float, advantage: Optional[float] = None) -> np.ndarray:
    """sum_t gamma^(T-1-t) * r * grad log pi(a_t | s_t) for one episode."""
    r = ep.reward if advantage is None else advantage
    if r == 0.0 or not ep.steps:
        return np.zeros(N_THETA + params.n_noise)
    feats, mask, delta, action = stack_steps(ep.steps)
    return weighted_grad(params, feats, mask, delta, action, r * discount_weights(ep.length, gamma))


def batch_grad(batch: Sequence[EpisodeRecord], params: PolicyParams, gamma: float, baseline: bool = False) -> np.ndarray:
    if not batch:
        raise ValueError("empty batch")
    b = float(np.mean([ep.reward for ep in batch])) if baseline else None
    g = np.zeros(N_THETA + params.n_noise)
    for ep in batch:
        g += episode_grad(ep, params, gamma, None if b is None else ep.reward - b)
    return g


def reinforce_update(batch: Sequence[EpisodeRecord], params: PolicyParams, opt: AdamW, lr: float,
                     gamma: float, baseline: bool = False) -> PolicyParams:
    """One ascent step on the summed discounted log-likelihood gradient of a batch."""
    return _ascend(params, batch_grad(batch, params, gamma, baseline), opt, lr)


def _ascend(params: PolicyParams, g: np.ndarray, opt: AdamW, lr: float) -> PolicyParams:
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient(f"non-finite policy gradient {g.tolist()} at params {params.vector().tolist()}")
    return params.with_vector(opt.step(params.vector(), g, lr))


@dataclass
class TrainReport:
    val_mflips: list = field(default_factory=list)   # index 0: after warm-up, i: after RL epoch i
    best_so_far: list = field(default_factory=list)
    selected_epoch: int = 0
    params: Optional[PolicyParams] = None
    last_params: Optional[PolicyParams] = None
    warmup_loss: list = field(default_factory=list)
    train_solved: list = field(default_factory=list)
    epoch_params: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "val_mflips": self.val_mflips,
            "best_so_far": self.best_so_far,
            "selected_epoch": self.selected_epoch,
            "params": {"theta": list(self.params.theta), "w": list(self.params.w), "variant": self.params.variant},
            "last_params": {"theta": list(self.last_params.theta), "w": list(self.last_params.w)},
            "epoch_params": self.epoch_params,
            "warmup_loss": self.warmup_loss,
            "train_solved": self.train_solved,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def validation_mflips(params: PolicyParams, val: Sequence[CnfFormula], config: TrainConfig) -> float:
    cfg = EvalConfig(config.val_max_tries, config.val_max_flips, 1, derive_seed(config.seed, VAL_STREAM), threads=config.threads)
    return evaluate(params, val, cfg).m_flips


def train(train_set: Sequence[CnfFormula], val_set: Sequence[CnfFormula], config: TrainConfig = TrainConfig(),
          label: str = "", on_epoch: Optional[Callable[[int, PolicyParams, float], None]] = None) -> TrainReport:
    """Warm-up, then epochs of shuffled mini-batch REINFORCE with validation-based selection.

    ``on_epoch(epoch, params, val_mflips)`` is called after every
    validation, epoch 0 being the warmed-up policy.
    """
    if not train_set or not val_set:
        raise ValueError("training needs non-empty train and validation sets")
    report = TrainReport(config=config.to_dict())
    params, report.warmup_loss = warmup(train_set, config)
    meta = {"label": label} if label else {}
    params = params.with_vector(params.vector(), **meta)

    def record(epoch, p, solved_frac):
        val = validation_mflips(p, val_set, config)
        report.val_mflips.append(val)
        report.epoch_params.append(p.vector().tolist())
        report.train_solved.append(solved_frac)
        if not report.best_so_far or val < report.best_so_far[-1]:
            report.params = p
            report.selected_epoch = epoch
            report.best_so_far.append(val)
        else:
            report.best_so_far.append(report.best_so_far[-1])
        log.info("epoch %d: val m-flips %s, theta %s, p_w %.3f", epoch, val,
                 np.round(p.theta, 2).tolist(), p.noise(0.0))
        if on_epoch is not None:
            on_epoch(epoch, p, val)

    record(0, params, float("nan"))
    opt = AdamW(N_THETA + params.n_noise, weight_decay=config.weight_decay, maximize=True)
    n = len(train_set)
    per_epoch = math.ceil(n / config.batch_size)
    total_updates = config.epochs * per_epoch
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = list(range(n))
        shuffle(substream(config.seed, SHUFFLE_STREAM, epoch), order)
        solved = 0
        for start in range(0, n, config.batch_size):
            episodes = []
            g = np.zeros(N_THETA + params.n_noise)
            for i in order[start:start + config.batch_size]:
                ep = run_episode(train_set[i], params, config.max_flips_train,
                                 derive_seed(config.seed, EPISODE_STREAM, epoch, i))
                solved += ep.reward > 0
                if config.baseline:
                    episodes.append(ep)
                else:
                    # summing as we go keeps one trajectory in memory at a time
                    g += episode_grad(ep, params, config.gamma)
            if config.baseline:
                g = batch_grad(episodes, params, config.gamma, baseline=True)
            lr = one_cycle_lr(step, total_updates, config.lr_max)
            params = _ascend(params, g, opt, lr)
            step += 1
        record(epoch, params, solved / n)
    report.last_params = params
    return report
