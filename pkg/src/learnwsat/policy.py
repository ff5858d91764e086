"""Learned variable scoring and noise, the sampling move built on them, and gradients.

A policy scores every variable of the chosen unsatisfied clause with a
linear function of five features, picks a uniformly random variable with
probability ``p_w`` and otherwise samples from the softmax of the scores.
Its parameters form one flat vector ``[theta0..theta5, w0(, w1, w2)]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .engine import SolverState, StepRecord

VARIANTS = ("constant", "delta")
POLICY_VERSION = 1
N_THETA = 6
BREAK_CAP = 10

# noise stays inside the open interval (0, 0.5) even where the sigmoid saturates
P_MIN = 1e-300
P_MAX = math.nextafter(0.5, 0.0)

_LN11 = math.log(BREAK_CAP + 1)
_BK = [math.log1p(b) / _LN11 for b in range(BREAK_CAP + 1)]


class FeatureVector(NamedTuple):
    bk: float
    d1: float
    d2: float
    last5: float
    last10: float


def bk_feature(brk: int) -> float:
    return _BK[brk if brk < BREAK_CAP else BREAK_CAP]


def extract_features(s: SolverState, v: int) -> FeatureVector:
    """Features of variable v for the pick about to be made at iteration s.t + 1."""
    it = s.t + 1
    a1, a2 = s.age1[v], s.age2[v]
    since = it - a2
    return FeatureVector(
        bk_feature(s.break_value(v)),
        1.0 - a1 / it,
        1.0 - a2 / it,
        1.0 if a2 > 0 and since <= 5 else 0.0,
        1.0 if a2 > 0 and since <= 10 else 0.0,
    )


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class PolicyParams:
    theta: tuple[float, ...] = (0.0,) * N_THETA
    w: tuple[float, ...] = (0.0,)
    variant: str = "constant"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown noise variant {self.variant!r}")
        theta = tuple(float(t) for t in self.theta)
        w = tuple(float(x) for x in self.w)
        if len(theta) != N_THETA:
            raise ValueError(f"need {N_THETA} scoring parameters, got {len(theta)}")
        if len(w) != self.n_noise:
            raise ValueError(f"{self.variant} noise takes {self.n_noise} parameters, got {len(w)}")
        if not all(map(math.isfinite, theta + w)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "w", w)

    @property
    def n_noise(self) -> int:
        return 1 if self.variant == "constant" else 3

    @classmethod
    def initial(cls, variant: str = "constant", p_init: float = 0.25, theta=None) -> "PolicyParams":
        n_noise = 1 if variant == "constant" else 3
        w = (logit(2 * p_init),) + (0.0,) * (n_noise - 1)
        return cls(tuple(theta) if theta is not None else (0.0,) * N_THETA, w, variant)

    def vector(self) -> np.ndarray:
        return np.array(self.theta + self.w, dtype=float)

    def with_vector(self, vec, **meta) -> "PolicyParams":
        vec = [float(x) for x in vec]
        return PolicyParams(tuple(vec[:N_THETA]), tuple(vec[N_THETA:]), self.variant, {**self.meta, **meta})

    def noise(self, delta: float = 0.0) -> float:
        return noise(self.w, delta)


def score(theta: Sequence[float], fv: Sequence[float]) -> float:
    return theta[0] + theta[1] * fv[0] + theta[2] * fv[1] + theta[3] * fv[2] + theta[4] * fv[3] + theta[5] * fv[4]


def noise(w: Sequence[float], delta: float = 0.0) -> float:
    """0.5 * sigmoid(w0 + w1*delta + w2*delta^2); a single weight ignores delta."""
    z = w[0]
    if len(w) > 1:
        z += w[1] * delta + w[2] * delta * delta
    return min(max(0.5 * sigmoid(z), P_MIN), P_MAX)


def _mixture(scores: Sequence[float], p: float) -> list[float]:
    mx = max(scores)
    e = [math.exp(sc - mx) for sc in scores]
    z = sum(e)
    k = len(scores)
    return [p / k + (1.0 - p) * ei / z for ei in e]


def stagnation(s: SolverState) -> float:
    return s.stagnation / s.m


def action_distribution(params: PolicyParams, s: SolverState, c: int) -> list[float]:
    """Probability of flipping each variable of clause c, noise branch included."""
    feats = [extract_features(s, v) for v in s.clause_vars[c]]
    return _mixture([score(params.theta, f) for f in feats], params.noise(stagnation(s)))


def sample_action(params: PolicyParams, s: SolverState, c: int, rng) -> tuple[int, float, StepRecord]:
    """Draw a variable of clause c; returns it, its log-probability and the step record."""
    v, _, rec = PolicyPicker(params)(s, c, rng, True)
    return v, math.log(rec.probs[rec.action_index]), rec


class PolicyPicker:
    """Picker for ``run_sls`` that samples moves from a policy."""

    def __init__(self, params: PolicyParams):
        self.params = params
        self.theta = params.theta
        self.w = params.w
        self.constant = params.variant == "constant"
        self.p_const = noise(params.w) if self.constant else None

    def __call__(self, s: SolverState, c: int, rng, record: bool = False):
        vs = s.clause_vars[c]
        k = len(vs)
        if self.constant:
            p, delta = self.p_const, 0.0
        else:
            delta = s.stagnation / s.m
            p = noise(self.w, delta)
        coin = rng.random()
        if coin < p and not record:
            return vs[int(rng.random() * k)], False, None

        th0, th1, th2, th3, th4, th5 = self.theta
        it = s.t + 1
        age1, age2 = s.age1, s.age2
        feats = []
        scores = []
        for v in vs:
            a2 = age2[v]
            since = it - a2
            f = (_BK[min(s.break_value(v), BREAK_CAP)], 1.0 - age1[v] / it, 1.0 - a2 / it,
                 1.0 if a2 and since <= 5 else 0.0, 1.0 if a2 and since <= 10 else 0.0)
            feats.append(f)
            scores.append(th0 + th1 * f[0] + th2 * f[1] + th3 * f[2] + th4 * f[3] + th5 * f[4])

        if coin < p:
            idx = int(rng.random() * k)
            greedy = False
        else:
            mx = max(scores)
            e = [math.exp(sc - mx) for sc in scores]
            u = rng.random() * sum(e)
            idx = k - 1
            acc = 0.0
            for i in range(k - 1):
                acc += e[i]
                if u < acc:
                    idx = i
                    break
            greedy = True
        if not record:
            return vs[idx], greedy, None
        rec = StepRecord(it, c, vs, vs[idx], not greedy, features=feats,
                         probs=_mixture(scores, p), delta=delta, p_noise=p)
        return vs[idx], greedy, rec

    def describe(self) -> str:
        label = self.params.meta.get("label", "")
        return f"learnwsat({label})" if label else "learnwsat"


# ---------------------------------------------------------------------------
# gradients of log P(action)
# ---------------------------------------------------------------------------

def log_prob(params: PolicyParams, features: Sequence[Sequence[float]], delta: float, action_index: int) -> float:
    scores = [score(params.theta, f) for f in features]
    return math.log(_mixture(scores, params.noise(delta))[action_index])


def stack_steps(steps: Sequence[StepRecord]):
    """Pack step records into padded arrays (features, mask, delta, action)."""
    T = len(steps)
    K = max((len(r.candidates) for r in steps), default=1)
    feats = np.zeros((T, K, 5))
    mask = np.zeros((T, K), dtype=bool)
    delta = np.empty(T)
    action = np.empty(T, dtype=np.intp)
    for t, r in enumerate(steps):
        k = len(r.candidates)
        feats[t, :k] = r.features
        mask[t, :k] = True
        delta[t] = r.delta
        action[t] = r.action_index
    return feats, mask, delta, action


def weighted_grad(params: PolicyParams, feats, mask, delta, action, weights) -> np.ndarray:
    """sum_t weights[t] * d/dparams log P(action[t] | step t), vectorized over steps."""
    T = feats.shape[0]
    out = np.zeros(N_THETA + params.n_noise)
    if T == 0:
        return out
    phi = np.concatenate([np.ones(feats.shape[:2] + (1,)), feats], axis=2)
    scores = phi @ np.asarray(params.theta)
    scores = np.where(mask, scores, -np.inf)
    scores -= scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    soft = e / e.sum(axis=1, keepdims=True)
    k = mask.sum(axis=1)
    rows = np.arange(T)
    sa = soft[rows, action]

    w = params.w
    if params.variant == "constant":
        z = np.full(T, w[0])
        dz = np.ones((T, 1))
    else:
        z = w[0] + w[1] * delta + w[2] * delta ** 2
        dz = np.stack([np.ones(T), delta, delta ** 2], axis=1)
    sig = 0.5 * (1.0 + np.tanh(0.5 * z))
    p = np.clip(0.5 * sig, P_MIN, P_MAX)
    P = p / k + (1.0 - p) * sa

    expected_phi = np.einsum("tk,tkj->tj", soft, phi)
    g_theta = ((1.0 - p) * sa / P)[:, None] * (phi[rows, action] - expected_phi)
    g_z = (1.0 / k - sa) / P * 0.5 * sig * (1.0 - sig)
    g_w = g_z[:, None] * dz
    weights = np.asarray(weights, dtype=float)
    out[:N_THETA] = weights @ g_theta
    out[N_THETA:] = weights @ g_w
    return out


def log_prob_grad(params: PolicyParams, rec: StepRecord, action_index: int | None = None) -> np.ndarray:
    """Gradient of log P(action) for one recorded step."""
    if action_index is None:
        action_index = rec.action_index
    feats = np.asarray([rec.features], dtype=float)
    mask = np.ones(feats.shape[:2], dtype=bool)
    return weighted_grad(params, feats, mask, np.array([rec.delta]), np.array([action_index]), [1.0])


# ---------------------------------------------------------------------------
# policy files
# ---------------------------------------------------------------------------

class PolicyFileError(ValueError):
    pass


class ParseError(PolicyFileError):
    pass


class VersionMismatch(PolicyFileError):
    pass


def dumps_policy(params: PolicyParams) -> str:
    lines = ["# learnwsat policy", f"version = {POLICY_VERSION}", f"variant = {params.variant}"]
    lines += [f"theta{i} = {v!r}" for i, v in enumerate(params.theta)]
    lines += [f"w{i} = {v!r}" for i, v in enumerate(params.w)]
    for key in sorted(params.meta):
        val = str(params.meta[key])
        if "\n" in val:
            raise ValueError("metadata values must be single-line")
        lines.append(f"meta.{key} = {val}")
    return "\n".join(lines) + "\n"


def loads_policy(text: str) -> PolicyParams:
    kv = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ParseError(f"line {lineno}: expected 'key = value'")
        kv[key.strip()] = val.strip()
    if "version" not in kv:
        raise ParseError("missing version")
    if kv["version"] != str(POLICY_VERSION):
        raise VersionMismatch(f"policy file version {kv['version']}, expected {POLICY_VERSION}")
    variant = kv.get("variant")
    if variant not in VARIANTS:
        raise ParseError(f"bad or missing variant {variant!r}")
    n_noise = 1 if variant == "constant" else 3
    try:
        theta = tuple(float(kv[f"theta{i}"]) for i in range(N_THETA))
        w = tuple(float(kv[f"w{i}"]) for i in range(n_noise))
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]}") from None
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    meta = {k[5:]: v for k, v in kv.items() if k.startswith("meta.")}
    try:
        return PolicyParams(theta, w, variant, meta)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def save_policy(params: PolicyParams, path) -> None:
    Path(path).write_text(dumps_policy(params), encoding="utf-8")


def load_policy(path) -> PolicyParams:
    return loads_policy(Path(path).read_text(encoding="utf-8"))
