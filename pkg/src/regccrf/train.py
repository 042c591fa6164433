"""SGD training, exact cross-entropy evaluation and the three regimens
(unconstrained CRF, constrained decoding, constrained training)."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import crf
from .constrained import (
    ConstrainedTagSet,
    CrfParams,
    LabeledSequence,
    constrained_log_prob,
    expand_scores,
    project_gradient,
    unconstrained_tag_set,
)
from .errors import DivergenceError, OutOfLanguageError

logger = logging.getLogger(__name__)

REGIMENS = ("unconstrained", "constrained_decoding", "constrained_training")


@dataclass(frozen=True)
class DataDistribution:
    """Finite joint distribution over ``(x, y)`` pairs."""

    support: tuple

    def __init__(self, support: Iterable[tuple]):
        entries = []
        for x, y, p in support:
            x, y = tuple(x), tuple(y)
            if len(x) != len(y):
                raise ValueError(f"x and y lengths differ for y={y}")
            if not p > 0:
                raise ValueError("probabilities must be positive")
            entries.append((x, y, float(p)))
        if not entries:
            raise ValueError("empty distribution")
        total = math.fsum(p for _, _, p in entries)
        # rounding of n normalized weights can exceed 1e-12 for large n
        if abs(total - 1.0) > max(1e-12, len(entries) * 2.0**-52):
            raise ValueError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "support", tuple(entries))

    @classmethod
    def from_weights(cls, pairs: Iterable[tuple], weights: Iterable[float] | None = None):
        """Normalize non-negative weights (default uniform) over ``(x, y)`` pairs,
        merging duplicate pairs and dropping zero-weight ones."""
        pairs = [(tuple(x), tuple(y)) for x, y in pairs]
        weights = [1.0] * len(pairs) if weights is None else [float(w) for w in weights]
        merged: dict = {}
        for pair, w in zip(pairs, weights):
            if w < 0:
                raise ValueError("weights must be non-negative")
            merged[pair] = merged.get(pair, 0.0) + w
        total = math.fsum(merged.values())
        if total <= 0:
            raise ValueError("weights must have a positive sum")
        return cls((x, y, w / total) for (x, y), w in merged.items() if w > 0)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, _, p in self.support])

    @property
    def max_length(self) -> int:
        return max(len(y) for _, y, _ in self.support)

    def entropy(self) -> float:
        """Conditional entropy ``H(y | x)`` of the data, in nats."""
        px: dict = {}
        for x, _, p in self.support:
            px[x] = px.get(x, 0.0) + p
        return -sum(p * math.log(p / px[x]) for x, _, p in self.support)

    def check_language(self, ts: ConstrainedTagSet) -> None:
        for _, y, _ in self.support:
            ts.tag_path(y)


@dataclass
class TrainConfig:
    steps: int = 5000
    batch_size: int = 50
    lr: float = 1.0
    lr_decay_every: int = 100
    lr_decay_frac: float = 0.10
    transition_init_std: float = 0.1
    seed: int = 0
    loss_normalization: str = "token"

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be at least 1")
        if not 0 <= self.lr_decay_frac < 1:
            raise ValueError("lr_decay_frac must lie in [0, 1)")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be at least 1")
        if self.loss_normalization not in ("token", "sequence"):
            raise ValueError("loss_normalization must be 'token' or 'sequence'")

    def learning_rate(self, step: int) -> float:
        """Rate for 0-based ``step``: multiplied by ``1 - lr_decay_frac`` at
        steps ``lr_decay_every``, ``2 * lr_decay_every``, ..."""
        return self.lr * (1.0 - self.lr_decay_frac) ** (step // self.lr_decay_every)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RegimenResult:
    regimen: str
    params: CrfParams
    cross_entropy: float
    per_string: list = field(default_factory=list)

    def to_row(self, **extra) -> dict:
        return {
            "regimen": self.regimen,
            **extra,
            "cross_entropy": self.cross_entropy,
            "per_string": {" ".join(y): p for y, p in self.per_string},
        }


def sample(dist: DataDistribution, n: int, seed: int | np.random.Generator = 0) -> list:
    """Draw ``n`` i.i.d. pairs from ``dist``."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(dist.support), size=n, p=dist.probs)
    return [LabeledSequence(dist.support[i][0], dist.support[i][1]) for i in idx]


def init_params(
    labels: Sequence[str],
    length: int,
    config: TrainConfig,
    rng: np.random.Generator,
    vocabulary: Sequence[str] = (),
) -> CrfParams:
    """Transitions ~ N(0, transition_init_std); emission tables ~ U(-1/sqrt(|labels|), 1/sqrt(|labels|))."""
    n = len(labels)
    bound = 1.0 / math.sqrt(n)
    transition = rng.normal(0.0, config.transition_init_std, size=(n, n))
    emission = rng.uniform(-bound, bound, size=(length, n))
    token = rng.uniform(-bound, bound, size=(len(vocabulary), n)) if vocabulary else None
    return CrfParams(tuple(labels), transition, emission, tuple(vocabulary), token)


class _Objective:
    """Mean NLL over a multiset of support entries, with its gradient.

    Emissions do not depend on ``y``, so entries sharing ``x`` share one
    forward-backward pass.
    """

    def __init__(self, ts: ConstrainedTagSet, support: Sequence[tuple], per_token: bool = False):
        self.ts = ts
        self.per_token = per_token
        self.support = support
        self.paths = []
        for x, y, _ in support:
            self.paths.append(np.asarray(ts.tag_path(y), dtype=int))
        groups: dict = {}
        for i, (x, _, _) in enumerate(support):
            groups.setdefault(x, []).append(i)
        self.groups = list(groups.items())

    def loss_and_grad(self, params: CrfParams, counts: np.ndarray):
        ts = self.ts
        if self.per_token:
            total = sum(c * len(x) for c, (x, _, _) in zip(counts, self.support))
        else:
            total = counts.sum()
        g_em = np.zeros_like(params.emission)
        g_tr = np.zeros_like(params.transition)
        g_tok = None if params.token_emission is None else np.zeros_like(params.token_emission)
        loss = 0.0
        for x, members in self.groups:
            c = counts[members]
            weight = c.sum()
            if weight == 0:
                continue
            t = len(x)
            s = expand_scores(ts, params, t, x)
            marg, log_z = crf.forward_backward(s)
            em_tag = weight * marg.unary
            tr_tag = weight * marg.pairwise.sum(axis=0)
            for i, ci in zip(members, c):
                if ci == 0:
                    continue
                path = self.paths[i]
                loss += ci * (log_z - crf.sequence_log_score(s, path))
                em_tag[np.arange(t), path] -= ci
                np.add.at(tr_tag, (path[:-1], path[1:]), -ci)
            em_lab, tr_lab = project_gradient(ts, em_tag, tr_tag)
            g_tr += tr_lab
            rows = min(t, g_em.shape[0])
            g_em[:rows] += em_lab[:rows]
            if g_tok is not None:
                ids = params.token_ids(x)
                known = ids >= 0
                np.add.at(g_tok, ids[known], em_lab[known])
        return loss / total, g_em / total, g_tr / total, (None if g_tok is None else g_tok / total)


def fit_params(
    ts: ConstrainedTagSet,
    dist: DataDistribution,
    config: TrainConfig,
    vocabulary: Sequence[str] = (),
    emission_length: int | None = None,
) -> CrfParams:
    """Minimize the mean minibatch NLL of the CRF over tag set ``ts`` by SGD."""
    rng = np.random.default_rng(config.seed)
    length = emission_length or dist.max_length
    params = init_params(ts.labels, length, config, rng, vocabulary)
    objective = _Objective(ts, dist.support, config.loss_normalization == "token")
    probs = dist.probs
    n = len(dist.support)
    for step in range(config.steps):
        idx = rng.choice(n, size=config.batch_size, p=probs)
        counts = np.bincount(idx, minlength=n).astype(float)
        loss, g_em, g_tr, g_tok = objective.loss_and_grad(params, counts)
        if not math.isfinite(loss):
            raise DivergenceError(step, loss)
        lr = config.learning_rate(step)
        params.emission -= lr * g_em
        params.transition -= lr * g_tr
        if g_tok is not None:
            params.token_emission -= lr * g_tok
        if not (np.all(np.isfinite(params.emission)) and np.all(np.isfinite(params.transition))):
            raise DivergenceError(step, loss)
        if step % 1000 == 0:
            logger.debug("step %d lr %.4g loss %.6f", step, lr, loss)
    return params


def train_unconstrained(
    dist: DataDistribution, config: TrainConfig, labels: Sequence[str] | None = None
) -> CrfParams:
    if labels is None:
        labels = sorted({a for _, y, _ in dist.support for a in y})
    return fit_params(unconstrained_tag_set(labels), dist, config)


def train_constrained(
    dist: DataDistribution, ts: ConstrainedTagSet, config: TrainConfig
) -> CrfParams:
    # raises OutOfLanguageError before any optimization happens
    dist.check_language(ts)
    return fit_params(ts, dist, config)


def model_log_prob(
    params: CrfParams, y: Sequence[str], x: Sequence | None = None, ts: ConstrainedTagSet | None = None
) -> float:
    """``log P(y | x)`` under the plain CRF, or under the RegCCRF when ``ts`` is given."""
    if ts is None:
        ts = unconstrained_tag_set(params.labels)
    return constrained_log_prob(ts, params, y, x)


def evaluate_cross_entropy(
    dist: DataDistribution, params: CrfParams, ts: ConstrainedTagSet | None = None
) -> float:
    """Exact ``E[-ln model(y | x)]`` over the finite support; ``inf`` if some
    support point has zero or undefined model probability."""
    total = 0.0
    for x, y, p in dist.support:
        try:
            total -= p * model_log_prob(params, y, x, ts)
        except OutOfLanguageError:
            return math.inf
    return total


def per_string_probs(
    dist: DataDistribution, params: CrfParams, ts: ConstrainedTagSet | None = None
) -> list:
    out = []
    for x, y, _ in dist.support:
        try:
            out.append((y, math.exp(model_log_prob(params, y, x, ts))))
        except OutOfLanguageError:
            out.append((y, 0.0))
    return out


def run_regimens(
    dist: DataDistribution, ts: ConstrainedTagSet, config: TrainConfig
) -> dict:
    """Train the plain CRF once and the RegCCRF once; evaluate all three regimens."""
    dist.check_language(ts)
    theta_u = train_unconstrained(dist, config, ts.labels)
    theta_c = train_constrained(dist, ts, config)
    results = {}
    for regimen, params, lang in (
        ("unconstrained", theta_u, None),
        ("constrained_decoding", theta_u, ts),
        ("constrained_training", theta_c, ts),
    ):
        results[regimen] = RegimenResult(
            regimen,
            params,
            evaluate_cross_entropy(dist, params, lang),
            per_string_probs(dist, params, lang),
        )
    return results
