"""scikit-learn style estimator wrapping the RegCCRF."""

from __future__ import annotations

import json
import logging
import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .automata import DEFAULT_STATE_BUDGET, Nfa
from .constrained import (
    compile_language,
    constrained_log_prob,
    constrained_marginals,
    constrained_viterbi,
    model_from_dict,
    model_to_dict,
    unconstrained_tag_set,
)
from .errors import EmptySupportError, OutOfLanguageError
from .regex import RESERVED
from .train import DataDistribution, TrainConfig, fit_params
from .validation import check_sample_weight, check_sequences, check_sequences_labels

logger = logging.getLogger(__name__)


def infer_alphabet(source: str) -> tuple:
    """Labels mentioned in a regex, in order of first appearance."""
    out = []
    i = 0
    while i < len(source):
        c = source[i]
        if c == "[":
            end = source.index("]", i)
            label = source[i + 1:end].strip()
            i = end + 1
        elif c.isspace() or c in RESERVED or c.isdigit() and _in_braces(source, i):
            i += 1
            continue
        else:
            label = c
            i += 1
        if label not in out:
            out.append(label)
    return tuple(out)


def _in_braces(source: str, i: int) -> bool:
    return source.rfind("{", 0, i) > source.rfind("}", 0, i)


class RegCCRF(BaseEstimator):
    """Linear-chain CRF whose output is constrained to a regular language.

    Parameters
    ----------
    language : str, Nfa or None
        Regular expression or automaton over the labels. ``None`` gives a
        plain CRF.
    labels : sequence of str, optional
        Label alphabet. Inferred from ``language`` and the training labels
        when omitted.
    constrained_training : bool
        Train the constrained model directly. When False the CRF is trained
        without the language, which is then applied only at decoding time.
    class_reduction : bool
        Merge automaton edges sharing (source state, label) into one tag.
    token_features : bool
        Add a (token, label) emission score on top of the per-position table.
    drop_violations : bool
        Silently discard training sequences outside the language instead of
        raising :class:`OutOfLanguageError`. Dropped indices land in
        ``dropped_``.

    The remaining parameters mirror :class:`~regccrf.train.TrainConfig`.
    """

    def __init__(
        self,
        language=None,
        labels=None,
        constrained_training=True,
        class_reduction=True,
        token_features=True,
        drop_violations=False,
        steps=5000,
        batch_size=50,
        lr=1.0,
        lr_decay_every=100,
        lr_decay_frac=0.1,
        transition_init_std=0.1,
        loss_normalization="token",
        state_budget=DEFAULT_STATE_BUDGET,
        random_state=0,
    ):
        self.language = language
        self.labels = labels
        self.constrained_training = constrained_training
        self.class_reduction = class_reduction
        self.token_features = token_features
        self.drop_violations = drop_violations
        self.steps = steps
        self.batch_size = batch_size
        self.lr = lr
        self.lr_decay_every = lr_decay_every
        self.lr_decay_frac = lr_decay_frac
        self.transition_init_std = transition_init_std
        self.loss_normalization = loss_normalization
        self.state_budget = state_budget
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            steps=self.steps,
            batch_size=self.batch_size,
            lr=self.lr,
            lr_decay_every=self.lr_decay_every,
            lr_decay_frac=self.lr_decay_frac,
            transition_init_std=self.transition_init_std,
            seed=self.random_state,
            loss_normalization=self.loss_normalization,
        )

    def _resolve_labels(self, y) -> tuple:
        if self.labels is not None:
            return tuple(self.labels)
        if isinstance(self.language, Nfa):
            return self.language.alphabet
        found = list(infer_alphabet(self.language)) if isinstance(self.language, str) else []
        for seq in y:
            for a in seq:
                if a not in found:
                    found.append(a)
        return tuple(sorted(found))

    def fit(self, X, y, sample_weight=None):
        X, y = check_sequences_labels(X, y)
        config = self._config()
        self.labels_ = self._resolve_labels(y)
        X, y = check_sequences_labels(X, y, self.labels_)
        weights = check_sample_weight(sample_weight, len(X))
        if self.language is None:
            self.tag_set_ = unconstrained_tag_set(self.labels_)
        else:
            self.tag_set_ = compile_language(
                self.language, self.labels_, self.class_reduction, self.state_budget
            )
        train_ts = self.tag_set_ if self.constrained_training else unconstrained_tag_set(self.labels_)
        keep, self.dropped_ = [], []
        for i, ys in enumerate(y):
            try:
                train_ts.tag_path(ys)
                keep.append(i)
            except OutOfLanguageError:
                if not self.drop_violations:
                    raise
                self.dropped_.append(i)
        if self.dropped_:
            logger.info("dropped %d out-of-language training sequences", len(self.dropped_))
        if not keep:
            raise ValueError("no training sequences left")
        dist = DataDistribution.from_weights(
            [(X[i], y[i]) for i in keep], [weights[i] for i in keep]
        )
        vocabulary = sorted({tok for x in X for tok in x}) if self.token_features else ()
        self.params_ = fit_params(train_ts, dist, config, vocabulary)
        return self

    def predict(self, X) -> list:
        """Highest-scoring label sequence for each input (always in the language)."""
        check_is_fitted(self, "params_")
        X = check_sequences(X)
        return [constrained_viterbi(self.tag_set_, self.params_, x=x) for x in X]

    def predict_marginals(self, X) -> list:
        check_is_fitted(self, "params_")
        X = check_sequences(X)
        return [constrained_marginals(self.tag_set_, self.params_, x=x) for x in X]

    def log_prob(self, X, y) -> np.ndarray:
        """``log P(y | x, L)`` per pair; ``-inf`` when ``y`` is outside the language."""
        check_is_fitted(self, "params_")
        X, y = check_sequences_labels(X, y)
        out = []
        for xs, ys in zip(X, y):
            try:
                out.append(constrained_log_prob(self.tag_set_, self.params_, ys, xs))
            except (OutOfLanguageError, EmptySupportError):
                out.append(-math.inf)
        return np.array(out)

    def score(self, X, y) -> float:
        """Mean log-likelihood of ``y`` given ``X``."""
        return float(np.mean(self.log_prob(X, y)))

    def to_dict(self) -> dict:
        check_is_fitted(self, "params_")
        return model_to_dict(
            self.tag_set_, self.params_, constrained_training=self.constrained_training
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "RegCCRF":
        ts, params = model_from_dict(data)
        est = cls(
            language=ts.nfa,
            labels=params.labels,
            constrained_training=data.get("constrained_training", True),
            class_reduction=ts.reduced,
            token_features=bool(params.vocabulary),
        )
        est.labels_ = params.labels
        est.tag_set_ = ts
        est.params_ = params
        est.dropped_ = []
        return est

    @classmethod
    def load(cls, path) -> "RegCCRF":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
