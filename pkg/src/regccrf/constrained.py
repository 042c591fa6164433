"""Regular-constrained CRFs.

An unambiguous automaton ``M`` for the language ``L`` is compiled into an
auxiliary tag set: every edge ``(q, a, r)`` of ``M`` becomes a tag, a
transition between two tags is allowed only when the first ends where the
second starts, the first tag must leave the start state and the last must
enter an accepting state. Scores are shared with the ordinary CRF over the
labels, so the auxiliary CRF's distribution over tag paths is the label
CRF's distribution conditioned on ``y in L``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import crf
from .automata import (
    DEFAULT_STATE_BUDGET,
    Nfa,
    accepting_path,
    check_unambiguous,
    compile_regex,
    make_unambiguous,
)
from .crf import NEG, TagScores
from .errors import AmbiguousAutomatonError, EmptySupportError, OutOfLanguageError

MODEL_VERSION = "regccrf-v1"


class LabeledSequence(NamedTuple):
    x: tuple
    y: tuple


@dataclass
class CrfParams:
    """Label-level parameters shared by the plain CRF and its constrained twin.

    ``emission[i, a]`` scores label ``a`` at position ``i``. Positions past
    the end of the table score zero. When a vocabulary is given,
    ``token_emission[v, a]`` adds a score for label ``a`` on observation
    token ``vocabulary[v]``; unknown tokens add nothing.
    """

    labels: tuple
    transition: np.ndarray
    emission: np.ndarray
    vocabulary: tuple = ()
    token_emission: np.ndarray | None = None
    _vocab_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.vocabulary = tuple(self.vocabulary)
        n = len(self.labels)
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.emission = np.asarray(self.emission, dtype=np.float64).reshape(-1, n)
        if self.transition.shape != (n, n):
            raise ValueError(f"transition must be {n} x {n}")
        if self.vocabulary:
            if self.token_emission is None:
                self.token_emission = np.zeros((len(self.vocabulary), n))
            self.token_emission = np.asarray(self.token_emission, dtype=np.float64)
            if self.token_emission.shape != (len(self.vocabulary), n):
                raise ValueError("token_emission must be |vocabulary| x |labels|")
        else:
            self.token_emission = None
        for name in ("transition", "emission", "token_emission"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        self._vocab_index = {tok: i for i, tok in enumerate(self.vocabulary)}

    @classmethod
    def zeros(cls, labels: Sequence[str], length: int, vocabulary: Sequence[str] = ()):
        n = len(labels)
        tok = np.zeros((len(vocabulary), n)) if vocabulary else None
        return cls(tuple(labels), np.zeros((n, n)), np.zeros((length, n)), tuple(vocabulary), tok)

    def copy(self) -> "CrfParams":
        return CrfParams(
            self.labels,
            self.transition.copy(),
            self.emission.copy(),
            self.vocabulary,
            None if self.token_emission is None else self.token_emission.copy(),
        )

    def token_ids(self, x: Sequence) -> np.ndarray:
        return np.array([self._vocab_index.get(tok, -1) for tok in x], dtype=int)

    def emission_scores(self, length: int, x: Sequence | None = None) -> np.ndarray:
        """Label emission table ``h(x, a, i)`` for a sequence of ``length``."""
        n = len(self.labels)
        out = np.zeros((length, n))
        rows = min(length, self.emission.shape[0])
        out[:rows] = self.emission[:rows]
        if self.token_emission is not None and x is not None:
            ids = self.token_ids(x)
            known = ids >= 0
            out[known] += self.token_emission[ids[known]]
        return out

    def to_dict(self) -> dict:
        d = {
            "labels": list(self.labels),
            "transition": self.transition.tolist(),
            "emission": self.emission.tolist(),
        }
        if self.vocabulary:
            d["vocabulary"] = list(self.vocabulary)
            d["token_emission"] = self.token_emission.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CrfParams":
        n = len(d["labels"])
        return cls(
            tuple(d["labels"]),
            np.asarray(d["transition"], dtype=np.float64).reshape(n, n),
            np.asarray(d["emission"], dtype=np.float64).reshape(-1, n),
            tuple(d.get("vocabulary", ())),
            d.get("token_emission"),
        )


@dataclass(frozen=True, eq=False)
class ConstrainedTagSet:
    """Auxiliary tag space of a RegCCRF.

    Edge form: ``tags[k] = (q, a, r)``. Class-reduced form: ``tags[k] = (q, a)``.
    """

    nfa: Nfa
    tags: tuple
    tag_labels: np.ndarray
    allowed_transitions: np.ndarray
    allowed_start: np.ndarray
    allowed_end: np.ndarray
    reduced: bool = False
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {tag: k for k, tag in enumerate(self.tags)})

    @property
    def labels(self) -> tuple:
        return self.nfa.alphabet

    @property
    def num_tags(self) -> int:
        return len(self.tags)

    @property
    def projection(self) -> np.ndarray:
        """One-hot ``|tags| x |labels|`` matrix mapping each tag to its label."""
        p = np.zeros((self.num_tags, len(self.labels)))
        p[np.arange(self.num_tags), self.tag_labels] = 1.0
        return p

    def tag_path(self, y: Sequence[str]) -> list:
        """Tag indices of the unique accepting path of ``y``."""
        path = accepting_path(self.nfa, y)
        if path is None:
            raise OutOfLanguageError(y)
        if self.reduced:
            return [self._index[(q, a)] for q, a, _ in path]
        return [self._index[e] for e in path]

    def decode_tags(self, tags: Sequence[int]) -> tuple:
        return tuple(self.labels[self.tag_labels[k]] for k in tags)


def build_tag_set(m: Nfa, check: bool = True) -> ConstrainedTagSet:
    """One tag per edge of the unambiguous automaton ``m``."""
    if check:
        witness = check_unambiguous(m)
        if witness is not None:
            raise AmbiguousAutomatonError(witness)
    index = m.symbol_index
    tags = m.edges
    n = len(tags)
    src = np.array([e[0] for e in tags], dtype=int)
    dst = np.array([e[2] for e in tags], dtype=int)
    return ConstrainedTagSet(
        nfa=m,
        tags=tags,
        tag_labels=np.array([index[e[1]] for e in tags], dtype=int).reshape(n),
        allowed_transitions=(dst[:, None] == src[None, :]).reshape(n, n),
        allowed_start=(src == 0).reshape(n),
        allowed_end=np.array([e[2] in m.accepting for e in tags], dtype=bool).reshape(n),
    )


def reduce_tag_set(ts: ConstrainedTagSet) -> ConstrainedTagSet:
    """Merge edges that share ``(source state, label)``; flags are OR-ed over members."""
    if ts.reduced:
        return ts
    classes: dict = {}
    member_of = []
    for q, a, _ in ts.tags:
        member_of.append(classes.setdefault((q, a), len(classes)))
    member_of = np.array(member_of, dtype=int)
    n = len(classes)
    onehot = np.zeros((ts.num_tags, n))
    onehot[np.arange(ts.num_tags), member_of] = 1.0
    trans = onehot.T @ ts.allowed_transitions.astype(float) @ onehot > 0
    start = onehot.T @ ts.allowed_start.astype(float) > 0
    end = onehot.T @ ts.allowed_end.astype(float) > 0
    index = ts.nfa.symbol_index
    tags = tuple(classes)
    return ConstrainedTagSet(
        nfa=ts.nfa,
        tags=tags,
        tag_labels=np.array([index[a] for _, a in tags], dtype=int).reshape(n),
        allowed_transitions=trans.reshape(n, n),
        allowed_start=start.reshape(n),
        allowed_end=end.reshape(n),
        reduced=True,
    )


def universal_nfa(labels: Sequence[str]) -> Nfa:
    """One accepting state with a self-loop per label: the language of all strings."""
    return Nfa(tuple(labels), 1, frozenset({0}), tuple((0, a, 0) for a in labels))


def unconstrained_tag_set(labels: Sequence[str]) -> ConstrainedTagSet:
    """Tag set of the plain CRF, whose tags are exactly the labels."""
    return build_tag_set(universal_nfa(labels), check=False)


def compile_language(
    language: str | Nfa,
    labels: Sequence[str] | None = None,
    class_reduction: bool = True,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> ConstrainedTagSet:
    """Regex source or NFA -> tag set, via an unambiguous automaton."""
    if isinstance(language, Nfa):
        m = make_unambiguous(language, state_budget)
    else:
        if labels is None:
            raise ValueError("a regex needs an explicit label alphabet")
        m = compile_regex(language, labels, state_budget)
    ts = build_tag_set(m, check=False)
    return reduce_tag_set(ts) if class_reduction else ts


def expand_scores(
    ts: ConstrainedTagSet,
    params: CrfParams,
    t: int | None = None,
    x: Sequence | None = None,
    label_emission: np.ndarray | None = None,
) -> TagScores:
    """Tag-level scores of the auxiliary CRF for a sequence of length ``t``.

    ``label_emission`` (``t x |labels|``) overrides the emission scores
    computed from ``params``.
    """
    if tuple(params.labels) != tuple(ts.labels):
        raise ValueError("parameter labels do not match the tag set's alphabet")
    if label_emission is None:
        if t is None:
            if x is None:
                raise ValueError("need a length or an observation sequence")
            t = len(x)
        if t < 1:
            raise ValueError("sequence length must be at least 1")
        label_emission = params.emission_scores(t, x)
    label_emission = np.asarray(label_emission, dtype=np.float64)
    lab = ts.tag_labels
    trans = np.where(ts.allowed_transitions, params.transition[np.ix_(lab, lab)], NEG)
    return TagScores(label_emission[:, lab], trans, ts.allowed_start, ts.allowed_end)


def constrained_log_prob(
    ts: ConstrainedTagSet, params: CrfParams, y: Sequence[str], x: Sequence | None = None
) -> float:
    """``log P(y | x, L)``; raises :class:`OutOfLanguageError` when ``y`` is not in ``L``."""
    path = ts.tag_path(y)
    s = expand_scores(ts, params, len(y), x)
    return crf.sequence_log_score(s, path) - _log_partition(s, len(y))


def _log_partition(s: TagScores, t: int) -> float:
    try:
        return crf.log_partition(s)
    except EmptySupportError:
        raise EmptySupportError(t) from None


def constrained_viterbi(
    ts: ConstrainedTagSet, params: CrfParams, t: int | None = None, x: Sequence | None = None
) -> tuple:
    """Most probable label sequence in ``L`` of length ``t`` (or ``len(x)``)."""
    s = expand_scores(ts, params, t, x)
    try:
        tags, _ = crf.viterbi(s)
    except EmptySupportError:
        raise EmptySupportError(s.length) from None
    return ts.decode_tags(tags)


def constrained_marginals(
    ts: ConstrainedTagSet, params: CrfParams, t: int | None = None, x: Sequence | None = None
) -> np.ndarray:
    """Per-position label marginals (``t x |labels|``) under the constrained model."""
    s = expand_scores(ts, params, t, x)
    try:
        m = crf.marginals(s)
    except EmptySupportError:
        raise EmptySupportError(s.length) from None
    return m.unary @ ts.projection


def project_gradient(
    ts: ConstrainedTagSet, em_grad: np.ndarray, tr_grad: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Chain rule through label-wise parameter sharing: sum tag gradients per label."""
    p = ts.projection
    tr_grad = np.where(ts.allowed_transitions, tr_grad, 0.0)
    return em_grad @ p, p.T @ tr_grad @ p


def nll_gradient_labelwise(
    ts: ConstrainedTagSet, params: CrfParams, y: Sequence[str], x: Sequence | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``-log P(y | x, L)`` w.r.t. the label emission table
    (``t x |labels|``) and the label transition matrix."""
    path = ts.tag_path(y)
    s = expand_scores(ts, params, len(y), x)
    em_grad, tr_grad = crf.nll_gradient(s, path)
    return project_gradient(ts, em_grad, tr_grad)


def model_to_dict(ts: ConstrainedTagSet, params: CrfParams, **extra) -> dict:
    d = {
        "version": MODEL_VERSION,
        "nfa": ts.nfa.to_dict(),
        "class_reduction": ts.reduced,
        **params.to_dict(),
    }
    d.update(extra)
    return d


def model_from_dict(d: dict) -> tuple[ConstrainedTagSet, CrfParams]:
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    ts = build_tag_set(Nfa.from_dict(d["nfa"]))
    if d.get("class_reduction", True):
        ts = reduce_tag_set(ts)
    return ts, CrfParams.from_dict(d)


def save_model(path, ts: ConstrainedTagSet, params: CrfParams, **extra) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(ts, params, **extra), fh, indent=1)


def load_model(path) -> tuple[ConstrainedTagSet, CrfParams]:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
