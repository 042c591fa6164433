"""Log-space linear-chain CRF inference over an arbitrary finite tag set.

Forbidden scores are stored as the finite sentinel :data:`NEG` rather than
``-inf`` so that no arithmetic below can produce NaN. Any total score below
``NEG / 2`` is treated as minus infinity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySupportError

NEG = -1e30
_FORBIDDEN = NEG / 2


def _clean(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a[np.isneginf(a)] = NEG
    if not np.all(np.isfinite(a)):
        raise ValueError("scores must be finite or -inf")
    return np.maximum(a, NEG)


@dataclass(frozen=True)
class TagScores:
    """Emission (``t x |Y|``) and transition (``|Y| x |Y|``) log-potentials.

    ``start_mask`` / ``end_mask`` list the tags allowed at the first and
    last position; ``None`` allows every tag.
    """

    emission: np.ndarray
    transition: np.ndarray
    start_mask: np.ndarray | None = None
    end_mask: np.ndarray | None = None

    def __post_init__(self):
        em = _clean(self.emission)
        tr = _clean(self.transition)
        if em.ndim != 2 or em.shape[0] < 1:
            raise ValueError("emission must be a non-empty t x |Y| matrix")
        n = em.shape[1]
        if tr.shape != (n, n):
            raise ValueError(f"transition must be {n} x {n}, got {tr.shape}")
        object.__setattr__(self, "emission", em)
        object.__setattr__(self, "transition", tr)
        for name in ("start_mask", "end_mask"):
            mask = getattr(self, name)
            mask = np.ones(n, bool) if mask is None else np.asarray(mask, bool)
            if mask.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            object.__setattr__(self, name, mask)

    @property
    def length(self) -> int:
        return self.emission.shape[0]

    @property
    def num_tags(self) -> int:
        return self.emission.shape[1]

    def effective_emission(self) -> np.ndarray:
        """Emission matrix with the start/end masks folded into the first/last rows."""
        em = self.emission.copy()
        em[0, ~self.start_mask] = NEG
        em[-1, ~self.end_mask] = NEG
        return em


@dataclass(frozen=True)
class TagMarginals:
    unary: np.ndarray
    pairwise: np.ndarray


def logsumexp(a: np.ndarray, axis: int = 0) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _exp_shifted(a: np.ndarray, axis=None):
    """``exp(a - max)`` and the max, with all-forbidden slices mapped to zeros."""
    m = a.max(axis=axis, keepdims=axis is not None)
    e = np.exp(a - m)
    dead = m < _FORBIDDEN
    if np.any(dead):
        e = np.where(dead, 0.0, e)
    return e, m


def _to_log(scaled: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = np.log(scaled) + offsets[:, None]
    return np.maximum(out, NEG)


# Scaled recursions: each row is kept normalized to sum 1 and its log
# normalizer accumulated separately, so the loop body is one mat-vec.
def _forward(em: np.ndarray, tr: np.ndarray) -> np.ndarray:
    t, n = em.shape
    eem, emax = _exp_shifted(em, axis=1)
    etr, tmax = _exp_shifted(tr)
    scaled = np.zeros((t, n))
    offsets = np.full(t, NEG)
    v = eem[0]
    log_c = emax[0, 0]
    for i in range(t):
        if i:
            v = (scaled[i - 1] @ etr) * eem[i]
            log_c = offsets[i - 1] + tmax + emax[i, 0]
        c = v.sum()
        if c == 0.0:
            break
        scaled[i] = v / c
        offsets[i] = log_c + np.log(c)
    return _to_log(scaled, offsets)


def _backward(em: np.ndarray, tr: np.ndarray) -> np.ndarray:
    t, n = em.shape
    eem, emax = _exp_shifted(em, axis=1)
    etr, tmax = _exp_shifted(tr)
    scaled = np.zeros((t, n))
    offsets = np.full(t, NEG)
    scaled[-1] = 1.0 / n
    offsets[-1] = np.log(n)
    for i in range(t - 2, -1, -1):
        v = etr @ (eem[i + 1] * scaled[i + 1])
        c = v.sum()
        if c == 0.0:
            break
        scaled[i] = v / c
        offsets[i] = offsets[i + 1] + emax[i + 1, 0] + tmax + np.log(c)
    return _to_log(scaled, offsets)


def _check_support(log_z: float) -> float:
    if log_z < _FORBIDDEN:
        raise EmptySupportError()
    return float(log_z)


def _require_tags(s: TagScores) -> None:
    if s.num_tags == 0:
        raise EmptySupportError()


def log_partition(s: TagScores) -> float:
    _require_tags(s)
    alpha = _forward(s.effective_emission(), s.transition)
    return _check_support(logsumexp(alpha[-1]))


def sequence_log_score(s: TagScores, y: Sequence[int]) -> float:
    """Unnormalized log-score of tag sequence ``y``; ``-inf`` if any part is forbidden."""
    y = np.asarray(y, dtype=int)
    if y.shape != (s.length,):
        raise ValueError(f"tag sequence must have length {s.length}")
    if not (s.start_mask[y[0]] and s.end_mask[y[-1]]):
        return float("-inf")
    parts = s.emission[np.arange(s.length), y]
    trans = s.transition[y[:-1], y[1:]]
    if np.any(parts < _FORBIDDEN) or np.any(trans < _FORBIDDEN):
        return float("-inf")
    return float(parts.sum() + trans.sum())


def nll(s: TagScores, y: Sequence[int]) -> float:
    score = sequence_log_score(s, y)
    if score == float("-inf"):
        raise ValueError("tag sequence has zero probability; loss is infinite")
    return log_partition(s) - score


def forward_backward(s: TagScores) -> tuple[TagMarginals, float]:
    _require_tags(s)
    em = s.effective_emission()
    tr = s.transition
    alpha = _forward(em, tr)
    beta = _backward(em, tr)
    log_z = _check_support(logsumexp(alpha[-1]))
    unary = np.exp(alpha + beta - log_z)
    pairwise = np.exp(
        alpha[:-1, :, None] + tr[None, :, :] + (em[1:] + beta[1:])[:, None, :] - log_z
    )
    return TagMarginals(unary, pairwise), log_z


def marginals(s: TagScores) -> TagMarginals:
    return forward_backward(s)[0]


def viterbi(s: TagScores) -> tuple[list, float]:
    """Highest-scoring tag sequence; ties go to the lowest tag index."""
    _require_tags(s)
    em = s.effective_emission()
    tr = s.transition
    t = s.length
    delta = em[0].copy()
    back = np.zeros((t, s.num_tags), dtype=int)
    for i in range(1, t):
        cand = delta[:, None] + tr
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], np.arange(s.num_tags)] + em[i]
    last = int(np.argmax(delta))
    best = float(delta[last])
    if best < _FORBIDDEN:
        raise EmptySupportError()
    path = [last]
    for i in range(t - 1, 0, -1):
        path.append(int(back[i][path[-1]]))
    path.reverse()
    return path, best


def observed_counts(y: Sequence[int], num_tags: int) -> tuple[np.ndarray, np.ndarray]:
    """One-hot emission indicators and transition counts of a tag sequence."""
    y = np.asarray(y, dtype=int)
    em = np.zeros((len(y), num_tags))
    em[np.arange(len(y)), y] = 1.0
    tr = np.zeros((num_tags, num_tags))
    np.add.at(tr, (y[:-1], y[1:]), 1.0)
    return em, tr


def nll_gradient(s: TagScores, y: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of :func:`nll` with respect to the emission and transition scores."""
    if sequence_log_score(s, y) == float("-inf"):
        raise ValueError("tag sequence has zero probability; loss is infinite")
    m = marginals(s)
    em_obs, tr_obs = observed_counts(y, s.num_tags)
    return m.unary - em_obs, m.pairwise.sum(axis=0) - tr_obs
