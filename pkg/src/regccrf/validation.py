"""Input checks for sequence data, in the spirit of sklearn's ``check_X_y``."""

from __future__ import annotations

from typing import Sequence


def _as_sequence(item, what: str, i: int) -> tuple:
    if isinstance(item, str):
        item = item.split()
    try:
        seq = tuple(item)
    except TypeError:
        raise ValueError(f"{what} {i} is not a sequence") from None
    if not seq:
        raise ValueError(f"{what} {i} is empty")
    return seq


def check_sequences(X) -> list:
    """Coerce ``X`` to a list of non-empty token tuples.

    A string element is split on whitespace.
    """
    if isinstance(X, str):
        raise ValueError("expected a collection of sequences, got a single string")
    return [_as_sequence(x, "sequence", i) for i, x in enumerate(X)]


def check_sequences_labels(X, y, labels: Sequence[str] | None = None) -> tuple[list, list]:
    """Coerce and cross-check parallel observation and label sequences."""
    X = check_sequences(X)
    y = [_as_sequence(s, "label sequence", i) for i, s in enumerate(y)]
    if len(X) != len(y):
        raise ValueError(f"got {len(X)} observation sequences but {len(y)} label sequences")
    for i, (xs, ys) in enumerate(zip(X, y)):
        if len(xs) != len(ys):
            raise ValueError(f"sequence {i}: {len(xs)} tokens but {len(ys)} labels")
    if labels is not None:
        allowed = set(labels)
        for i, ys in enumerate(y):
            unknown = [a for a in ys if a not in allowed]
            if unknown:
                raise ValueError(f"sequence {i}: unknown label {unknown[0]!r}")
    return X, y


def check_sample_weight(sample_weight, n: int) -> list:
    if sample_weight is None:
        return [1.0] * n
    w = [float(v) for v in sample_weight]
    if len(w) != n:
        raise ValueError(f"sample_weight has {len(w)} entries for {n} sequences")
    if any(v < 0 for v in w) or sum(w) <= 0:
        raise ValueError("sample_weight must be non-negative with a positive sum")
    return w
