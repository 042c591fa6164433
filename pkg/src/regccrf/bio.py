"""Constraint languages over BIO role labels.

Labels are ``O``, ``B-<role>`` / ``I-<role>`` for every role, and
``B-C-<role>`` / ``I-C-<role>`` for every role that admits continuations.
Accepted sequences satisfy:

* an ``I-T`` only directly follows ``B-T`` or ``I-T``;
* ``B-<role>`` occurs at most once for each core role;
* ``B-C-<role>`` only occurs after an earlier ``B-<role>``.

Reference roles are not modelled; treat them as non-core roles.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .automata import DEFAULT_STATE_BUDGET, Nfa, minimize_dfa
from .errors import StateBudgetExceeded

OUTSIDE = "O"


@dataclass(frozen=True)
class BioSpec:
    core_roles: tuple = ()
    noncore_roles: tuple = ()
    continuation_roles: tuple = ()

    def __post_init__(self):
        for name in ("core_roles", "noncore_roles", "continuation_roles"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        roles = self.core_roles + self.noncore_roles
        if len(set(roles)) != len(roles):
            raise ValueError("role names must be distinct")
        if len(set(self.continuation_roles)) != len(self.continuation_roles):
            raise ValueError("continuation roles must be distinct")
        missing = set(self.continuation_roles) - set(roles)
        if missing:
            raise ValueError(f"continuation roles without a base role: {sorted(missing)}")
        if any(r.startswith("C-") for r in roles):
            raise ValueError("role names may not start with 'C-'")

    @property
    def span_types(self) -> tuple:
        return (
            self.core_roles
            + self.noncore_roles
            + tuple(f"C-{r}" for r in self.continuation_roles)
        )

    @property
    def labels(self) -> tuple:
        out = [OUTSIDE]
        for span in self.span_types:
            out += [f"B-{span}", f"I-{span}"]
        return tuple(out)


def _step(spec: BioSpec, state, label):
    """Successor of ``state = (used_core, seen_bases, open_span)`` or ``None``."""
    used, seen, open_span = state
    if label == OUTSIDE:
        return used, seen, None
    tag, span = label[:2], label[2:]
    if tag == "I-":
        return state if open_span == span else None
    if span.startswith("C-"):
        return (used, seen, span) if span[2:] in seen else None
    if span in spec.core_roles:
        if span in used:
            return None
        used = used | {span}
    if span in spec.continuation_roles:
        seen = seen | {span}
    return used, seen, span


def build_bio_nfa(spec: BioSpec, state_budget: int = DEFAULT_STATE_BUDGET) -> Nfa:
    """Minimal DFA accepting exactly the valid label sequences of ``spec``."""
    labels = spec.labels
    start = (frozenset(), frozenset(), None)
    ids = {start: 0}
    queue = deque([start])
    edges = []
    while queue:
        state = queue.popleft()
        for label in labels:
            nxt = _step(spec, state, label)
            if nxt is None:
                continue
            if nxt not in ids:
                if len(ids) >= state_budget:
                    raise StateBudgetExceeded(state_budget)
                ids[nxt] = len(ids)
                queue.append(nxt)
            edges.append((ids[state], label, ids[nxt]))
    # every prefix-valid sequence is complete
    dfa = Nfa(labels, len(ids), frozenset(ids.values()), tuple(edges))
    return minimize_dfa(dfa)


def is_valid_bio(spec: BioSpec, y: Sequence[str]) -> bool:
    state = (frozenset(), frozenset(), None)
    for label in y:
        if label not in spec.labels:
            return False
        state = _step(spec, state, label)
        if state is None:
            return False
    return True
