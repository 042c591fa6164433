"""Epsilon-free NFAs and the transformations needed to turn a regular
expression into an unambiguous automaton.

States are the integers ``0 .. num_states - 1`` and state 0 is the unique
start state. Edges are ``(source, symbol, target)`` triples kept sorted by
``(source, symbol index, target)`` so that tag indices derived from them are
reproducible.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import LanguageBudgetExceeded, StateBudgetExceeded
from .regex import EpsilonNfa, RegexAst, parse_regex, thompson_construct

DEFAULT_STATE_BUDGET = 100_000


@dataclass(frozen=True)
class Nfa:
    alphabet: tuple
    num_states: int
    accepting: frozenset
    edges: tuple
    _out: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("alphabet contains duplicate symbols")
        if self.num_states < 1:
            raise ValueError("an NFA needs at least the start state")
        index = {a: i for i, a in enumerate(alphabet)}
        edges = set()
        for src, sym, dst in self.edges:
            if sym not in index:
                raise ValueError(f"edge symbol {sym!r} not in alphabet")
            if not (0 <= src < self.num_states and 0 <= dst < self.num_states):
                raise ValueError(f"edge {(src, sym, dst)} references an unknown state")
            edges.add((int(src), sym, int(dst)))
        accepting = frozenset(int(q) for q in self.accepting)
        if any(not 0 <= q < self.num_states for q in accepting):
            raise ValueError("accepting state out of range")
        edges = tuple(sorted(edges, key=lambda e: (e[0], index[e[1]], e[2])))
        out: dict = defaultdict(list)
        for e in edges:
            out[(e[0], e[1])].append(e[2])
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "accepting", accepting)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_out", dict(out))

    def successors(self, state: int, symbol: str) -> list:
        return self._out.get((state, symbol), [])

    @property
    def symbol_index(self) -> dict:
        return {a: i for i, a in enumerate(self.alphabet)}

    def to_dict(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "num_states": self.num_states,
            "accepting": sorted(self.accepting),
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Nfa":
        return cls(
            alphabet=tuple(data["alphabet"]),
            num_states=int(data["num_states"]),
            accepting=frozenset(data["accepting"]),
            edges=tuple(tuple(e) for e in data["edges"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Nfa":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class AmbiguityWitness:
    string: tuple
    path_a: tuple
    path_b: tuple


def _useful_states(m: Nfa) -> set:
    """States that are reachable from the start and can reach an accepting state."""
    fwd = {0}
    stack = [0]
    succ = defaultdict(set)
    pred = defaultdict(set)
    for src, _, dst in m.edges:
        succ[src].add(dst)
        pred[dst].add(src)
    while stack:
        q = stack.pop()
        for r in succ[q]:
            if r not in fwd:
                fwd.add(r)
                stack.append(r)
    bwd = set(m.accepting)
    stack = list(bwd)
    while stack:
        q = stack.pop()
        for p in pred[q]:
            if p not in bwd:
                bwd.add(p)
                stack.append(p)
    return fwd & bwd


def _canonical(alphabet: tuple, keep: Iterable[int], accepting: Iterable[int], edges) -> Nfa:
    """Renumber ``keep`` in breadth-first order from state 0 and drop the rest."""
    keep = set(keep) | {0}
    index = {a: i for i, a in enumerate(alphabet)}
    succ = defaultdict(list)
    for src, sym, dst in edges:
        if src in keep and dst in keep:
            succ[src].append((index[sym], dst))
    order = {0: 0}
    queue = deque([0])
    while queue:
        q = queue.popleft()
        for _, r in sorted(succ[q]):
            if r not in order:
                order[r] = len(order)
                queue.append(r)
    new_edges = [
        (order[s], a, order[d]) for s, a, d in edges if s in order and d in order
    ]
    return Nfa(
        alphabet=alphabet,
        num_states=len(order),
        accepting=frozenset(order[q] for q in accepting if q in order),
        edges=tuple(new_edges),
    )


def trim(m: Nfa) -> Nfa:
    """Drop states that lie on no accepting path (the start state always stays)."""
    return _canonical(m.alphabet, _useful_states(m), m.accepting, m.edges)


def eliminate_epsilons(m: EpsilonNfa, alphabet: Sequence[str]) -> Nfa:
    eps = defaultdict(list)
    sym_edges = defaultdict(list)
    for src, sym, dst in m.edges:
        (eps[src] if sym is None else sym_edges[src]).append((sym, dst))

    def closure(q):
        seen = {q}
        stack = [q]
        while stack:
            p = stack.pop()
            for _, r in eps[p]:
                if r not in seen:
                    seen.add(r)
                    stack.append(r)
        return seen

    keep = {m.start} | {dst for src, sym, dst in m.edges if sym is not None}
    edges = set()
    accepting = set()
    for q in keep:
        cl = closure(q)
        if m.final in cl:
            accepting.add(q)
        for p in cl:
            for sym, r in sym_edges[p]:
                edges.add((q, sym, r))
    # move the start state to index 0 before trimming
    swap = {m.start: 0, 0: m.start}
    relabel = lambda q: swap.get(q, q)  # noqa: E731
    return trim(
        Nfa(
            alphabet=tuple(alphabet),
            num_states=max(m.num_states, 1),
            accepting=frozenset(relabel(q) for q in accepting),
            edges=tuple((relabel(s), a, relabel(d)) for s, a, d in edges),
        )
    )


def regex_to_nfa(source: str | RegexAst, alphabet: Sequence[str]) -> Nfa:
    """Epsilon-free NFA for a regular expression (not necessarily unambiguous)."""
    ast = parse_regex(source, alphabet) if isinstance(source, str) else source
    return eliminate_epsilons(thompson_construct(ast), alphabet)


def is_deterministic(m: Nfa) -> bool:
    return all(len(v) <= 1 for v in m._out.values())


def determinize(m: Nfa, state_budget: int = DEFAULT_STATE_BUDGET) -> Nfa:
    """Subset construction over reachable subsets; the empty subset is omitted."""
    start = frozenset({0})
    ids = {start: 0}
    queue = deque([start])
    edges = []
    accepting = set()
    while queue:
        subset = queue.popleft()
        sid = ids[subset]
        if subset & m.accepting:
            accepting.add(sid)
        for a in m.alphabet:
            nxt = frozenset(r for q in subset for r in m.successors(q, a))
            if not nxt:
                continue
            if nxt not in ids:
                if len(ids) >= state_budget:
                    raise StateBudgetExceeded(state_budget)
                ids[nxt] = len(ids)
                queue.append(nxt)
            edges.append((sid, a, ids[nxt]))
    return trim(Nfa(m.alphabet, len(ids), frozenset(accepting), tuple(edges)))


def minimize_dfa(m: Nfa) -> Nfa:
    """Minimal partial DFA by partition refinement.

    The input must be deterministic. Missing transitions go to an implicit
    dead state, which is never materialised in the output.
    """
    if not is_deterministic(m):
        raise ValueError("minimize_dfa requires a deterministic automaton")
    m = trim(m)
    n = m.num_states
    delta = [[-1] * len(m.alphabet) for _ in range(n)]
    index = m.symbol_index
    for s, a, d in m.edges:
        delta[s][index[a]] = d
    block = [1 if q in m.accepting else 0 for q in range(n)]
    num_blocks = len(set(block))
    while True:
        signatures = {}
        new_block = []
        for q in range(n):
            sig = (block[q],) + tuple(block[r] if r >= 0 else -1 for r in delta[q])
            new_block.append(signatures.setdefault(sig, len(signatures)))
        block = new_block
        if len(signatures) == num_blocks:
            break
        num_blocks = len(signatures)
    edges = {(block[s], a, block[d]) for s, a, d in m.edges}
    accepting = {block[q] for q in m.accepting}
    # block ids are arbitrary; put the start block at 0 and canonicalize
    b0 = block[0]
    swap = {b0: 0, 0: b0}
    relabel = lambda b: swap.get(b, b)  # noqa: E731
    return _canonical(
        m.alphabet,
        range(num_blocks),
        [relabel(b) for b in accepting],
        [(relabel(s), a, relabel(d)) for s, a, d in edges],
    )


def check_unambiguous(m: Nfa) -> AmbiguityWitness | None:
    """Return ``None`` if every accepted string has exactly one accepting path,
    otherwise a shortest string with two accepting paths.

    Breadth-first search over the self-product restricted to useful states,
    carrying a flag that records whether the two paths have diverged.
    """
    useful = _useful_states(m)
    if 0 not in useful:
        return None
    start = (0, 0, False)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        p, q, diverged = node
        if diverged and p in m.accepting and q in m.accepting:
            return _witness(parent, node)
        for a in m.alphabet:
            for p2 in m.successors(p, a):
                if p2 not in useful:
                    continue
                for q2 in m.successors(q, a):
                    if q2 not in useful:
                        continue
                    nxt = (p2, q2, diverged or p2 != q2)
                    if nxt not in parent:
                        parent[nxt] = (node, a)
                        queue.append(nxt)
    return None


def _witness(parent, node) -> AmbiguityWitness:
    string, path_a, path_b = [], [], []
    while parent[node] is not None:
        prev, a = parent[node]
        string.append(a)
        path_a.append((prev[0], a, node[0]))
        path_b.append((prev[1], a, node[1]))
        node = prev
    return AmbiguityWitness(tuple(reversed(string)), tuple(reversed(path_a)), tuple(reversed(path_b)))


def _forward_sets(m: Nfa, y: Sequence[str]) -> list:
    sets = [{0}]
    for a in y:
        sets.append({r for q in sets[-1] for r in m.successors(q, a)})
        if not sets[-1]:
            break
    return sets


def accepts(m: Nfa, y: Sequence[str]) -> bool:
    sets = _forward_sets(m, y)
    return len(sets) == len(y) + 1 and bool(sets[-1] & m.accepting)


def accepting_path(m: Nfa, y: Sequence[str]) -> tuple | None:
    """The accepting edge sequence for ``y`` (unique when ``m`` is unambiguous)."""
    sets = _forward_sets(m, y)
    if len(sets) != len(y) + 1:
        return None
    finals = sorted(sets[-1] & m.accepting)
    if not finals:
        return None
    state = finals[0]
    path = []
    for i in range(len(y), 0, -1):
        a = y[i - 1]
        src = min(p for p in sets[i - 1] if state in m.successors(p, a))
        path.append((src, a, state))
        state = src
    return tuple(reversed(path))


def count_accepting_paths(m: Nfa, y: Sequence[str]) -> int:
    counts = {0: 1}
    for a in y:
        nxt: dict = defaultdict(int)
        for q, c in counts.items():
            for r in m.successors(q, a):
                nxt[r] += c
        counts = nxt
    return sum(c for q, c in counts.items() if q in m.accepting)


def enumerate_language(m: Nfa, max_len: int, budget: int = 1_000_000) -> set:
    """All accepted strings of length at most ``max_len``."""
    result = set()
    frontier = [((), frozenset({0}))]
    for length in range(max_len + 1):
        nxt = []
        for string, states in frontier:
            if states & m.accepting:
                result.add(string)
                if len(result) > budget:
                    raise LanguageBudgetExceeded(budget)
            if length == max_len:
                continue
            for a in m.alphabet:
                succ = frozenset(r for q in states for r in m.successors(q, a))
                if succ:
                    nxt.append((string + (a,), succ))
        frontier = nxt
        if len(frontier) > budget:
            raise LanguageBudgetExceeded(budget)
    return result


def compile_regex(
    source: str | RegexAst,
    alphabet: Sequence[str],
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> Nfa:
    """Regex -> minimal DFA, the default route to an unambiguous automaton."""
    return minimize_dfa(determinize(regex_to_nfa(source, alphabet), state_budget))


def make_unambiguous(m: Nfa, state_budget: int = DEFAULT_STATE_BUDGET) -> Nfa:
    """Keep ``m`` (trimmed) when it is already unambiguous, else determinize and minimize."""
    if check_unambiguous(m) is None:
        return trim(m)
    return minimize_dfa(determinize(m, state_budget))
