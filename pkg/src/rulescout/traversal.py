"""Query selection strategies over the candidate hierarchy.

* local: explore the immediate neighborhood of rules the oracle has
  already judged, generalizing on YES (parents) and specializing on NO
  (children).  Runs directly against the index, expanding on the fly.
* universal: pick the globally most beneficial hierarchy node, skipping
  (and consuming) any whose average benefit does not clear the floor,
  i.e. rules whose coverage is expected to be mostly negative.
* hybrid: universal first; after tau consecutive unsuccessful attempts
  the mode toggles.  A successful (YES) answer resets the counter.
* highp / highc baselines: highest average benefit, and largest
  uncovered coverage, with no benefit floor.

Only genuine oracle submissions consume budget; candidates skipped by
the benefit floor are filtered computation, not annotator work.
No rule is ever submitted twice, and the root rule is never submitted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grammars import Rule
from .hierarchy import UNASKED, Hierarchy
from .scorer import Benefit, ScoreCache, benefit
from .trie_index import PatternIndex

LOCAL = "local"
UNIVERSAL = "universal"
HYBRID = "hybrid"
HIGH_PRECISION = "highp"
HIGH_COVERAGE = "highc"
STRATEGIES = (LOCAL, UNIVERSAL, HYBRID, HIGH_PRECISION, HIGH_COVERAGE)

BENEFIT_FLOOR = 0.5


class TraversalError(ValueError):
    pass


class SearchContext:
    """Benefit and neighborhood lookups shared by the selectors.

    Benefits are memoized until the engine invalidates them after a
    retrain or a change to the positive set.
    """

    def __init__(self, index: PatternIndex, hierarchy: Optional[Hierarchy],
                 cache: ScoreCache, p_mask: np.ndarray):
        self.index = index
        self.hierarchy = hierarchy
        self.cache = cache
        self.p_mask = p_mask
        self._positions: dict[str, np.ndarray] = {}
        self._benefits: dict[str, Benefit] = {}

    def invalidate(self, cache: ScoreCache, p_mask: np.ndarray) -> None:
        self.cache = cache
        self.p_mask = p_mask
        self._benefits.clear()

    def positions_of(self, rule: Rule) -> np.ndarray:
        got = self._positions.get(rule.canonical)
        if got is None:
            if self.hierarchy is not None and rule.canonical in self.hierarchy:
                got = self.hierarchy.nodes[rule.canonical].positions
            else:
                path = self.index.grammar.path_of(rule)
                node = self.index.node_at(path) if path is not None else None
                if node is None:
                    got = np.empty(0, dtype=np.int64)
                else:
                    got = np.frombuffer(node.postings, dtype=np.int32).astype(np.int64)
            self._positions[rule.canonical] = got
        return got

    def benefit_of(self, rule: Rule) -> Benefit:
        got = self._benefits.get(rule.canonical)
        if got is None:
            got = benefit(self.positions_of(rule), self.p_mask, self.cache)
            self._benefits[rule.canonical] = got
        return got

    def rank_key(self, rule: Rule, score: Benefit) -> tuple:
        positions = self.positions_of(rule)
        inter = positions.size - score.new_count
        return (-score.total, -inter, -positions.size, rule.canonical)

    def parents(self, rule: Rule) -> list[Rule]:
        return self.index.parents_of(rule)

    def children(self, rule: Rule) -> list[Rule]:
        return self.index.children_of(rule)


@dataclass
class TraversalState:
    """Mutable per-session traversal bookkeeping."""

    strategy: str
    tau: float = 5
    universal_mode: bool = True
    attempt: int = 0
    local_candidates: dict[str, Rule] = field(default_factory=dict)
    universal_candidates: set[str] = field(default_factory=set)
    asked: set[str] = field(default_factory=set)
    expanded: set[str] = field(default_factory=set)  # passed through without asking
    last_query: Optional[Rule] = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise TraversalError(f"unknown strategy {self.strategy!r}")
        if self.tau < 1:
            raise TraversalError("tau must be >= 1")

    def add_local(self, rules: list[Rule]) -> None:
        for rule in rules:
            if rule.canonical in self.asked or rule.canonical in self.expanded:
                continue
            self.local_candidates.setdefault(rule.canonical, rule)

    def reset_universal(self, hierarchy: Hierarchy) -> None:
        self.universal_candidates = {
            node.rule.canonical
            for node in hierarchy.iter_nodes()
            if node.status == UNASKED and not node.rule.is_root
            and node.rule.canonical not in self.asked
        }


def normalize_local(state: TraversalState, ctx: SearchContext) -> None:
    """Expand through candidates that must never reach the oracle.

    The root rule is trivially imprecise, so it is treated as an implicit
    NO and replaced by its children.  A candidate whose coverage is
    already inside the positive set cannot add anything, which is exactly
    a free YES: it is replaced by its parents so the climb toward more
    general rules continues.  Neither expansion costs budget.
    """
    again = True
    while again:
        again = False
        for canonical in sorted(state.local_candidates):
            rule = state.local_candidates.get(canonical)
            if rule is None or canonical in state.asked:
                continue
            if rule.is_root:
                del state.local_candidates[canonical]
                state.expanded.add(canonical)
                state.add_local(ctx.children(rule))
                again = True
                continue
            score = ctx.benefit_of(rule)
            if score.new_count == 0:
                del state.local_candidates[canonical]
                state.expanded.add(canonical)
                state.add_local(ctx.parents(rule))
                again = True


def next_query_local(state: TraversalState, ctx: SearchContext) -> Optional[Rule]:
    """Most beneficial unasked local candidate that still adds coverage."""
    best: Optional[Rule] = None
    best_key: Optional[tuple] = None
    for canonical in sorted(state.local_candidates):
        rule = state.local_candidates[canonical]
        if rule.is_root or canonical in state.asked:
            continue
        score = ctx.benefit_of(rule)
        if score.new_count == 0:
            continue
        key = ctx.rank_key(rule, score)
        if best_key is None or key < best_key:
            best, best_key = rule, key
    return best


def _universal_ranked(state: TraversalState, ctx: SearchContext) -> list[tuple[tuple, Rule]]:
    assert ctx.hierarchy is not None
    ranked = []
    for node in ctx.hierarchy.iter_nodes():
        canonical = node.rule.canonical
        if node.status != UNASKED or node.rule.is_root:
            continue
        if canonical not in state.universal_candidates or canonical in state.asked:
            continue
        score = ctx.benefit_of(node.rule)
        if score.new_count == 0:
            continue
        ranked.append((ctx.rank_key(node.rule, score), node.rule))
    ranked.sort(key=lambda kr: kr[0])
    return ranked


def next_query_universal(state: TraversalState, ctx: SearchContext) -> Optional[Rule]:
    """Highest total benefit with average above the floor.

    Candidates failing the floor are consumed: they leave the universal
    pool without costing budget, and reappear only when the hierarchy is
    regenerated after new positives arrive.
    """
    for _key, rule in _universal_ranked(state, ctx):
        if ctx.benefit_of(rule).average > BENEFIT_FLOOR:
            return rule
        state.universal_candidates.discard(rule.canonical)
    return None


def next_query_highp(state: TraversalState, ctx: SearchContext) -> Optional[Rule]:
    best: Optional[Rule] = None
    best_key: Optional[tuple] = None
    assert ctx.hierarchy is not None
    for node in ctx.hierarchy.iter_nodes():
        if node.status != UNASKED or node.rule.is_root:
            continue
        if node.rule.canonical in state.asked:
            continue
        score = ctx.benefit_of(node.rule)
        if score.new_count == 0:
            continue
        key = (-score.average,) + ctx.rank_key(node.rule, score)
        if best_key is None or key < best_key:
            best, best_key = node.rule, key
    return best


def next_query_highc(state: TraversalState, ctx: SearchContext) -> Optional[Rule]:
    best: Optional[Rule] = None
    best_key: Optional[tuple] = None
    assert ctx.hierarchy is not None
    for node in ctx.hierarchy.iter_nodes():
        if node.status != UNASKED or node.rule.is_root:
            continue
        if node.rule.canonical in state.asked:
            continue
        score = ctx.benefit_of(node.rule)
        if score.new_count == 0:
            continue
        key = (-score.new_count, -node.coverage_size, node.rule.canonical)
        if best_key is None or key < best_key:
            best, best_key = node.rule, key
    return best


def next_query_hybrid(state: TraversalState, ctx: SearchContext) -> Optional[Rule]:
    """Tau-switched combination of universal and local selection.

    The mode toggles lazily at selection time once the unsuccessful
    attempt counter reaches tau, and also when the current mode has no
    candidate left (a dead mode should not end the session while the
    other still has work).
    """
    if state.attempt >= state.tau:
        state.universal_mode = not state.universal_mode
        state.attempt = 0
    for _ in range(2):
        if state.universal_mode:
            rule = next_query_universal(state, ctx)
        else:
            normalize_local(state, ctx)
            rule = next_query_local(state, ctx)
        if rule is not None:
            return rule
        state.universal_mode = not state.universal_mode
        state.attempt = 0
    return None


def select_next(state: TraversalState, ctx: SearchContext) -> Optional[Rule]:
    if state.strategy == LOCAL:
        normalize_local(state, ctx)
        rule = next_query_local(state, ctx)
    elif state.strategy == UNIVERSAL:
        rule = next_query_universal(state, ctx)
    elif state.strategy == HYBRID:
        rule = next_query_hybrid(state, ctx)
    elif state.strategy == HIGH_PRECISION:
        rule = next_query_highp(state, ctx)
    else:
        rule = next_query_highc(state, ctx)
    state.last_query = rule
    return rule


def apply_feedback(state: TraversalState, rule: Rule, answer: bool,
                   ctx: SearchContext) -> TraversalState:
    """Record the oracle's verdict and grow the local frontier.

    YES adds the rule's parents (generalizations) and resets the hybrid
    attempt counter; NO adds its children and counts an unsuccessful
    attempt.  The rule leaves both candidate pools for good.
    """
    if state.last_query is None or state.last_query.canonical != rule.canonical:
        raise TraversalError(f"feedback for a rule that was not queried: {rule.display!r}")
    canonical = rule.canonical
    state.asked.add(canonical)
    state.local_candidates.pop(canonical, None)
    state.universal_candidates.discard(canonical)
    if answer:
        state.add_local(ctx.parents(rule))
        state.attempt = 0
    else:
        state.add_local(ctx.children(rule))
        state.attempt += 1
    state.last_query = None
    return state


def hybrid_replays_universal(tau: float) -> bool:
    """True when hybrid with this tau cannot leave universal mode."""
    return math.isinf(tau)
