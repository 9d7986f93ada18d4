"""Candidate generation and the superset/subset hierarchy.

Candidates come from a greedy best-first walk of the index: starting at
the root, repeatedly take the unexplored node with the highest coverage
over the positive set and open up its children.  Because child counts
never exceed parent counts, a node's children can never beat it, so the
greedy order is safe to expand lazily with a priority queue.

Ties break by total coverage (descending), then canonical form
(ascending), so runs are reproducible.

The chosen candidates are arranged into a DAG whose edges follow the
one-derivation-step relation; cleanup marks nodes that cannot add new
positives so traversal never queries them.
"""
from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .grammars import Rule
from .scorer import Benefit, ScoreCache, benefit
from .trie_index import IndexNode, PatternIndex

UNASKED = "unasked"
ACCEPTED = "accepted"
REJECTED = "rejected"
PRUNED = "pruned"

DEFAULT_CANDIDATE_COUNT = 10_000


def _postings_array(node: IndexNode) -> np.ndarray:
    return np.frombuffer(node.postings, dtype=np.int32).astype(np.int64)


@dataclass
class GenerationResult:
    rules: list[Rule]
    exhausted: bool  # pool ran dry before k candidates


def generate_candidates(
    index: PatternIndex,
    positive_positions: np.ndarray,
    k: int = DEFAULT_CANDIDATE_COUNT,
) -> GenerationResult:
    """Greedy best-first selection of k high-coverage candidates.

    The root rule (matching everything) is always the first result.
    Ranking: |coverage ∩ positives| desc, |coverage| desc, canonical asc.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(index)
    p_mask = np.zeros(n, dtype=bool)
    pos = np.asarray(positive_positions, dtype=np.int64)
    if pos.size:
        p_mask[pos] = True

    grammar = index.grammar
    result: list[Rule] = [grammar.rule_from_path(())]
    pool: list[tuple[int, int, str, tuple[str, ...]]] = []
    seen: set[tuple[str, ...]] = {()}

    def push_children(path: tuple[str, ...], node: Optional[IndexNode]) -> None:
        if node is None:
            return
        for child_path, child in index.child_entries(path, node):
            if child_path in seen:
                continue
            seen.add(child_path)
            postings = _postings_array(child)
            inter = int(p_mask[postings].sum()) if postings.size else 0
            heapq.heappush(
                pool,
                (-inter, -child.count, index.canonical_of_path(child_path), child_path),
            )

    push_children((), index.root)
    while len(result) < k and pool:
        _, _, _, path = heapq.heappop(pool)
        result.append(grammar.rule_from_path(path))
        push_children(path, index.node_at(path))
    return GenerationResult(rules=result, exhausted=len(result) < k)


@dataclass
class HierarchyNode:
    rule: Rule
    positions: np.ndarray  # dense coverage positions
    status: str = UNASKED
    score: Optional[Benefit] = None
    parents: list[str] = field(default_factory=list)
    children: list[str] = field(default_factory=list)

    @property
    def coverage_size(self) -> int:
        return int(self.positions.size)


class Hierarchy:
    """DAG of candidate rules; an edge means one extra derivation step."""

    def __init__(self, index: PatternIndex):
        self.index = index
        self.nodes: dict[str, HierarchyNode] = {}
        self.order: list[str] = []  # insertion order for deterministic scans

    def __contains__(self, canonical: str) -> bool:
        return canonical in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def get(self, canonical: str) -> Optional[HierarchyNode]:
        return self.nodes.get(canonical)

    def add(self, rule: Rule, positions: np.ndarray) -> HierarchyNode:
        node = HierarchyNode(rule=rule, positions=positions)
        self.nodes[rule.canonical] = node
        self.order.append(rule.canonical)
        for parent in self.index.grammar.parent_rules(rule):
            pnode = self.nodes.get(parent.canonical)
            if pnode is not None:
                pnode.children.append(rule.canonical)
                node.parents.append(parent.canonical)
        return node

    def link_late_edges(self) -> None:
        """Connect parents that were added after their children."""
        for canonical in self.order:
            node = self.nodes[canonical]
            for parent in self.index.grammar.parent_rules(node.rule):
                pnode = self.nodes.get(parent.canonical)
                if pnode is not None and canonical not in pnode.children:
                    pnode.children.append(canonical)
                    node.parents.append(parent.canonical)
        for node in self.nodes.values():
            node.children.sort()
            node.parents.sort()

    def descendants(self, canonical: str) -> Iterable[HierarchyNode]:
        stack = list(self.nodes[canonical].children)
        seen: set[str] = set()
        while stack:
            c = stack.pop()
            if c in seen:
                continue
            seen.add(c)
            node = self.nodes[c]
            yield node
            stack.extend(node.children)

    def iter_nodes(self) -> Iterable[HierarchyNode]:
        for canonical in self.order:
            yield self.nodes[canonical]

    def update_scores(self, cache: ScoreCache, p_mask: np.ndarray) -> None:
        for node in self.nodes.values():
            node.score = benefit(node.positions, p_mask, cache)

    def set_status(self, canonical: str, status: str) -> None:
        if canonical in self.nodes:
            self.nodes[canonical].status = status

    def to_json(self) -> dict:
        nodes = []
        for node in self.iter_nodes():
            nodes.append(
                {
                    "display": node.rule.display,
                    "grammar": node.rule.grammar_id,
                    "coverage": node.coverage_size,
                    "status": node.status,
                    "benefit_total": node.score.total if node.score else None,
                    "benefit_average": node.score.average if node.score else None,
                    "children": [self.nodes[c].rule.display for c in node.children],
                }
            )
        return {"v": 1, "nodes": nodes}


def build_hierarchy(candidates: list[Rule], index: PatternIndex) -> Hierarchy:
    """Arrange candidates into the DAG, deduplicating by canonical form."""
    hierarchy = Hierarchy(index)
    for rule in candidates:
        if rule.canonical in hierarchy.nodes:
            continue
        path = index.grammar.path_of(rule)
        node = index.node_at(path) if path is not None else None
        if node is None and not rule.is_root:
            continue  # out-of-class rules carry no index coverage
        positions = (
            np.arange(len(index), dtype=np.int64)
            if rule.is_root
            else _postings_array(node)
        )
        hierarchy.add(rule, positions)
    hierarchy.link_late_edges()
    return hierarchy


def cleanup(hierarchy: Hierarchy, p_mask: np.ndarray) -> Hierarchy:
    """Prune nodes that cannot add positives beyond the discovered set.

    A node is pruned when its coverage is inside the positive set or
    inside an accepted ancestor's coverage (every hierarchy descendant of
    an accepted node qualifies).  Pruned nodes keep their edges so local
    traversal can still walk through them.
    """
    for node in hierarchy.iter_nodes():
        if node.status != UNASKED:
            continue
        positions = node.positions
        if positions.size == 0 or bool(p_mask[positions].all()):
            node.status = PRUNED
    for node in list(hierarchy.iter_nodes()):
        if node.status == ACCEPTED:
            for desc in hierarchy.descendants(node.rule.canonical):
                if desc.status == UNASKED:
                    desc.status = PRUNED
    return hierarchy


@dataclass(frozen=True)
class DiversityConfig:
    """Quotas for the optional diversity pass; zeros disable it."""

    min_fraction_per_level: float = 0.0
    min_fraction_per_feature: float = 0.0  # derivation-rule type, e.g. gap kinds
    min_rules_per_sentence: int = 0


def _rule_features(index: PatternIndex, path: tuple[str, ...]) -> set[str]:
    feats: set[str] = set()
    for label in path:
        if label.startswith("\x00+"):
            feats.add("gap+")
        elif label.startswith("\x00*"):
            feats.add("gap*")
        elif "\x1f//" in label:
            feats.add("descendant")
        elif "\x1f/" in label:
            feats.add("child")
        else:
            feats.add("literal")
    return feats or {"root"}


def diversity_filter(
    candidates: list[Rule],
    index: PatternIndex,
    config: DiversityConfig = DiversityConfig(),
) -> list[Rule]:
    """Best-effort quota pass over index levels and derivation features.

    With a zeroed config this is the identity.  When the index cannot
    satisfy a quota a warning is emitted and the closest achievable set
    is returned.
    """
    if (
        config.min_fraction_per_level <= 0
        and config.min_fraction_per_feature <= 0
        and config.min_rules_per_sentence <= 0
    ):
        return candidates

    chosen = {r.canonical for r in candidates}
    out = list(candidates)
    k = max(1, len(candidates))

    by_level: dict[int, list[tuple[str, ...]]] = {}
    by_feature: dict[str, list[tuple[str, ...]]] = {}
    for path, node in index.nodes():
        if not path:
            continue
        by_level.setdefault(len(path), []).append(path)
        for feat in _rule_features(index, path):
            by_feature.setdefault(feat, []).append(path)

    def top_up(pool: list[tuple[str, ...]], want: int, label: str) -> int:
        have = 0
        ranked = sorted(pool, key=lambda p: (-index.node_at(p).count, p))
        for path in ranked:
            rule = index.grammar.rule_from_path(path)
            if rule.canonical in chosen:
                have += 1
                continue
            if have >= want:
                break
            chosen.add(rule.canonical)
            out.append(rule)
            have += 1
        if have < want:
            warnings.warn(f"diversity quota unsatisfiable for {label}: {have}/{want}")
        return have

    if config.min_fraction_per_level > 0:
        want = max(1, int(config.min_fraction_per_level * k))
        for level in sorted(by_level):
            top_up(by_level[level], want, f"level {level}")
    if config.min_fraction_per_feature > 0:
        want = max(1, int(config.min_fraction_per_feature * k))
        for feat in sorted(by_feature):
            top_up(by_feature[feat], want, f"feature {feat}")
    if config.min_rules_per_sentence > 0:
        covered: dict[int, int] = {pos: 0 for pos in range(len(index))}
        for rule in out:
            path = index.grammar.path_of(rule)
            node = index.node_at(path) if path is not None else None
            if node is None:
                continue
            for pos in node.postings:
                covered[pos] = covered.get(pos, 0) + 1
        starved = [p for p, c in sorted(covered.items()) if c < config.min_rules_per_sentence]
        for pos in starved:
            # highest-coverage patterns of that sentence, skipping the root
            cands = [
                (path, node)
                for path, node in index.nodes()
                if path and pos in set(node.postings)
            ]
            cands.sort(key=lambda pn: (-pn[1].count, pn[0]))
            added = 0
            for path, _node in cands:
                if added >= config.min_rules_per_sentence:
                    break
                rule = index.grammar.rule_from_path(path)
                if rule.canonical not in chosen:
                    chosen.add(rule.canonical)
                    out.append(rule)
                added += 1
    return out
