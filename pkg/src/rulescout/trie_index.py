"""Per-sentence derivation sketches and the merged pattern index.

Every bounded pattern a sentence satisfies corresponds to a path of
derivation-step labels; the per-sentence sketch is the trie of those
paths.  Merging sketches over the corpus yields the index: each node
carries the count of sentences satisfying the pattern on its root path
and an inverted list of those sentences.  Counts are non-increasing
along every root-to-leaf path, which is what the greedy candidate
generator exploits.

Index builds shard cleanly: partial indexes over corpus slices merge
into the same structure the sequential build produces.
"""
from __future__ import annotations

import json
import os
from array import array
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

from .corpus import Corpus, Sentence
from .grammars import Grammar, Rule, make_grammar

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class IndexLimits:
    """Enumeration bounds for sketch construction.

    max_gaps caps gap operators per token pattern (full gap patterns
    stay checkable through Grammar.matches even when not enumerated).
    tree_max_nodes caps pattern-tree size for the tree grammar, whose
    unbounded enumeration is combinatorial.  min_count drops index
    nodes covering fewer sentences after the build.
    """

    max_gaps: int = 1
    tree_max_nodes: int = 4
    min_count: int = 1


class DerivationSketch:
    """Trie of the derivation paths one sentence satisfies.

    For the tree grammar the sentence's parse tree is the compact
    description; paths are enumerated from it on first access.
    """

    def __init__(self, sentence: Sentence, grammar: Grammar, limits: IndexLimits):
        self.sentence_id = sentence.id
        self._sentence = sentence
        self._grammar = grammar
        self._limits = limits
        self._root: Optional[dict] = None

    @property
    def root(self) -> dict:
        if self._root is None:
            root: dict = {}
            for path in self._grammar.sentence_paths(
                self._sentence,
                max_gaps=self._limits.max_gaps,
                tree_max_nodes=self._limits.tree_max_nodes,
            ):
                node = root
                for label in path:
                    node = node.setdefault(label, {})
            self._root = root
        return self._root

    def node_count(self) -> int:
        """Number of sketch nodes, excluding the root."""

        def count(node: dict) -> int:
            return len(node) + sum(count(child) for child in node.values())

        return count(self.root)

    def paths(self) -> Iterator[tuple[str, ...]]:
        def walk(node: dict, prefix: tuple[str, ...]) -> Iterator[tuple[str, ...]]:
            for label, child in node.items():
                yield prefix + (label,)
                yield from walk(child, prefix + (label,))

        return walk(self.root, ())


def build_sketch(sentence: Sentence, grammar: Grammar,
                 limits: IndexLimits = IndexLimits()) -> DerivationSketch:
    sketch = DerivationSketch(sentence, grammar, limits)
    if grammar.grammar_id == "tokens_regex":
        sketch.root  # materialize eagerly; token tries are cheap
    return sketch


class IndexNode:
    __slots__ = ("children", "postings")

    def __init__(self):
        self.children: dict[str, IndexNode] = {}
        self.postings: array = array("i")

    @property
    def count(self) -> int:
        return len(self.postings)


class PatternIndex:
    """Merged sketches with per-node counts and inverted sentence lists."""

    def __init__(self, grammar: Grammar, limits: IndexLimits = IndexLimits()):
        self.grammar = grammar
        self.limits = limits
        self.root = IndexNode()
        self.ids: list[int] = []  # dense position -> sentence id
        self._id_set: set[int] = set()
        self._tree_children: Optional[dict[str, list[tuple[str, ...]]]] = None

    # -- construction ------------------------------------------------------

    def merge_sketch(self, sketch: DerivationSketch) -> "PatternIndex":
        if sketch.sentence_id in self._id_set:
            raise ValueError(f"sentence {sketch.sentence_id} already indexed")
        pos = len(self.ids)
        self.ids.append(sketch.sentence_id)
        self._id_set.add(sketch.sentence_id)
        self._merge_node(self.root, sketch.root, pos)
        self._tree_children = None
        return self

    def _merge_node(self, index_node: IndexNode, sketch_node: dict, pos: int) -> None:
        index_node.postings.append(pos)
        for label, sketch_child in sketch_node.items():
            child = index_node.children.get(label)
            if child is None:
                child = IndexNode()
                index_node.children[label] = child
            self._merge_node(child, sketch_child, pos)

    def merge_index(self, other: "PatternIndex") -> "PatternIndex":
        """Absorb a partial index whose postings use global positions."""
        overlap = self._id_set & other._id_set
        if overlap:
            raise ValueError(f"sentences already indexed: {sorted(overlap)[:5]}")
        self.ids.extend(other.ids)
        self._id_set.update(other._id_set)
        _merge_trees(self.root, other.root)
        self._tree_children = None
        return self

    def prune_min_count(self, min_count: int) -> None:
        if min_count <= 1:
            return

        def prune(node: IndexNode) -> None:
            node.children = {
                label: child for label, child in node.children.items()
                if child.count >= min_count
            }
            for child in node.children.values():
                prune(child)

        prune(self.root)
        self._tree_children = None

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.ids)

    def node_at(self, path: Sequence[str]) -> Optional[IndexNode]:
        node = self.root
        for label in path:
            node = node.children.get(label)
            if node is None:
                return None
        return node

    def nodes(self) -> Iterator[tuple[tuple[str, ...], IndexNode]]:
        """All nodes with their paths, root included, in BFS order."""
        queue: deque[tuple[tuple[str, ...], IndexNode]] = deque([((), self.root)])
        while queue:
            path, node = queue.popleft()
            yield path, node
            for label in sorted(node.children):
                queue.append((path + (label,), node.children[label]))

    def node_total(self) -> int:
        return sum(1 for _ in self.nodes()) - 1

    def rule_at(self, path: Sequence[str]) -> Rule:
        return self.grammar.rule_from_path(path)

    def covered_ids(self, node: IndexNode) -> set[int]:
        return {self.ids[p] for p in node.postings}

    def inverted_list(self, node: IndexNode) -> list[int]:
        return sorted(self.ids[p] for p in node.postings)

    def coverage(self, rule: Rule) -> set[int]:
        """Sentence ids satisfying the rule; empty when not indexed."""
        path = self.grammar.path_of(rule)
        if path is None:
            return set()
        node = self.node_at(path)
        if node is None:
            return set()
        return self.covered_ids(node)

    def contains_rule(self, rule: Rule) -> bool:
        path = self.grammar.path_of(rule)
        return path is not None and self.node_at(path) is not None

    def children_of(self, rule: Rule) -> list[Rule]:
        """Rules one derivation step below, satisfied by >= 1 sentence."""
        path = self.grammar.path_of(rule)
        if path is None:
            return []
        node = self.node_at(path)
        if node is None:
            return []
        return [self.rule_at(p) for p, _ in self.child_entries(path, node)]

    def child_entries(self, path: Sequence[str], node: IndexNode) -> list[tuple[tuple[str, ...], IndexNode]]:
        """(path, node) pairs one derivation step below the given node."""
        path = tuple(path)
        if self.grammar.grammar_id == "tokens_regex":
            return [(path + (label,), node.children[label]) for label in sorted(node.children)]
        registry = self._tree_child_registry()
        key = self.grammar.canonical_of_path(path)
        out = []
        for child_path in registry.get(key, []):
            child = self.node_at(child_path)
            if child is not None:
                out.append((child_path, child))
        return out

    def canonical_of_path(self, path: Sequence[str]) -> str:
        return self.grammar.canonical_of_path(path)

    def parents_of(self, rule: Rule) -> list[Rule]:
        """Derivation parents present in the index (plus the root rule)."""
        return [p for p in self.grammar.parent_rules(rule) if p.is_root or self.contains_rule(p)]

    def _tree_child_registry(self) -> dict[str, list[tuple[str, ...]]]:
        # the trie only materializes canonical construction orders, so a
        # tree pattern's derivation children are found by indexing every
        # node under each of its one-leaf-removal parents
        if self._tree_children is None:
            registry: dict[str, list[tuple[str, ...]]] = {}
            for path, _node in self.nodes():
                if not path:
                    continue
                rule = self.rule_at(path)
                for parent in self.grammar.parent_rules(rule):
                    registry.setdefault(parent.canonical, []).append(path)
            for paths in registry.values():
                paths.sort(key=self.grammar.canonical_of_path)
            self._tree_children = registry
        return self._tree_children

    def structural_equal(self, other: "PatternIndex") -> bool:
        """Same sentences, same nodes, same per-node coverage sets."""
        if self._id_set != other._id_set:
            return False

        def eq(a: IndexNode, b: IndexNode) -> bool:
            if set(a.children) != set(b.children):
                return False
            if self.covered_ids(a) != other.covered_ids(b):
                return False
            return all(eq(a.children[k], b.children[k]) for k in a.children)

        return eq(self.root, other.root)

    # -- snapshots ----------------------------------------------------------

    def to_snapshot(self) -> dict:
        nodes: list[list] = []

        def walk(node: IndexNode, parent: int, label: str) -> None:
            me = len(nodes)
            nodes.append([parent, label, list(node.postings)])
            for child_label in sorted(node.children):
                walk(node.children[child_label], me, child_label)

        walk(self.root, -1, "")
        return {
            "v": SNAPSHOT_VERSION,
            "grammar": self.grammar.grammar_id,
            "max_depth": self.grammar.max_depth,
            "limits": {
                "max_gaps": self.limits.max_gaps,
                "tree_max_nodes": self.limits.tree_max_nodes,
                "min_count": self.limits.min_count,
            },
            "ids": self.ids,
            "nodes": nodes,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_snapshot(), fh)

    @classmethod
    def from_snapshot(cls, snap: dict) -> "PatternIndex":
        if snap.get("v") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported index snapshot version {snap.get('v')!r}")
        grammar = make_grammar(snap["grammar"], snap["max_depth"])
        limits = IndexLimits(**snap["limits"])
        index = cls(grammar, limits)
        index.ids = list(snap["ids"])
        index._id_set = set(index.ids)
        nodes = [IndexNode() for _ in snap["nodes"]]
        for i, (parent, label, postings) in enumerate(snap["nodes"]):
            nodes[i].postings = array("i", postings)
            if parent >= 0:
                nodes[parent].children[label] = nodes[i]
        if nodes:
            index.root = nodes[0]
        return index

    @classmethod
    def load(cls, path: str | Path) -> "PatternIndex":
        with open(path, encoding="utf-8") as fh:
            return cls.from_snapshot(json.load(fh))


def _merge_trees(dst: IndexNode, src: IndexNode) -> None:
    dst.postings.extend(src.postings)
    for label, src_child in src.children.items():
        dst_child = dst.children.get(label)
        if dst_child is None:
            dst.children[label] = src_child
        else:
            _merge_trees(dst_child, src_child)


def merge_sketch(index: PatternIndex, sketch: DerivationSketch) -> PatternIndex:
    return index.merge_sketch(sketch)


def _build_slice(sentences: Sequence[Sentence], grammar: Grammar,
                 limits: IndexLimits, offset: int) -> PatternIndex:
    index = PatternIndex(grammar, limits)
    for k, sentence in enumerate(sentences):
        sketch = build_sketch(sentence, grammar, limits)
        # positions are global so shard merges line up with sequential builds
        index.ids.append(sentence.id)
        index._id_set.add(sentence.id)
        index._merge_node(index.root, sketch.root, offset + k)
    return index


def _build_shard(args: tuple) -> PatternIndex:
    sentences, grammar_id, max_depth, limits, offset = args
    grammar = make_grammar(grammar_id, max_depth)
    return _build_slice(sentences, grammar, limits, offset)


def build_index(corpus: Corpus, grammar: Grammar, shards: int = 1,
                limits: IndexLimits = IndexLimits()) -> PatternIndex:
    """Build the pattern index; shards > 1 builds slices in parallel.

    The sharded result is structurally equal to the sequential build.
    """
    if shards < 1:
        raise ValueError("shards must be >= 1")
    sentences = corpus.sentences
    if shards == 1 or len(sentences) < 2 * shards:
        index = _build_slice(sentences, grammar, limits, 0)
    else:
        chunk = (len(sentences) + shards - 1) // shards
        jobs = []
        for i in range(0, len(sentences), chunk):
            jobs.append((sentences[i : i + chunk], grammar.grammar_id,
                         grammar.max_depth, limits, i))
        workers = min(shards, os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_build_shard, jobs)
            index: Optional[PatternIndex] = None
            for part in parts:  # merge as shards finish to bound memory
                if index is None:
                    index = part
                else:
                    index.merge_index(part)
    index.prune_min_count(limits.min_count)
    return index


def coverage(index: PatternIndex, rule: Rule) -> set[int]:
    return index.coverage(rule)
