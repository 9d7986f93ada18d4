"""Rule grammars: token-sequence patterns and dependency-tree patterns.

A rule is a bounded derivation of one of two context-free grammars:

* ``tokens_regex``: a sequence of literal tokens, optionally separated by
  gap operators: ``+`` (one or more arbitrary tokens) or ``*`` (zero or
  more).  Literal runs must match contiguous tokens; the whole pattern may
  start and end anywhere in the sentence.  ``shuttle + hotel`` matches
  "shuttle to the hotel" but not "shuttle hotel".
* ``tree_match``: a rooted pattern over the dependency parse: each node
  is a terminal (token form or POS tag) with child (``/``) and descendant
  (``//``) constraints; ``∧`` conjoins several constraints on one node.
  ``/is/NOUN ∧ job`` requires a token "is" with a NOUN child and a "job"
  child.  Terminals match on surface form or POS tag.

Rules have a canonical form (unique per semantically equal pattern) and a
display string that parses back to the same rule.  Each rule also has a
trie path, the label sequence of its derivation; the index module merges
these paths across sentences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .corpus import Sentence

CANON_SEP = "\x1f"
_GAP_MARK = "\x00"
GAP_PLUS = "+"
GAP_STAR = "*"

TOKENS_REGEX = "tokens_regex"
TREE_MATCH = "tree_match"

ROOT_CANONICAL = ""
ROOT_DISPLAY = "*"


class GrammarError(ValueError):
    """Raised for malformed rule text or misuse of a grammar."""


@dataclass(frozen=True)
class Rule:
    """A bounded derivation of a grammar, hashable by canonical form."""

    grammar_id: str
    canonical: str
    display: str = field(compare=False)
    pattern: object = field(compare=False, repr=False)

    @property
    def is_root(self) -> bool:
        return self.canonical == ROOT_CANONICAL

    def sort_key(self) -> tuple[str, str]:
        return (self.grammar_id, self.canonical)

    def to_json(self) -> dict:
        return {"grammar": self.grammar_id, "canonical": self.canonical, "display": self.display}

    def __repr__(self) -> str:  # canonical contains control chars; show display
        return f"Rule({self.grammar_id}, {self.display!r})"


# ---------------------------------------------------------------------------
# tokens_regex


@dataclass(frozen=True)
class TokenPattern:
    """Alternating literal runs and gaps; starts and ends with a literal.

    elements holds literal tokens as plain strings and gaps as
    ("\\x00+", "\\x00*") sentinels, so any corpus token is representable.
    """

    elements: tuple[str, ...]

    def __post_init__(self) -> None:
        elems = self.elements
        for i, el in enumerate(elems):
            if _is_gap(el):
                if i == 0 or i == len(elems) - 1:
                    raise GrammarError("gap must sit between tokens")
                if _is_gap(elems[i - 1]):
                    raise GrammarError("adjacent gaps are not allowed")

    @property
    def depth(self) -> int:
        return len(self.elements)


def _is_gap(element: str) -> bool:
    return element.startswith(_GAP_MARK)


def _gap(kind: str) -> str:
    return _GAP_MARK + kind


def _runs_and_gaps(elements: Sequence[str]) -> tuple[list[list[str]], list[str]]:
    """Split elements into literal runs and the gap kinds between them."""
    runs: list[list[str]] = [[]]
    gaps: list[str] = []
    for el in elements:
        if _is_gap(el):
            gaps.append(el[1])
            runs.append([])
        else:
            runs[-1].append(el)
    return runs, gaps


def _find_run(tokens: Sequence[str], run: list[str], start: int) -> int:
    """Earliest index >= start where run matches contiguously, or -1."""
    n, m = len(tokens), len(run)
    for i in range(start, n - m + 1):
        if list(tokens[i : i + m]) == run:
            return i
    return -1


def token_match_spans(pattern: TokenPattern,
                      tokens: Sequence[str]) -> Optional[list[tuple[int, int]]]:
    """Token spans of each literal run for the leftmost match, or None.

    Greedy leftmost run placement is complete for this pattern class:
    every constraint is of the form "next run starts at or after the
    previous run's end (plus one for a + gap)", so taking the earliest
    feasible occurrence never blocks a later run.
    """
    if not pattern.elements:
        return []
    runs, gaps = _runs_and_gaps(pattern.elements)
    spans: list[tuple[int, int]] = []
    pos = 0
    for i, run in enumerate(runs):
        at = _find_run(tokens, run, pos)
        if at < 0:
            return None
        spans.append((at, at + len(run)))
        pos = at + len(run)
        if i < len(gaps) and gaps[i] == GAP_PLUS:
            pos += 1  # at least one token must sit inside the gap
    return spans


def match_token_pattern(pattern: TokenPattern, tokens: Sequence[str]) -> bool:
    return token_match_spans(pattern, tokens) is not None


def _escape_token(tok: str) -> str:
    if tok in ("+", "*") or tok.startswith("\\"):
        return "\\" + tok
    return tok


def _token_pattern_display(elements: Sequence[str]) -> str:
    parts = []
    for el in elements:
        if _is_gap(el):
            parts.append(el[1])
        else:
            parts.append(_escape_token(el))
    return " ".join(parts)


def parse_token_pattern(text: str) -> tuple[str, ...]:
    """Parse surface syntax: space-separated tokens with +/* gap markers."""
    chunks = text.split()
    if chunks == ["*"]:
        return ()
    elements: list[str] = []
    for i, chunk in enumerate(chunks):
        if chunk == "+":
            elements.append(_gap(GAP_PLUS))
        elif chunk == "*":
            elements.append(_gap(GAP_STAR))
        elif chunk.startswith("\\") and len(chunk) > 1:
            elements.append(chunk[1:].lower())
        else:
            elements.append(chunk.lower())
    try:
        TokenPattern(tuple(elements))
    except GrammarError as exc:
        raise GrammarError(f"at token {_bad_position(elements)}: {exc}") from exc
    return tuple(elements)


def _bad_position(elements: list[str]) -> int:
    for i, el in enumerate(elements):
        if _is_gap(el) and (i == 0 or i == len(elements) - 1 or _is_gap(elements[i - 1])):
            return i
    return 0


# ---------------------------------------------------------------------------
# tree_match


@dataclass(frozen=True)
class TreeNode:
    """Pattern node: a terminal with (edge, child) constraints.

    edge is "/" (child) or "//" (descendant).  Constraints are kept in
    canonical order (child edges first, then by child canonical form) and
    duplicates are collapsed, so structurally equal patterns compare equal.
    """

    term: str
    constraints: tuple[tuple[str, "TreeNode"], ...] = ()

    @staticmethod
    def build(term: str, constraints: Sequence[tuple[str, "TreeNode"]] = ()) -> "TreeNode":
        uniq = sorted(set(constraints), key=lambda ec: (ec[0] != "/", tree_canonical(ec[1])))
        return TreeNode(term, tuple(uniq))

    def size(self) -> int:
        return 1 + sum(child.size() for _, child in self.constraints)


def tree_canonical(node: TreeNode) -> str:
    inner = "".join(CANON_SEP + edge + tree_canonical(c) for edge, c in node.constraints)
    return "(" + node.term + inner + ")"


def _tree_steps(node: TreeNode) -> list[str]:
    """Canonical construction path: one step per node in DFS order.

    Step label is "<parent position>\\x1f<edge>\\x1f<term>"; the root step
    uses parent -1 and edge ".".  Every prefix of this path is itself the
    canonical path of the prefix pattern, which is what lets the index
    share structure between a pattern and its generalizations.
    """
    steps: list[str] = []

    def walk(n: TreeNode, parent_pos: int, edge: str) -> None:
        pos = len(steps)
        steps.append(f"{parent_pos}{CANON_SEP}{edge}{CANON_SEP}{n.term}")
        for e, child in n.constraints:
            walk(child, pos, e)

    walk(node, -1, ".")
    return steps


def _tree_from_steps(steps: Sequence[str]) -> TreeNode:
    terms: list[str] = []
    kids: list[list[tuple[str, int]]] = []
    for step in steps:
        parent_s, edge, term = step.split(CANON_SEP)
        pos = len(terms)
        terms.append(term)
        kids.append([])
        parent = int(parent_s)
        if parent >= 0:
            kids[parent].append((edge, pos))

    def build(pos: int) -> TreeNode:
        return TreeNode.build(terms[pos], [(e, build(c)) for e, c in kids[pos]])

    return build(0)


def _node_terms(sentence: Sentence, idx: int) -> list[str]:
    terms = [sentence.tokens[idx]]
    if sentence.pos_tags is not None:
        tag = sentence.pos_tags[idx]
        if tag and tag != terms[0]:
            terms.append(tag)
    return terms


def _term_matches(term: str, sentence: Sentence, idx: int) -> bool:
    if sentence.tokens[idx] == term:
        return True
    return sentence.pos_tags is not None and sentence.pos_tags[idx] == term


def _descendants(sentence: Sentence, idx: int) -> list[int]:
    out: list[int] = []
    stack = sentence.children_of(idx)
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(sentence.children_of(node))
    return out


def match_tree_pattern(node: TreeNode, sentence: Sentence, at: Optional[int] = None) -> bool:
    """True if the pattern embeds at `at` (or anywhere when at is None).

    Child edges must map to parse children, descendant edges to strict
    descendants.  Constraints are checked independently (two constraints
    may be witnessed by the same parse node).
    """
    if sentence.dep_edges is None:
        raise GrammarError(f"missing parse for sentence {sentence.id}")
    if at is None:
        return any(match_tree_pattern(node, sentence, i) for i in range(len(sentence.tokens)))
    if not _term_matches(node.term, sentence, at):
        return False
    for edge, child in node.constraints:
        pool = sentence.children_of(at) if edge == "/" else _descendants(sentence, at)
        if not any(match_tree_pattern(child, sentence, c) for c in pool):
            return False
    return True


_TREE_SPECIALS = "/∧&() \t"


def _tree_lex(text: str) -> list[tuple[str, int]]:
    """Lex tree syntax into (kind, position) items; kind is one of
    '/', '//', '∧', '(', ')' or a term prefixed with 't:'."""
    items: list[tuple[str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t":
            i += 1
        elif ch == "/":
            if i + 1 < n and text[i + 1] == "/":
                items.append(("//", i))
                i += 2
            else:
                items.append(("/", i))
                i += 1
        elif ch in "∧&":
            items.append(("∧", i))
            i += 1
        elif ch in "()":
            items.append((ch, i))
            i += 1
        else:
            start = i
            term = []
            while i < n and (text[i] not in _TREE_SPECIALS or text[i] == "\\"):
                if text[i] == "\\" and i + 1 < n:
                    term.append(text[i + 1])
                    i += 2
                else:
                    term.append(text[i])
                    i += 1
            items.append(("t:" + "".join(term), start))
    return items


class _TreeParser:
    """Recursive-descent parser for the slash/∧ surface syntax.

    Top-level conjuncts attach to the pattern root; inside a
    parenthesized group they attach to the node that opened the group.
    A conjunct without an explicit edge marker uses the edge that
    introduced its group ("/" at top level).
    """

    def __init__(self, text: str):
        self.text = text
        self.items = _tree_lex(text)
        self.pos = 0

    def error(self, msg: str) -> GrammarError:
        at = self.items[self.pos][1] if self.pos < len(self.items) else len(self.text)
        return GrammarError(f"at position {at}: {msg}")

    def peek(self) -> Optional[str]:
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def take(self) -> str:
        kind = self.peek()
        if kind is None:
            raise self.error("unexpected end of pattern")
        self.pos += 1
        return kind

    def parse(self) -> TreeNode:
        conjuncts = self.parse_conj(default_edge="/")
        if self.peek() is not None:
            raise self.error(f"unexpected {self.items[self.pos][0]!r}")
        # the first chain's leading edge marker is decorative at top
        # level; the remaining conjuncts attach to the pattern root
        root = conjuncts[0][1]
        extra = conjuncts[1:]
        if extra:
            root = TreeNode.build(root.term, list(root.constraints) + extra)
        return root

    def parse_conj(self, default_edge: str) -> list[tuple[str, TreeNode]]:
        """∧-separated chains, each with its (possibly defaulted) edge."""
        out: list[tuple[str, TreeNode]] = []
        while True:
            edge = default_edge
            if self.peek() in ("/", "//"):
                edge = self.take()
            out.append((edge, self.parse_chain()))
            if self.peek() != "∧":
                return out
            self.take()

    def parse_chain(self) -> TreeNode:
        kind = self.take()
        if not kind.startswith("t:"):
            raise self.error("expected a terminal")
        term = kind[2:]
        if not term:
            raise self.error("empty terminal")
        constraints: list[tuple[str, TreeNode]] = []
        if self.peek() in ("/", "//"):
            edge = self.take()
            if self.peek() == "(":
                self.take()
                constraints.extend(self.parse_conj(default_edge=edge))
                if self.peek() != ")":
                    raise self.error("expected ')'")
                self.take()
            else:
                constraints.append((edge, self.parse_chain()))
        return TreeNode.build(term, constraints)


def _escape_term(term: str) -> str:
    out = []
    for ch in term:
        if ch in _TREE_SPECIALS or ch == "\\":
            out.append("\\")
        out.append(ch)
    return "".join(out)


def _tree_display(node: TreeNode, is_root: bool) -> str:
    term = _escape_term(node.term)
    cs = node.constraints
    if not cs:
        return term
    if is_root:
        head = term + cs[0][0] + _tree_display(cs[0][1], False)
        for edge, child in cs[1:]:
            mark = "//" if edge == "//" else ""
            head += " ∧ " + mark + _tree_display(child, False)
        return head
    if len(cs) == 1:
        return term + cs[0][0] + _tree_display(cs[0][1], False)
    parts = []
    for edge, child in cs:
        mark = "//" if edge == "//" else ""
        parts.append(mark + _tree_display(child, False))
    return term + "/(" + " ∧ ".join(parts) + ")"


# ---------------------------------------------------------------------------
# grammar objects


class Grammar:
    """Shared surface for the two rule grammars.

    Subclasses define matching, parsing, bounded per-sentence pattern
    enumeration (as trie paths), and the derivation parent relation used
    by the hierarchy and by local search.
    """

    grammar_id: str = ""

    def __init__(self, max_depth: int = 10):
        if max_depth < 1:
            raise GrammarError("max_depth must be >= 1")
        self.max_depth = max_depth

    def root(self) -> Rule:
        return Rule(self.grammar_id, ROOT_CANONICAL, ROOT_DISPLAY, None)

    def parse(self, text: str) -> Rule:
        raise NotImplementedError

    def matches(self, rule: Rule, sentence: Sentence) -> bool:
        raise NotImplementedError

    def rule_depth(self, rule: Rule) -> int:
        raise NotImplementedError

    def path_of(self, rule: Rule) -> Optional[tuple[str, ...]]:
        """Trie path of the rule, or None when it is not indexable."""
        raise NotImplementedError

    def rule_from_path(self, path: Sequence[str]) -> Rule:
        raise NotImplementedError

    def canonical_of_path(self, path: Sequence[str]) -> str:
        """Canonical form of the rule at a trie path, without building it."""
        raise NotImplementedError

    def sentence_paths(self, sentence: Sentence, max_gaps: int = 1,
                       tree_max_nodes: int = 4) -> Iterator[tuple[str, ...]]:
        """Trie paths of every enumerable pattern the sentence satisfies."""
        raise NotImplementedError

    def parent_rules(self, rule: Rule) -> list[Rule]:
        """Rules one derivation step above (generalizations)."""
        raise NotImplementedError

    def match_spans(self, rule: Rule, sentence: Sentence) -> list[tuple[int, int]]:
        """Token index spans witnessing a match (empty for the root)."""
        raise NotImplementedError

    def check_derivation_depth(self, rule: Rule) -> None:
        if self.rule_depth(rule) > self.max_depth:
            raise GrammarError(
                f"depth exceeded: {self.rule_depth(rule)} > {self.max_depth}"
            )


class TokensRegexGrammar(Grammar):
    grammar_id = TOKENS_REGEX

    def _rule(self, elements: tuple[str, ...]) -> Rule:
        if not elements:
            return self.root()
        return Rule(
            self.grammar_id,
            CANON_SEP.join(elements),
            _token_pattern_display(elements),
            TokenPattern(elements),
        )

    def parse(self, text: str) -> Rule:
        rule = self._rule(parse_token_pattern(text))
        self.check_derivation_depth(rule)
        return rule

    def matches(self, rule: Rule, sentence: Sentence) -> bool:
        if rule.is_root:
            return True
        return match_token_pattern(rule.pattern, sentence.tokens)

    def rule_depth(self, rule: Rule) -> int:
        return 0 if rule.is_root else rule.pattern.depth

    def path_of(self, rule: Rule) -> Optional[tuple[str, ...]]:
        """Path labels: a literal, or a gap fused with the literal after it."""
        if rule.is_root:
            return ()
        labels: list[str] = []
        pending_gap: Optional[str] = None
        for el in rule.pattern.elements:
            if _is_gap(el):
                pending_gap = el
            elif pending_gap is not None:
                labels.append(pending_gap + el)
                pending_gap = None
            else:
                labels.append(el)
        return tuple(labels)

    def rule_from_path(self, path: Sequence[str]) -> Rule:
        elements: list[str] = []
        for label in path:
            if label.startswith(_GAP_MARK):
                elements.append(label[:2])
                elements.append(label[2:])
            else:
                elements.append(label)
        return self._rule(tuple(elements))

    def canonical_of_path(self, path: Sequence[str]) -> str:
        parts: list[str] = []
        for label in path:
            if label.startswith(_GAP_MARK):
                parts.append(label[:2])
                parts.append(label[2:])
            else:
                parts.append(label)
        return CANON_SEP.join(parts)

    def sentence_paths(self, sentence: Sentence, max_gaps: int = 1,
                       tree_max_nodes: int = 4) -> Iterator[tuple[str, ...]]:
        tokens = sentence.tokens
        n = len(tokens)

        def runs_from(start_min: int, budget: int) -> Iterator[tuple[int, int]]:
            for i in range(start_min, n):
                for j in range(i + 1, min(n, i + budget) + 1):
                    yield i, j

        def emit(prefix: list[str], end: int, used: int, gaps_left: int) -> Iterator[tuple[str, ...]]:
            yield tuple(prefix)
            if gaps_left <= 0:
                return
            budget = self.max_depth - used - 1
            if budget <= 0:
                return
            for kind, start_min in ((GAP_PLUS, end + 1), (GAP_STAR, end)):
                for i, j in runs_from(start_min, budget):
                    labels = [_gap(kind) + tokens[i]] + list(tokens[i + 1 : j])
                    yield from emit(prefix + labels, j, used + 1 + (j - i), gaps_left - 1)

        seen: set[tuple[str, ...]] = set()
        for i in range(n):
            for j in range(i + 1, min(n, i + self.max_depth) + 1):
                for path in emit(list(tokens[i:j]), j, j - i, max_gaps):
                    if path not in seen:
                        seen.add(path)
                        yield path

    def parent_rules(self, rule: Rule) -> list[Rule]:
        if rule.is_root:
            return []
        path = self.path_of(rule)
        return [self.rule_from_path(path[:-1])]

    def match_spans(self, rule: Rule, sentence: Sentence) -> list[tuple[int, int]]:
        if rule.is_root:
            return []
        spans = token_match_spans(rule.pattern, sentence.tokens)
        return spans or []


class TreeMatchGrammar(Grammar):
    grammar_id = TREE_MATCH

    def _rule(self, node: TreeNode) -> Rule:
        return Rule(
            self.grammar_id,
            "\x1e".join(_tree_steps(node)),
            "/" + _tree_display(node, True),
            node,
        )

    def parse(self, text: str) -> Rule:
        if text.strip() == "*":
            return self.root()
        rule = self._rule(_TreeParser(text).parse())
        self.check_derivation_depth(rule)
        return rule

    def matches(self, rule: Rule, sentence: Sentence) -> bool:
        if sentence.dep_edges is None:
            raise GrammarError(f"missing parse for sentence {sentence.id}")
        if rule.is_root:
            return True
        return match_tree_pattern(rule.pattern, sentence)

    def rule_depth(self, rule: Rule) -> int:
        return 0 if rule.is_root else rule.pattern.size()

    def path_of(self, rule: Rule) -> Optional[tuple[str, ...]]:
        if rule.is_root:
            return ()
        return tuple(_tree_steps(rule.pattern))

    def rule_from_path(self, path: Sequence[str]) -> Rule:
        if not path:
            return self.root()
        return self._rule(_tree_from_steps(path))

    def canonical_of_path(self, path: Sequence[str]) -> str:
        return "\x1e".join(path)

    def sentence_paths(self, sentence: Sentence, max_gaps: int = 1,
                       tree_max_nodes: int = 4) -> Iterator[tuple[str, ...]]:
        if sentence.dep_edges is None:
            raise GrammarError(f"missing parse for sentence {sentence.id}")
        limit = min(tree_max_nodes, self.max_depth)
        n = len(sentence.tokens)
        frontier: dict[str, TreeNode] = {}
        for idx in range(n):
            for term in _node_terms(sentence, idx):
                node = TreeNode.build(term)
                frontier.setdefault(tree_canonical(node), node)
        seen = dict(frontier)
        for canon in sorted(frontier):
            yield tuple(_tree_steps(frontier[canon]))
        size = 1
        while frontier and size < limit:
            nxt: dict[str, TreeNode] = {}
            for node in frontier.values():
                for ext in self._extensions(node, sentence):
                    canon = tree_canonical(ext)
                    if canon not in seen and ext.size() == size + 1:
                        seen[canon] = ext
                        nxt[canon] = ext
            for canon in sorted(nxt):
                yield tuple(_tree_steps(nxt[canon]))
            frontier = nxt
            size += 1

    def _extensions(self, pattern: TreeNode, sentence: Sentence) -> Iterator[TreeNode]:
        """All one-node extensions of the pattern satisfied by the sentence."""
        embeddings = self._embeddings(pattern, sentence)
        grown: set[str] = set()
        for emb in embeddings:
            for pat_pos, tree_idx in enumerate(emb):
                for edge, pool in (
                    ("/", sentence.children_of(tree_idx)),
                    ("//", _descendants(sentence, tree_idx)),
                ):
                    for t in pool:
                        for term in _node_terms(sentence, t):
                            ext = _attach(pattern, pat_pos, edge, TreeNode.build(term))
                            canon = tree_canonical(ext)
                            if canon not in grown:
                                grown.add(canon)
                                yield ext

    def _embeddings(self, pattern: TreeNode, sentence: Sentence) -> list[list[int]]:
        """All maps from pattern nodes (DFS order) to parse indices."""
        order: list[TreeNode] = []
        parents: list[tuple[int, str]] = []

        def flatten(node: TreeNode, parent: int, edge: str) -> None:
            order.append(node)
            parents.append((parent, edge))
            me = len(order) - 1
            for e, child in node.constraints:
                flatten(child, me, e)

        flatten(pattern, -1, ".")
        results: list[list[int]] = []

        def assign(pos: int, image: list[int]) -> None:
            if pos == len(order):
                results.append(list(image))
                return
            parent, edge = parents[pos]
            if parent < 0:
                pool = range(len(sentence.tokens))
            elif edge == "/":
                pool = sentence.children_of(image[parent])
            else:
                pool = _descendants(sentence, image[parent])
            for idx in pool:
                if _term_matches(order[pos].term, sentence, idx):
                    image.append(idx)
                    assign(pos + 1, image)
                    image.pop()

        assign(0, [])
        return results

    def parent_rules(self, rule: Rule) -> list[Rule]:
        if rule.is_root:
            return []
        if rule.pattern.size() == 1:
            return [self.root()]
        out: dict[str, Rule] = {}
        for reduced in _leaf_removals(rule.pattern):
            parent = self._rule(reduced)
            out[parent.canonical] = parent
        return [out[c] for c in sorted(out)]

    def match_spans(self, rule: Rule, sentence: Sentence) -> list[tuple[int, int]]:
        if rule.is_root or sentence.dep_edges is None:
            return []
        embeddings = self._embeddings(rule.pattern, sentence)
        if not embeddings:
            return []
        return sorted((idx, idx + 1) for idx in set(embeddings[0]))


def _attach(node: TreeNode, target_pos: int, edge: str, leaf: TreeNode) -> TreeNode:
    """Re-build the pattern with `leaf` constrained under DFS position target_pos."""
    counter = [0]

    def rebuild(n: TreeNode) -> TreeNode:
        me = counter[0]
        counter[0] += 1
        new_cs = [(e, rebuild(c)) for e, c in n.constraints]
        if me == target_pos:
            new_cs.append((edge, leaf))
        return TreeNode.build(n.term, new_cs)

    return rebuild(node)


def _leaf_removals(node: TreeNode) -> list[TreeNode]:
    out: list[TreeNode] = []

    def drop(n: TreeNode, skip: tuple[int, int]) -> TreeNode:
        cs = [
            (e, drop(c, skip))
            for i, (e, c) in enumerate(n.constraints)
            if (id(n), i) != (skip[0], skip[1])
        ]
        return TreeNode.build(n.term, cs)

    def visit(n: TreeNode) -> None:
        for i, (e, c) in enumerate(n.constraints):
            if not c.constraints:
                out.append(drop(node, (id(n), i)))
            visit(c)

    # removal is keyed by object identity of the parent, so rebuild a copy
    # with unique node objects first
    def clone(n: TreeNode) -> TreeNode:
        return TreeNode(n.term, tuple((e, clone(c)) for e, c in n.constraints))

    node = clone(node)
    visit(node)
    return out


def make_grammar(grammar_id: str, max_depth: int = 10) -> Grammar:
    if grammar_id == TOKENS_REGEX:
        return TokensRegexGrammar(max_depth)
    if grammar_id == TREE_MATCH:
        return TreeMatchGrammar(max_depth)
    raise GrammarError(f"unknown grammar {grammar_id!r}")
