from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from rulescout.corpus import Sentence, tokenize
from rulescout.grammars import GrammarError, TreeNode, make_grammar
from tests.conftest import scan_coverage


@pytest.fixture(scope="module")
def tg():
    return make_grammar("tokens_regex", max_depth=10)


@pytest.fixture(scope="module")
def dg():
    return make_grammar("tree_match", max_depth=10)


def sent(text: str, sid: int = 1) -> Sentence:
    return Sentence(sid, text, tuple(tokenize(text)))


# -- tokens_regex matching ---------------------------------------------------


def test_phrase_coverage_on_example_corpus(tg, example_corpus):
    rule = tg.parse("best way to")
    assert scan_coverage(example_corpus, tg, rule) == {1, 3, 6}


def test_root_matches_everything(tg, example_corpus):
    root = tg.parse("*")
    assert root.is_root
    assert scan_coverage(example_corpus, tg, root) == {1, 2, 3, 4, 5, 6}


def test_plus_gap_requires_a_token_between(tg):
    rule = tg.parse("shuttle + hotel")
    assert tg.matches(rule, sent("shuttle to the hotel"))
    assert tg.matches(rule, sent("the shuttle to a nice hotel please"))
    assert not tg.matches(rule, sent("shuttle hotel"))
    assert not tg.matches(rule, sent("hotel by shuttle"))


def test_star_gap_allows_adjacency(tg):
    rule = tg.parse("shuttle * hotel")
    assert tg.matches(rule, sent("shuttle hotel"))
    assert tg.matches(rule, sent("shuttle to the hotel"))
    assert not tg.matches(rule, sent("hotel shuttle"))


def test_literal_runs_must_be_contiguous(tg):
    rule = tg.parse("best way")
    assert not tg.matches(rule, sent("best in every way"))
    assert tg.matches(rule, sent("the best way home"))


def test_pattern_anchors_anywhere(tg):
    rule = tg.parse("way to")
    assert tg.matches(rule, sent("is there a way to go"))
    assert tg.matches(rule, sent("way to go"))


def test_escaped_literals_round_trip(tg):
    rule = tg.parse(r"a \+ b")
    assert tg.matches(rule, sent("a + b"))
    assert not tg.matches(rule, sent("a x b"))
    assert tg.parse(rule.display) == rule


def test_parse_rejects_edge_gaps(tg):
    with pytest.raises(GrammarError, match="between tokens"):
        tg.parse("+ hello")
    with pytest.raises(GrammarError, match="between tokens"):
        tg.parse("hello +")
    with pytest.raises(GrammarError, match="adjacent"):
        tg.parse("a + * b")


def test_parse_depth_exceeded():
    g = make_grammar("tokens_regex", max_depth=3)
    with pytest.raises(GrammarError, match="depth exceeded"):
        g.parse("a b c d")


def test_token_rule_depth_counts_gaps(tg):
    assert tg.rule_depth(tg.parse("a + b")) == 3
    assert tg.rule_depth(tg.parse("a b c")) == 3
    assert tg.rule_depth(tg.parse("*")) == 0


@given(st.lists(st.sampled_from(["red", "blue", "go", "+", "*", "x"]), min_size=1, max_size=6))
def test_display_parse_round_trip_tokens(words):
    g = make_grammar("tokens_regex", max_depth=10)
    # treat every word as a literal: build via escaped display text
    text = " ".join(w if w not in ("+", "*") else "\\" + w for w in words)
    rule = g.parse(text)
    assert g.parse(rule.display) == rule


def test_parent_rules_tokens(tg):
    # one derivation step back: the trailing literal goes, and a gap
    # goes together with the literal it introduced
    rule = tg.parse("a + b c")
    (parent,) = tg.parent_rules(rule)
    assert parent.display == "a + b"
    (grand,) = tg.parent_rules(parent)
    assert grand.display == "a"
    (root,) = tg.parent_rules(grand)
    assert root.is_root
    assert tg.parent_rules(tg.root()) == []


def test_match_spans_leftmost(tg):
    spans = tg.match_spans(tg.parse("b + d"), sent("a b c d b d"))
    assert spans == [(1, 2), (3, 4)]
    assert tg.match_spans(tg.root(), sent("a b")) == []


# -- tree_match --------------------------------------------------------------


def hand_tree() -> Sentence:
    # "my work is a good job": is -> work -> my, is -> job -> {a, good}
    return Sentence(
        1, "my work is a good job",
        ("my", "work", "is", "a", "good", "job"),
        ("DET", "NOUN", "VERB", "DET", "ADJ", "NOUN"),
        ((2, 1), (1, 0), (2, 5), (5, 3), (5, 4)),
    )


def test_tree_match_hand_built(dg):
    rule = dg.parse("/is/NOUN ∧ job")
    assert dg.matches(rule, hand_tree())


def test_tree_match_fails_without_the_edge(dg):
    rule = dg.parse("/is/NOUN ∧ job")
    # move "job" under "work": "is" keeps a NOUN child but loses "job"
    moved = Sentence(
        1, "my work is a good job",
        ("my", "work", "is", "a", "good", "job"),
        ("DET", "NOUN", "VERB", "DET", "ADJ", "NOUN"),
        ((2, 1), (1, 0), (1, 5), (5, 3), (5, 4)),
    )
    assert not dg.matches(rule, moved)


def test_tree_terminal_matches_form_or_pos(dg):
    assert dg.matches(dg.parse("VERB"), hand_tree())
    assert dg.matches(dg.parse("is"), hand_tree())
    assert not dg.matches(dg.parse("WILD"), hand_tree())


def test_tree_descendant_is_transitive(dg):
    assert dg.matches(dg.parse("is//my"), hand_tree())
    assert not dg.matches(dg.parse("is/my"), hand_tree())


def test_tree_match_requires_parse(dg):
    with pytest.raises(GrammarError, match="missing parse"):
        dg.matches(dg.parse("is"), sent("is this parsed"))


def test_tree_conjunction_is_commutative(dg):
    a = dg.parse("/is/NOUN ∧ job")
    b = dg.parse("/is/job ∧ NOUN")
    assert a.canonical == b.canonical
    assert a == b


def test_tree_nested_groups_round_trip(dg):
    rule = dg.parse("a/(b/c ∧ //d) ∧ e")
    again = dg.parse(rule.display)
    assert again == rule
    # structure: root a with children (b -> c), descendant d, child e
    root = rule.pattern
    assert root.term == "a"
    assert {(e, c.term) for e, c in root.constraints} == {("/", "b"), ("//", "d"), ("/", "e")}


def test_tree_parse_error_position(dg):
    with pytest.raises(GrammarError, match="position"):
        dg.parse("a/(b ∧")


def test_tree_depth_is_node_count(dg):
    assert dg.rule_depth(dg.parse("a/b ∧ c")) == 3
    g = make_grammar("tree_match", max_depth=2)
    with pytest.raises(GrammarError, match="depth exceeded"):
        g.parse("a/b ∧ c")


def test_tree_parent_rules_are_leaf_removals(dg):
    rule = dg.parse("a/b ∧ c")
    parents = {p.display for p in dg.parent_rules(rule)}
    assert parents == {"/a/b", "/a/c"}
    (only,) = dg.parent_rules(dg.parse("a"))
    assert only.is_root


def test_tree_match_spans_are_embedding_tokens(dg):
    spans = dg.match_spans(dg.parse("/is/NOUN ∧ job"), hand_tree())
    flat = {i for a, b in spans for i in range(a, b)}
    assert 2 in flat and 5 in flat  # "is" and "job"


@st.composite
def small_trees(draw, depth=0):
    term = draw(st.sampled_from(["a", "b", "NOUN", "x/y", "c"]))
    n_children = 0 if depth >= 2 else draw(st.integers(0, 2))
    constraints = []
    for _ in range(n_children):
        edge = draw(st.sampled_from(["/", "//"]))
        constraints.append((edge, draw(small_trees(depth=depth + 1))))
    return TreeNode.build(term, constraints)


@given(small_trees())
@settings(max_examples=60)
def test_tree_display_round_trip(node):
    g = make_grammar("tree_match", max_depth=20)
    rule = g._rule(node)
    assert g.parse(rule.display) == rule


@given(small_trees())
@settings(max_examples=60)
def test_tree_path_round_trip(node):
    g = make_grammar("tree_match", max_depth=20)
    rule = g._rule(node)
    assert g.rule_from_path(g.path_of(rule)) == rule
    assert g.canonical_of_path(g.path_of(rule)) == rule.canonical


def test_matches_is_pure(tg, example_corpus):
    rule = tg.parse("best way to")
    first = [tg.matches(rule, s) for s in example_corpus]
    second = [tg.matches(rule, s) for s in example_corpus]
    assert first == second


def test_rule_json_export(tg):
    payload = tg.parse("best way to").to_json()
    assert payload == {
        "grammar": "tokens_regex",
        "canonical": "best\x1fway\x1fto",
        "display": "best way to",
    }
