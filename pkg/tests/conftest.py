from __future__ import annotations

import random

import pytest

from rulescout.corpus import Corpus, Sentence, tokenize

# filled by tests/test_acceptance.py; printed in the terminal summary so
# every acceptance criterion gets its own visible pass/fail line
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # pytest loads this file as module "conftest" while the tests import
    # it as "tests.conftest"; read the instance the tests wrote to
    import sys

    results = ACCEPTANCE_RESULTS
    twin = sys.modules.get("tests.conftest")
    if twin is not None and twin.ACCEPTANCE_RESULTS:
        results = twin.ACCEPTANCE_RESULTS
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {name}"
        if detail:
            line += f" :: {detail}"
        terminalreporter.write_line(line)

# Six hotel-concierge messages; positives ask for directions or
# transportation.  "best way to" covers sentences 1, 3 and 6.
EXAMPLE_ROWS = [
    (1, "What is the best way to get to the city?", True),
    (2, "Breakfast is served from 7 am.", False),
    (3, "Best way to reach the airport?", True),
    (4, "Our pool opens at 9 am.", False),
    (5, "I would like a late checkout.", False),
    (6, "The best way to go to the beach?", True),
]


def build_corpus(rows) -> Corpus:
    return Corpus(
        Sentence(i, text, tuple(tokenize(text)), gold_label=label)
        for i, text, label in rows
    )


@pytest.fixture(scope="session")
def example_corpus() -> Corpus:
    return build_corpus(EXAMPLE_ROWS)


def random_token_corpus(rng: random.Random, n_sentences: int, vocab: int,
                        min_len: int = 3, max_len: int = 8,
                        labeled: bool = True) -> Corpus:
    words = [f"t{i}" for i in range(vocab)]
    sentences = []
    for sid in range(1, n_sentences + 1):
        toks = tuple(rng.choice(words) for _ in range(rng.randint(min_len, max_len)))
        label = rng.random() < 0.4 if labeled else None
        sentences.append(Sentence(sid, " ".join(toks), toks, gold_label=label))
    return Corpus(sentences)


def random_parsed_corpus(rng: random.Random, n_sentences: int, vocab: int,
                         min_len: int = 3, max_len: int = 7) -> Corpus:
    words = [f"t{i}" for i in range(vocab)]
    tags = ["NOUN", "VERB", "ADJ", "DET"]
    sentences = []
    for sid in range(1, n_sentences + 1):
        n = rng.randint(min_len, max_len)
        toks = tuple(rng.choice(words) for _ in range(n))
        pos = tuple(rng.choice(tags) for _ in range(n))
        # each non-initial token hangs off an earlier one: always a tree
        edges = tuple((rng.randrange(0, k), k) for k in range(1, n))
        label = rng.random() < 0.4
        sentences.append(Sentence(sid, " ".join(toks), toks, pos, edges, label))
    return Corpus(sentences)


def scan_coverage(corpus: Corpus, grammar, rule) -> set[int]:
    """Test oracle: linear scan with the matcher, no index involved."""
    return {s.id for s in corpus if grammar.matches(rule, s)}
