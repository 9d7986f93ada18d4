"""YES/NO verification of candidate rules.

The simulated oracle answers from gold labels: YES when at least 80% of
the rule's coverage is positive.  It judges from the full coverage set
by default; a sample-only variant exists for annotator-error studies.
A noise wrapper flips answers with a configured probability.  Human
answers arrive through the HTTP service against the same query shape.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import Corpus
from .grammars import Rule

DEFAULT_PRECISION_THRESHOLD = 0.8
DEFAULT_SAMPLE_COUNT = 5


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleQuery:
    query_id: int
    rule: Rule
    sample_ids: tuple[int, ...]
    coverage_size: int
    issued_at: float = field(default=0.0, compare=False)

    def to_json(self, corpus: Optional[Corpus] = None) -> dict:
        samples = []
        for sid in self.sample_ids:
            entry: dict = {"id": sid}
            if corpus is not None and sid in corpus:
                entry["text"] = corpus[sid].raw_text
                entry["tokens"] = list(corpus[sid].tokens)
            samples.append(entry)
        return {
            "v": 1,
            "query_id": self.query_id,
            "rule": self.rule.to_json(),
            "samples": samples,
            "coverage_size": self.coverage_size,
        }


@dataclass(frozen=True)
class OracleAnswer:
    query_id: int
    answer: bool
    source: str = "simulated"  # or "human"
    latency: float = 0.0


def draw_samples(coverage: set[int], n: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform sample without replacement, capped at the coverage size."""
    if not coverage:
        raise OracleError("cannot sample from empty coverage")
    ordered = np.array(sorted(coverage), dtype=np.int64)
    take = min(n, len(ordered))
    picked = rng.choice(ordered, size=take, replace=False)
    return tuple(int(x) for x in picked)


def make_query(
    query_id: int,
    rule: Rule,
    coverage: set[int],
    rng: np.random.Generator,
    n_samples: int = DEFAULT_SAMPLE_COUNT,
) -> OracleQuery:
    return OracleQuery(
        query_id=query_id,
        rule=rule,
        sample_ids=draw_samples(coverage, n_samples, rng),
        coverage_size=len(coverage),
        issued_at=time.time(),
    )


def coverage_precision(coverage: set[int], corpus: Corpus) -> float:
    if not coverage:
        raise OracleError("empty coverage")
    pos = 0
    for sid in coverage:
        label = corpus[sid].gold_label
        if label is None:
            raise OracleError("simulated oracle requires gold labels")
        pos += int(label)
    return pos / len(coverage)


def simulate_answer(
    coverage: set[int],
    corpus: Corpus,
    threshold: float = DEFAULT_PRECISION_THRESHOLD,
) -> bool:
    """YES iff the positive fraction of the coverage meets the threshold."""
    return coverage_precision(coverage, corpus) >= threshold


class SimulatedOracle:
    """Deterministic gold-label oracle with optional answer noise.

    judge_from_samples answers from the sentences shown to the annotator
    instead of the full coverage set.
    """

    def __init__(
        self,
        corpus: Corpus,
        threshold: float = DEFAULT_PRECISION_THRESHOLD,
        noise: float = 0.0,
        noise_seed: int = 0,
        judge_from_samples: bool = False,
    ):
        self.corpus = corpus
        self.threshold = threshold
        self.noise = noise
        self.judge_from_samples = judge_from_samples
        self._rng = np.random.default_rng(noise_seed)

    def answer(self, query: OracleQuery, coverage: set[int]) -> OracleAnswer:
        pool = set(query.sample_ids) if self.judge_from_samples else coverage
        truth = simulate_answer(pool, self.corpus, self.threshold)
        if self.noise > 0 and self._rng.random() < self.noise:
            truth = not truth
        return OracleAnswer(query_id=query.query_id, answer=truth, source="simulated")
