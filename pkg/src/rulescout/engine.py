"""End-to-end discovery sessions.

A session starts from a seed rule (or a couple of labeled sentences),
builds the pattern index, and iterates: refresh the candidate hierarchy,
pick the next query by the configured strategy, ask the oracle, fold the
answer back in (growing the positive set and retraining the scorer on
YES) until the query budget or the candidate space runs out.

Sessions are deterministic given the rng seed and the answer sequence:
replaying recorded answers reconstructs the exact state, which is how
the HTTP service recovers from restarts.
"""
from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .corpus import Corpus
from .grammars import Grammar, Rule, make_grammar
from .hierarchy import (
    ACCEPTED,
    DEFAULT_CANDIDATE_COUNT,
    REJECTED,
    build_hierarchy,
    cleanup,
    generate_candidates,
)
from .oracle import OracleQuery, SimulatedOracle, make_query
from .scorer import (
    FeatureMap,
    LinearScorer,
    ScoreCache,
    ScorerConfig,
    score_all,
    train_scorer,
)
from .traversal import (
    HYBRID,
    SearchContext,
    TraversalState,
    apply_feedback,
    select_next,
)
from .trie_index import IndexLimits, PatternIndex, build_index

RESULTS_VERSION = 1

RUNNING = "running"
AWAITING_ANSWER = "awaiting_answer"
DONE = "done"


class EngineError(ValueError):
    pass


class StaleQueryError(EngineError):
    """The answered query is not the pending one."""


@dataclass(frozen=True)
class SeedSpec:
    """Either a rule in surface syntax or at least two labeled sentences."""

    rule_text: Optional[str] = None
    sentence_ids: tuple[int, ...] = ()

    @staticmethod
    def rule(text: str) -> "SeedSpec":
        return SeedSpec(rule_text=text)

    @staticmethod
    def sentences(ids) -> "SeedSpec":
        return SeedSpec(sentence_ids=tuple(ids))


@dataclass
class SessionConfig:
    grammar_id: str = "tokens_regex"
    max_depth: int = 10
    limits: IndexLimits = field(default_factory=IndexLimits)
    strategy: str = HYBRID
    tau: float = 5
    budget: int = 100
    candidate_count: int = DEFAULT_CANDIDATE_COUNT
    oracle_threshold: float = 0.8
    samples_per_query: int = 5
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    lazy_rescoring: bool = True
    shards: int = 1
    rng_seed: int = 0


@dataclass
class Metrics:
    rule_recall: Optional[float]
    rule_precision: Optional[float]
    classifier_precision: Optional[float]
    classifier_recall: Optional[float]
    classifier_f1: Optional[float]
    queries_used: int
    curve: list[dict]

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SessionResult:
    rules: list[Rule]
    positive_ids: list[int]
    scorer: LinearScorer
    metrics: Metrics
    queries: list[dict]

    def export_results(self) -> dict:
        """Deterministic results payload (no timestamps, sorted sets)."""
        return {
            "v": RESULTS_VERSION,
            "rules": [r.to_json() for r in self.rules],
            "positives": sorted(self.positive_ids),
            "queries": self.queries,
            "metrics": self.metrics.to_json(),
        }

    def export_bytes(self) -> bytes:
        return json.dumps(self.export_results(), sort_keys=True, ensure_ascii=False).encode("utf-8")


def held_out_split(sent_id: int) -> bool:
    """Fixed 20% evaluation split keyed by a stable hash of the id."""
    return zlib.crc32(f"split:{sent_id}".encode()) % 5 == 0


class DiscoveryEngine:
    """One discovery session, advanced query by query.

    `next_query` parks a pending query (idempotent until answered);
    `submit_answer` folds the verdict in.  `run` drives the loop with a
    simulated oracle.
    """

    def __init__(
        self,
        corpus: Corpus,
        config: SessionConfig,
        seed: SeedSpec,
        index: Optional[PatternIndex] = None,
        features: Optional[FeatureMap] = None,
    ):
        self.corpus = corpus
        self.config = config
        self.seed = seed
        self.grammar: Grammar = make_grammar(config.grammar_id, config.max_depth)
        self.index = index if index is not None else build_index(
            corpus, self.grammar, shards=config.shards, limits=config.limits
        )
        self.features = features if features is not None else FeatureMap(corpus, config.scorer)
        self.rng = np.random.default_rng(config.rng_seed)
        self.events: list[dict] = []
        self.status = RUNNING

        n = len(corpus)
        self.p_mask = np.zeros(n, dtype=bool)
        self.seed_positive_ids: set[int] = set()
        self.accepted: list[Rule] = []
        self.queries: list[dict] = []
        self.pending: Optional[OracleQuery] = None
        self._statuses: dict[str, str] = {}
        self._hierarchy = None
        self._needs_regen = True
        self._gold_positives = (
            self.corpus.gold_positive_ids() if self.corpus.has_gold else None
        )

        self.state = TraversalState(strategy=config.strategy, tau=config.tau)
        self._init_seed()
        self.scorer = self._train()
        self.cache = score_all(self.scorer, self.features, ScoreCache.empty(n), lazy=False)
        self.ctx = SearchContext(self.index, None, self.cache, self.p_mask)
        self.curve: list[dict] = []
        self._record_curve_point()
        self.events.append({
            "type": "created",
            "seed": {"rule": seed.rule_text, "sentences": list(seed.sentence_ids)},
            "strategy": config.strategy,
            "budget": config.budget,
        })

    # -- setup ---------------------------------------------------------------

    def _init_seed(self) -> None:
        cfg = self.config
        if self.seed.rule_text:
            rule = self.grammar.parse(self.seed.rule_text)
            cov = self.index.coverage(rule)
            if not cov and not self.index.contains_rule(rule):
                cov = {s.id for s in self.corpus if self.grammar.matches(rule, s)}
            if not cov:
                raise EngineError("empty seed coverage")
            self._grow_positives(cov)
            self.accepted.append(rule)
            self._statuses[rule.canonical] = ACCEPTED
            self.state.asked.add(rule.canonical)
            # the seed counts as a free YES: its generalizations open the
            # local frontier without spending oracle budget
            self.state.add_local(self.index.parents_of(rule))
        elif self.seed.sentence_ids:
            ids = self.seed.sentence_ids
            if len(ids) < 2:
                raise EngineError("need at least two seed sentences")
            missing = [i for i in ids if i not in self.corpus]
            if missing:
                raise EngineError(f"unknown seed sentence ids {missing}")
            self.seed_positive_ids = set(ids)
            self._grow_positives(set(ids))
            for sid in sorted(ids):
                top = self._top_coverage_rule(sid)
                if top is not None:
                    self.state.add_local([top])
        else:
            raise EngineError("seed must give a rule or sentence ids")

    def _top_coverage_rule(self, sent_id: int) -> Optional[Rule]:
        """Highest-coverage non-root index node covering the sentence."""
        from .trie_index import build_sketch

        sketch = build_sketch(self.corpus[sent_id], self.grammar, self.config.limits)
        best: Optional[tuple[int, str, tuple[str, ...]]] = None
        for path in sketch.paths():
            node = self.index.node_at(path)
            if node is None:
                continue
            key = (-node.count, self.index.canonical_of_path(path), path)
            if best is None or key < best:
                best = key
        if best is None:
            return None
        return self.grammar.rule_from_path(best[2])

    def _grow_positives(self, ids: set[int]) -> None:
        for sid in ids:
            self.p_mask[self.corpus.position(sid)] = True

    def positive_ids(self) -> set[int]:
        return {self.corpus.sentences[p].id for p in np.flatnonzero(self.p_mask)}

    def _train(self) -> LinearScorer:
        positions = np.flatnonzero(self.p_mask)
        return train_scorer(positions, self.features, self.config.scorer, self.rng)

    # -- hierarchy lifecycle ---------------------------------------------------

    def _refresh_hierarchy(self) -> None:
        predicted = np.flatnonzero(self.cache.scores >= 0.5)
        positions = np.union1d(np.flatnonzero(self.p_mask), predicted)
        gen = generate_candidates(self.index, positions, self.config.candidate_count)
        hierarchy = build_hierarchy(gen.rules, self.index)
        for canonical, status in self._statuses.items():
            hierarchy.set_status(canonical, status)
        cleanup(hierarchy, self.p_mask)
        hierarchy.update_scores(self.cache, self.p_mask)
        self._hierarchy = hierarchy
        self.ctx = SearchContext(self.index, hierarchy, self.cache, self.p_mask)
        self.state.reset_universal(hierarchy)
        self._needs_regen = False

    # -- query loop --------------------------------------------------------------

    def next_query(self) -> Optional[OracleQuery]:
        if self.pending is not None:
            return self.pending
        if self.status == DONE:
            return None
        if len(self.queries) >= self.config.budget:
            self._finish("budget")
            return None
        if self._needs_regen:
            self._refresh_hierarchy()
        rule = select_next(self.state, self.ctx)
        if rule is None:
            self._finish("exhausted")
            return None
        coverage = self.index.coverage(rule)
        query = make_query(
            len(self.queries), rule, coverage, self.rng, self.config.samples_per_query
        )
        self.pending = query
        self.status = AWAITING_ANSWER
        self.events.append({
            "type": "query",
            "query_id": query.query_id,
            "rule": rule.to_json(),
            "samples": list(query.sample_ids),
            "coverage_size": query.coverage_size,
        })
        return query

    def submit_answer(self, answer: bool, query_id: Optional[int] = None,
                      source: str = "human") -> None:
        if self.pending is None:
            raise StaleQueryError("no pending query")
        if query_id is not None and query_id != self.pending.query_id:
            raise StaleQueryError(
                f"query {query_id} is not pending (expected {self.pending.query_id})"
            )
        query = self.pending
        rule = query.rule
        self.pending = None
        self.status = RUNNING
        self.queries.append({
            "query_id": query.query_id,
            "rule": rule.to_json(),
            "coverage_size": query.coverage_size,
            "samples": sorted(query.sample_ids),
            "answer": bool(answer),
        })
        self.events.append({
            "type": "answer", "query_id": query.query_id,
            "answer": bool(answer), "source": source,
            "latency": round(time.time() - query.issued_at, 3),
        })
        apply_feedback(self.state, rule, answer, self.ctx)
        self._statuses[rule.canonical] = ACCEPTED if answer else REJECTED
        if self._hierarchy is not None:
            self._hierarchy.set_status(rule.canonical, self._statuses[rule.canonical])
        if answer:
            coverage = self.index.coverage(rule)
            before = int(self.p_mask.sum())
            self.accepted.append(rule)
            self._grow_positives(coverage)
            gained = int(self.p_mask.sum()) - before
            self.events.append({
                "type": "accepted", "query_id": query.query_id,
                "rule": rule.to_json(), "new_positives": gained,
            })
            self.scorer = self._train()
            self.cache = score_all(
                self.scorer, self.features, self.cache,
                lazy=self.config.lazy_rescoring,
            )
            self.ctx.invalidate(self.cache, self.p_mask)
            if self._hierarchy is not None:
                cleanup(self._hierarchy, self.p_mask)
                self._hierarchy.update_scores(self.cache, self.p_mask)
            if gained > 0:
                self._needs_regen = True
        self._record_curve_point()

    def _finish(self, reason: str) -> None:
        if self.status != DONE:
            self.status = DONE
            self.events.append({"type": "done", "reason": reason})

    def run(self, oracle: SimulatedOracle,
            answer_hook: Optional[Callable[[OracleQuery, bool], None]] = None) -> "SessionResult":
        while True:
            query = self.next_query()
            if query is None:
                break
            coverage = self.index.coverage(query.rule)
            verdict = oracle.answer(query, coverage)
            if answer_hook is not None:
                answer_hook(query, verdict.answer)
            self.submit_answer(verdict.answer, query.query_id, source=verdict.source)
        return self.result()

    # -- outputs ----------------------------------------------------------------

    def _record_curve_point(self) -> None:
        point = {"queries": len(self.queries), "positives": int(self.p_mask.sum())}
        if self._gold_positives is not None and self._gold_positives:
            hits = len(self.positive_ids() & self._gold_positives)
            point["recall"] = hits / len(self._gold_positives)
        self.curve.append(point)

    def metrics(self) -> Metrics:
        pos_ids = self.positive_ids()
        rule_recall = rule_precision = None
        if self._gold_positives is not None:
            gold = self._gold_positives
            rule_recall = len(pos_ids & gold) / len(gold) if gold else 0.0
            rule_precision = len(pos_ids & gold) / len(pos_ids) if pos_ids else 0.0
        return Metrics(
            rule_recall=rule_recall,
            rule_precision=rule_precision,
            classifier_precision=None,
            classifier_recall=None,
            classifier_f1=None,
            queries_used=len(self.queries),
            curve=list(self.curve),
        )

    def result(self) -> SessionResult:
        return SessionResult(
            rules=list(self.accepted),
            positive_ids=sorted(self.positive_ids()),
            scorer=self.scorer,
            metrics=self.metrics(),
            queries=list(self.queries),
        )

    def hierarchy_json(self) -> dict:
        if self._needs_regen or self._hierarchy is None:
            self._refresh_hierarchy()
        return self._hierarchy.to_json()


def run_session(
    corpus: Corpus,
    config: SessionConfig,
    seed: SeedSpec,
    oracle: Optional[SimulatedOracle] = None,
    index: Optional[PatternIndex] = None,
) -> SessionResult:
    """Run a full simulated-oracle session and attach evaluation metrics."""
    if oracle is None:
        oracle = SimulatedOracle(corpus, threshold=config.oracle_threshold)
    engine = DiscoveryEngine(corpus, config, seed, index=index)
    result = engine.run(oracle)
    if corpus.has_gold:
        result.metrics = evaluate(
            corpus, set(result.positive_ids), engine.features,
            config.scorer, config.rng_seed, result.metrics,
        )
    return result


def evaluate(
    corpus: Corpus,
    positive_ids: set[int],
    features: FeatureMap,
    scorer_config: ScorerConfig,
    rng_seed: int,
    base: Metrics,
) -> Metrics:
    """Train on the discovered positives and score a fixed held-out split.

    The 20% held-out split is keyed by a hash of the sentence id, so it
    is stable across runs; training positives and sampled negatives come
    from the remaining 80% only.
    """
    gold = corpus.gold_positive_ids()
    held = {s.id for s in corpus if held_out_split(s.id)}
    train_pos = [corpus.position(i) for i in sorted(positive_ids - held)]
    rng = np.random.default_rng(rng_seed + 1)
    if not train_pos:
        return base
    held_positions = np.array([corpus.position(i) for i in sorted(held)], dtype=np.int64)

    train_pool = np.array(
        [corpus.position(s.id) for s in corpus if s.id not in held], dtype=np.int64
    )
    scorer = train_scorer(
        np.asarray(train_pos, dtype=np.int64), features, scorer_config, rng,
        negative_pool=train_pool,
    )
    scores = scorer.score_rows(features.design(), held_positions)
    predicted = {corpus.sentences[p].id for p, sc in zip(held_positions, scores) if sc >= 0.5}
    actual = gold & held
    tp = len(predicted & actual)
    precision = tp / len(predicted) if predicted else 0.0
    recall = tp / len(actual) if actual else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0

    base.classifier_precision = precision
    base.classifier_recall = recall
    base.classifier_f1 = f1
    if gold:
        base.rule_recall = len(positive_ids & gold) / len(gold)
        base.rule_precision = (
            len(positive_ids & gold) / len(positive_ids) if positive_ids else 0.0
        )
    return base


def max_coverage_optimum(sets: list[set[int]], budget: int) -> int:
    """Exact best coverage of any <= budget sets, by exhaustive search.

    Brute force over at most 20 sets; the reference optimum for
    approximation checks.
    """
    from itertools import combinations

    if len(sets) > 20:
        raise EngineError("brute-force optimum limited to 20 sets")
    if budget <= 0:
        return 0
    best = 0
    take = min(budget, len(sets))
    for r in range(1, take + 1):
        for combo in combinations(range(len(sets)), r):
            union: set[int] = set()
            for i in combo:
                union |= sets[i]
            best = max(best, len(union))
    return best
