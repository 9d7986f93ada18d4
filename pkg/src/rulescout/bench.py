"""Reproducible desk-scale experiments on synthetic planted corpora.

The generator plants short phrases that define the positive class:
every positive sentence contains at least one planted phrase, positives
additionally share a small topical context vocabulary (the hook a
sentence scorer can generalize from, standing in for the word-embedding
semantics of real corpora), and a noise parameter controls what
fraction of each phrase's matches are negatives (phrase precision is
about 1 - noise).

Besides discovery strategies, two instance-labeling baselines are
included: uncertainty-sampling active learning and keyword-filtered
sampling.  Comparison and sweep runners emit long-format rows ready for
CSV plotting.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .corpus import Corpus, Sentence
from .engine import Metrics, SessionConfig, SeedSpec, run_session
from .scorer import FeatureMap, train_scorer
from .trie_index import build_index

BASELINE_ACTIVE_LEARNING = "al"
BASELINE_KEYWORD_SAMPLING = "ks"


@dataclass(frozen=True)
class SyntheticSpec:
    n_sentences: int = 10_000
    vocab_size: int = 1_500
    n_planted_rules: int = 8
    plant_min_len: int = 2
    plant_max_len: int = 4
    positive_rate: float = 0.05
    noise: float = 0.1  # expected negative fraction of each phrase's matches
    second_plant_rate: float = 0.15  # positives carrying two phrases overlap coverage
    context_pool: int = 12
    context_per_positive: tuple[int, int] = (2, 3)
    context_noise: float = 0.13  # negative fraction of each context token's matches
    filler_len: tuple[int, int] = (6, 11)
    positive_filler_len: tuple[int, int] = (2, 5)
    zipf_exponent: float = 0.0  # 0 = uniform fillers; raise for a skewed head
    rng_seed: int = 0


@dataclass
class PlantManifest:
    phrases: list[tuple[str, ...]]
    positive_ids: list[set[int]]  # per phrase
    negative_ids: list[set[int]]
    context_tokens: list[str]

    def expected_precision(self, spec: SyntheticSpec) -> float:
        return 1.0 - spec.noise

    def measured_precision(self, i: int) -> float:
        pos, neg = len(self.positive_ids[i]), len(self.negative_ids[i])
        return pos / (pos + neg) if pos + neg else 0.0


def generate_synthetic(spec: SyntheticSpec) -> tuple[Corpus, PlantManifest]:
    """Labeled corpus with known positive-defining phrases.

    Positives carry one planted phrase (sometimes two) plus a few
    topical context tokens; the shared context is what lets a sentence
    scorer rank unexplored rules.  Context tokens are deliberately
    imprecise (context_noise controls how much of their coverage is
    negative); planted phrases land at precision about 1 - noise.
    """
    rng = np.random.default_rng(spec.rng_seed)
    fillers = [f"w{i:04d}" for i in range(spec.vocab_size)]
    ranks = np.arange(1, spec.vocab_size + 1, dtype=np.float64)
    probs = 1.0 / ranks ** spec.zipf_exponent
    probs /= probs.sum()
    context = [f"ctx{i:02d}" for i in range(spec.context_pool)]
    phrases: list[tuple[str, ...]] = []
    for p in range(spec.n_planted_rules):
        length = int(rng.integers(spec.plant_min_len, spec.plant_max_len + 1))
        phrases.append(tuple(f"plant{p:02d}tok{j}" for j in range(length)))

    n = spec.n_sentences
    labels = rng.random(n) < spec.positive_rate
    pos_ids_per_phrase: list[set[int]] = [set() for _ in phrases]
    neg_ids_per_phrase: list[set[int]] = [set() for _ in phrases]
    ctx_pos_counts = np.zeros(spec.context_pool, dtype=np.int64)

    # sentences are kept as lists of atomic units (a filler token or a
    # whole phrase) until the end, so no insertion can split a phrase
    units: list[list[list[str]]] = []

    def fill(count: int) -> list[list[str]]:
        return [[fillers[i]] for i in rng.choice(spec.vocab_size, size=count, p=probs)]

    def insert_unit(sentence_units: list[list[str]], unit: list[str]) -> None:
        at = int(rng.integers(0, len(sentence_units) + 1))
        sentence_units.insert(at, unit)

    for sid in range(1, n + 1):
        positive = bool(labels[sid - 1])
        if positive:
            lo, hi = spec.positive_filler_len
            sent = fill(int(rng.integers(lo, hi + 1)))
            k_ctx = int(rng.integers(spec.context_per_positive[0], spec.context_per_positive[1] + 1))
            for c in rng.choice(spec.context_pool, size=k_ctx, replace=False):
                insert_unit(sent, [context[c]])
                ctx_pos_counts[c] += 1
            first = int(rng.integers(0, len(phrases)))
            chosen = [first]
            if len(phrases) > 1 and rng.random() < spec.second_plant_rate:
                second = int(rng.integers(0, len(phrases)))
                if second != first:
                    chosen.append(second)
            for p in chosen:
                insert_unit(sent, list(phrases[p]))
                pos_ids_per_phrase[p].add(sid)
        else:
            lo, hi = spec.filler_len
            sent = fill(int(rng.integers(lo, hi + 1)))
        units.append(sent)

    negative_positions = np.flatnonzero(~labels)

    def contaminate(extra: list[str], expected_positive: int, noise: float,
                    record: Optional[set[int]] = None) -> None:
        # insert into enough negatives that the token/phrase precision
        # lands near 1 - noise: E[negatives] = positives * noise / (1 - noise)
        want = int(round(expected_positive * noise / (1.0 - noise)))
        want = min(want, len(negative_positions))
        if want <= 0:
            return
        for at in rng.choice(negative_positions, size=want, replace=False):
            insert_unit(units[int(at)], extra)
            if record is not None:
                record.add(int(at) + 1)

    if spec.noise > 0:
        for p, phrase in enumerate(phrases):
            contaminate(list(phrase), len(pos_ids_per_phrase[p]), spec.noise,
                        neg_ids_per_phrase[p])
    if spec.context_noise > 0:
        for c in range(spec.context_pool):
            contaminate([context[c]], int(ctx_pos_counts[c]), spec.context_noise)

    sentences = []
    for sid in range(1, n + 1):
        tokens = tuple(tok for unit in units[sid - 1] for tok in unit)
        sentences.append(
            Sentence(sid, " ".join(tokens), tokens, gold_label=bool(labels[sid - 1]))
        )
    manifest = PlantManifest(
        phrases=phrases,
        positive_ids=pos_ids_per_phrase,
        negative_ids=neg_ids_per_phrase,
        context_tokens=context,
    )
    return Corpus(sentences), manifest


# ---------------------------------------------------------------------------
# instance-labeling baselines


def _instance_metrics(corpus: Corpus, discovered: set[int], curve: list[dict],
                      queries_used: int) -> Metrics:
    gold = corpus.gold_positive_ids()
    recall = len(discovered & gold) / len(gold) if gold else 0.0
    precision = len(discovered & gold) / len(discovered) if discovered else 0.0
    return Metrics(
        rule_recall=recall,
        rule_precision=precision,
        classifier_precision=None,
        classifier_recall=None,
        classifier_f1=None,
        queries_used=queries_used,
        curve=curve,
    )


def baseline_al(
    corpus: Corpus,
    budget: int,
    rng_seed: int,
    seed_positive_ids: Optional[set[int]] = None,
    retrain_every: int = 1,
    features: Optional[FeatureMap] = None,
    scorer_config=None,
) -> Metrics:
    """Uncertainty sampling: label the sentence the scorer is least sure of.

    Each query asks the gold label of one sentence; the scorer retrains
    on the labeled pool.  Discovered positives are the labeled ones.
    """
    from .scorer import ScorerConfig

    cfg = scorer_config or ScorerConfig()
    rng = np.random.default_rng(rng_seed)
    feats = features or FeatureMap(corpus, cfg)
    gold = corpus.gold_positive_ids()
    seed_ids = set(seed_positive_ids or set())
    positives = {corpus.position(i) for i in seed_ids}
    if not positives:
        raise ValueError("active learning needs seed positives")
    labeled_neg: set[int] = set()
    asked: set[int] = set()
    curve: list[dict] = []

    def record(q: int) -> None:
        found = seed_ids | {corpus.sentences[p].id for p in positives}
        point = {"queries": q, "positives": len(found)}
        if gold:
            point["recall"] = len(found & gold) / len(gold)
        curve.append(point)

    record(0)
    scorer = train_scorer(np.array(sorted(positives)), feats, cfg, rng)
    scores = scorer.score_rows(feats.design())
    n = len(corpus)
    for q in range(1, budget + 1):
        entropy_rank = -np.abs(scores - 0.5)
        order = np.lexsort((np.arange(n), -entropy_rank))
        pick = next((int(p) for p in order if p not in asked and p not in positives), None)
        if pick is None:
            break
        asked.add(pick)
        label = corpus.sentences[pick].gold_label
        if label:
            positives.add(pick)
        else:
            labeled_neg.add(pick)
        if q % retrain_every == 0:
            scorer = train_scorer(np.array(sorted(positives)), feats, cfg, rng)
            scores = scorer.score_rows(feats.design())
        record(q)
    discovered = seed_ids | {corpus.sentences[p].id for p in positives}
    return _instance_metrics(corpus, discovered, curve, len(asked))


def baseline_ks(
    corpus: Corpus,
    keywords: list[str],
    budget: int,
    rng_seed: int,
) -> Metrics:
    """Keyword-filtered uniform sampling of instance labels."""
    rng = np.random.default_rng(rng_seed)
    keyset = {k.lower() for k in keywords}
    filtered = [s.id for s in corpus if keyset & set(s.tokens)]
    gold = corpus.gold_positive_ids()
    discovered: set[int] = set()
    curve: list[dict] = [{"queries": 0, "positives": 0, "recall": 0.0 if gold else None}]
    order = list(rng.permutation(np.array(filtered, dtype=np.int64))) if filtered else []
    asked = 0
    for sid in order[:budget]:
        asked += 1
        if corpus[int(sid)].gold_label:
            discovered.add(int(sid))
        point = {"queries": asked, "positives": len(discovered)}
        if gold:
            point["recall"] = len(discovered & gold) / len(gold)
        curve.append(point)
    return _instance_metrics(corpus, discovered, curve, asked)


# ---------------------------------------------------------------------------
# comparisons and sweeps


@dataclass
class RunRow:
    strategy: str
    seed: int
    queries: int
    positives: int
    recall: Optional[float]
    final_f1: Optional[float]


CSV_HEADER = ["strategy", "seed", "queries", "positives", "recall", "final_f1"]


def rows_to_csv(rows: Iterable[RunRow], path: str | Path) -> None:
    """Long-format results; one row per (strategy, seed, query count)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([
                row.strategy, row.seed, row.queries, row.positives,
                "" if row.recall is None else f"{row.recall:.6f}",
                "" if row.final_f1 is None else f"{row.final_f1:.6f}",
            ])


def _curve_rows(strategy: str, seed: int, metrics: Metrics) -> list[RunRow]:
    rows = []
    for point in metrics.curve:
        rows.append(RunRow(
            strategy=strategy,
            seed=seed,
            queries=point["queries"],
            positives=point["positives"],
            recall=point.get("recall"),
            final_f1=None,
        ))
    if rows:
        rows[-1].final_f1 = metrics.classifier_f1
    return rows


def run_comparison(
    corpus: Corpus,
    strategies: list[str],
    budget: int,
    seeds: list[int],
    seed_rule: str,
    base_config: Optional[SessionConfig] = None,
    keywords: Optional[list[str]] = None,
) -> list[RunRow]:
    """Progressive recall curves for each strategy and seed.

    Strategy names are the engine strategies plus "al" and "ks".
    All runs share the prebuilt index and feature map.
    """
    base = base_config or SessionConfig(budget=budget)
    grammar_cfg = replace(base, budget=budget)
    from .grammars import make_grammar

    grammar = make_grammar(base.grammar_id, base.max_depth)
    index = build_index(corpus, grammar, shards=base.shards, limits=base.limits)
    features = FeatureMap(corpus, base.scorer)
    seed_cov = {s.id for s in corpus if grammar.matches(grammar.parse(seed_rule), s)}

    rows: list[RunRow] = []
    for strategy in strategies:
        for seed in seeds:
            if strategy == BASELINE_ACTIVE_LEARNING:
                metrics = baseline_al(
                    corpus, budget, seed, seed_positive_ids=seed_cov,
                    features=features, scorer_config=base.scorer,
                )
            elif strategy == BASELINE_KEYWORD_SAMPLING:
                metrics = baseline_ks(corpus, keywords or [], budget, seed)
            else:
                cfg = replace(grammar_cfg, strategy=strategy, rng_seed=seed)
                result = run_session(corpus, cfg, SeedSpec.rule(seed_rule), index=index)
                metrics = result.metrics
            rows.extend(_curve_rows(strategy, seed, metrics))
    return rows


SWEEP_PARAMS = ("tau", "seed_rule", "k_candidates")


def sweep(
    corpus: Corpus,
    param: str,
    values: list,
    base_config: SessionConfig,
    seed_rule: str,
    seeds: list[int],
) -> list[dict]:
    """Sensitivity sweep over tau, the seed rule, or the candidate count."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}")
    from .grammars import make_grammar

    grammar = make_grammar(base_config.grammar_id, base_config.max_depth)
    index = build_index(corpus, grammar, shards=base_config.shards, limits=base_config.limits)
    out: list[dict] = []
    for value in values:
        for seed in seeds:
            cfg = replace(base_config, rng_seed=seed)
            rule = seed_rule
            if param == "tau":
                cfg = replace(cfg, tau=value)
            elif param == "k_candidates":
                cfg = replace(cfg, candidate_count=int(value))
            else:
                rule = str(value)
            result = run_session(corpus, cfg, SeedSpec.rule(rule), index=index)
            out.append({
                "param": param,
                "value": value,
                "seed": seed,
                "recall": result.metrics.rule_recall,
                "queries": result.metrics.queries_used,
                "f1": result.metrics.classifier_f1,
            })
    return out


def sweep_to_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", "seed", "recall", "queries", "f1"])
        for row in rows:
            writer.writerow([
                row["param"], row["value"], row["seed"],
                "" if row["recall"] is None else f"{row['recall']:.6f}",
                row["queries"],
                "" if row["f1"] is None else f"{row['f1']:.6f}",
            ])
