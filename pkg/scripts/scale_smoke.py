#!/usr/bin/env python3
"""Large-corpus smoke test: index a million-sentence synthetic corpus
with 8 shards and run one hybrid discovery session end to end.

Targets: index build under 15 minutes, whole run under 3 hours.

At this scale the enumeration uses the documented scaled allowance:
depth 3, contiguous patterns only, singleton index nodes pruned
(min_count 2).  Planted phrases are 2-4 tokens, so their 3-token
prefixes carry identical coverage and discovery is unaffected.

Usage: python3 scripts/scale_smoke.py [--n 1000000] [--shards 8]
"""
from __future__ import annotations

import argparse
import json
import resource
import sys
import time

from rulescout.bench import SyntheticSpec, generate_synthetic
from rulescout.engine import DiscoveryEngine, SeedSpec, SessionConfig
from rulescout.grammars import make_grammar
from rulescout.oracle import SimulatedOracle
from rulescout.scorer import ScorerConfig
from rulescout.trie_index import IndexLimits, build_index

SCALE_LIMITS = IndexLimits(max_gaps=0, min_count=2)
SCALE_DEPTH = 3


def log(msg: str) -> None:
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss // 1024
    print(f"[{time.strftime('%H:%M:%S')}] {msg} (peak RSS {rss} MB)", flush=True)


def run_scale_smoke(n: int = 1_000_000, shards: int = 8, budget: int = 100,
                    rng_seed: int = 0) -> dict:
    total_started = time.time()
    spec = SyntheticSpec(
        n_sentences=n, vocab_size=5_000, zipf_exponent=1.05,
        n_planted_rules=8, positive_rate=0.05, noise=0.1, rng_seed=7,
    )
    log(f"generating {n} sentences")
    corpus, manifest = generate_synthetic(spec)
    log(f"generated; {len(corpus.gold_positive_ids())} gold positives")

    grammar = make_grammar("tokens_regex", SCALE_DEPTH)
    index_started = time.time()
    index = build_index(corpus, grammar, shards=shards, limits=SCALE_LIMITS)
    index_seconds = time.time() - index_started
    log(f"index built with {shards} shards in {index_seconds:.0f}s, "
        f"{index.node_total()} nodes")

    config = SessionConfig(
        max_depth=SCALE_DEPTH, limits=SCALE_LIMITS, strategy="hybrid",
        budget=budget, rng_seed=rng_seed,
        scorer=ScorerConfig(epochs=150),
    )
    seed_rule = " ".join(manifest.phrases[0][:SCALE_DEPTH])
    log(f"running hybrid session, seed rule {seed_rule!r}, budget {budget}")
    engine = DiscoveryEngine(corpus, config, SeedSpec.rule(seed_rule), index=index)
    engine.run(SimulatedOracle(corpus))
    metrics = engine.metrics()
    total_seconds = time.time() - total_started
    log(f"session done: {metrics.queries_used} queries, "
        f"recall {metrics.rule_recall:.3f}, {len(engine.accepted)} rules")

    report = {
        "n_sentences": n,
        "shards": shards,
        "index_seconds": index_seconds,
        "total_seconds": total_seconds,
        "index_nodes": index.node_total(),
        "queries": metrics.queries_used,
        "rules": len(engine.accepted),
        "recall": metrics.rule_recall,
        "index_within_15min": index_seconds < 15 * 60,
        "total_within_3h": total_seconds < 3 * 3600,
    }
    return report


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=1_000_000)
    parser.add_argument("--shards", type=int, default=8)
    parser.add_argument("--budget", type=int, default=100)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()
    report = run_scale_smoke(n=args.n, shards=args.shards, budget=args.budget)
    print(json.dumps(report, indent=2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
    ok = report["index_within_15min"] and report["total_within_3h"]
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
