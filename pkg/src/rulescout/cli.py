"""Command-line entry points.

    rulescout ingest      register a corpus for the service
    rulescout index build build and save a pattern index
    rulescout run         run a discovery session against an oracle
    rulescout theory      verify the score-model guarantees
    rulescout bench       synthetic corpora, comparisons, sweeps
    rulescout serve       start the annotation HTTP service
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .corpus import load_corpus
from .engine import SeedSpec, SessionConfig, run_session
from .grammars import make_grammar
from .oracle import SimulatedOracle
from .trie_index import IndexLimits, build_index


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True, help="corpus file path")
    p.add_argument("--format", default="jsonl", choices=["jsonl", "conllu"])


def _add_index_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grammar", default="tokens_regex",
                   choices=["tokens_regex", "tree_match"])
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--max-gaps", type=int, default=1)
    p.add_argument("--tree-max-nodes", type=int, default=4)
    p.add_argument("--min-count", type=int, default=1)


def _limits(args: argparse.Namespace) -> IndexLimits:
    return IndexLimits(
        max_gaps=args.max_gaps,
        tree_max_nodes=args.tree_max_nodes,
        min_count=args.min_count,
    )


def cmd_ingest(args: argparse.Namespace) -> int:
    from .service import ServiceState

    state = ServiceState(Path(args.data_dir))
    corpus = state.register_corpus(args.name, args.corpus, args.format)
    print(f"registered corpus {args.name!r}: {len(corpus)} sentences "
          f"(gold labels: {'yes' if corpus.has_gold else 'no'})")
    return 0


def cmd_index_build(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus, format=args.format)
    grammar = make_grammar(args.grammar, args.depth)
    started = time.time()
    index = build_index(corpus, grammar, shards=args.shards, limits=_limits(args))
    elapsed = time.time() - started
    n_nodes = index.node_total()
    print(f"indexed {len(corpus)} sentences: {n_nodes} nodes in {elapsed:.1f}s")
    if args.out:
        index.save(args.out)
        print(f"snapshot written to {args.out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus, format=args.format)
    config = SessionConfig(
        grammar_id=args.grammar,
        max_depth=args.depth,
        limits=_limits(args),
        strategy=args.strategy,
        tau=float("inf") if args.tau == "inf" else float(args.tau),
        budget=args.budget,
        candidate_count=args.candidates,
        oracle_threshold=args.oracle_threshold,
        shards=args.shards,
        rng_seed=args.rng_seed,
    )
    if args.seed_rule:
        seed = SeedSpec.rule(args.seed_rule)
    elif args.seed_sentences:
        seed = SeedSpec.sentences(int(x) for x in args.seed_sentences.split(","))
    else:
        print("error: one of --seed-rule / --seed-sentences is required", file=sys.stderr)
        return 2
    if args.oracle != "simulated":
        print("error: the CLI runs simulated-oracle sessions; "
              "use `rulescout serve` for human annotation", file=sys.stderr)
        return 2
    oracle = SimulatedOracle(corpus, threshold=args.oracle_threshold,
                             noise=args.oracle_noise, noise_seed=args.rng_seed)
    result = run_session(corpus, config, seed, oracle=oracle)
    payload = result.export_results()
    if args.out:
        Path(args.out).write_bytes(result.export_bytes())
        print(f"results written to {args.out}")
    metrics = payload["metrics"]
    print(f"queries used: {metrics['queries_used']}/{args.budget}")
    print(f"accepted rules: {len(payload['rules'])}")
    print(f"positives discovered: {len(payload['positives'])}")
    if metrics.get("rule_recall") is not None:
        print(f"recall: {metrics['rule_recall']:.3f}  "
              f"precision: {metrics['rule_precision']:.3f}")
    if metrics.get("classifier_f1") is not None:
        print(f"classifier F1 on held-out: {metrics['classifier_f1']:.3f}")
    return 0


def cmd_theory_check(args: argparse.Namespace) -> int:
    from .theory import ScoreModel, run_all_checks

    model = ScoreModel(
        theta=args.theta, beta=args.beta,
        beta_prime=args.beta_prime, epsilon=args.epsilon,
    )
    rows = run_all_checks(model, trials=args.trials, n=args.n, seed=args.rng_seed)
    width = max(len(name) for name, _, _ in rows)
    failures = 0
    for name, detail, ok in rows:
        status = "PASS" if ok else "FAIL"
        failures += 0 if ok else 1
        print(f"{status}  {name:<{width}}  {detail}")
    return 1 if failures else 0


def cmd_bench_synth(args: argparse.Namespace) -> int:
    from .bench import SyntheticSpec, generate_synthetic
    from .corpus import save_corpus

    spec = SyntheticSpec(
        n_sentences=args.n,
        n_planted_rules=args.plants,
        positive_rate=args.positive_rate,
        noise=args.noise,
        vocab_size=args.vocab,
        rng_seed=args.rng_seed,
    )
    corpus, manifest = generate_synthetic(spec)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} sentences to {args.out}")
    if args.manifest:
        payload = {
            "v": 1,
            "phrases": [" ".join(p) for p in manifest.phrases],
            "positives_per_phrase": [sorted(s) for s in manifest.positive_ids],
            "negatives_per_phrase": [sorted(s) for s in manifest.negative_ids],
            "context_tokens": manifest.context_tokens,
        }
        Path(args.manifest).write_text(json.dumps(payload, sort_keys=True))
        print(f"plant manifest written to {args.manifest}")
    return 0


def cmd_bench_compare(args: argparse.Namespace) -> int:
    from .bench import rows_to_csv, run_comparison

    corpus = load_corpus(args.corpus, format=args.format)
    base = SessionConfig(
        budget=args.budget,
        limits=_limits(args),
        max_depth=args.depth,
        candidate_count=args.candidates,
    )
    rows = run_comparison(
        corpus,
        strategies=args.strategies.split(","),
        budget=args.budget,
        seeds=[int(s) for s in args.seeds.split(",")],
        seed_rule=args.seed_rule,
        base_config=base,
        keywords=args.keywords.split(",") if args.keywords else None,
    )
    rows_to_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_bench_sweep(args: argparse.Namespace) -> int:
    from .bench import sweep, sweep_to_csv

    corpus = load_corpus(args.corpus, format=args.format)
    base = SessionConfig(
        budget=args.budget,
        limits=_limits(args),
        max_depth=args.depth,
        candidate_count=args.candidates,
    )
    values: list = args.values.split(",")
    if args.param in ("tau", "k_candidates"):
        values = [float(v) if args.param == "tau" else int(v) for v in values]
    rows = sweep(corpus, args.param, values, base,
                 seed_rule=args.seed_rule,
                 seeds=[int(s) for s in args.seeds.split(",")])
    sweep_to_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    host = args.host or os.environ.get("RULESCOUT_HOST", "127.0.0.1")
    port = args.port or int(os.environ.get("RULESCOUT_PORT", "8710"))
    app = create_app(Path(args.data_dir))
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rulescout", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="register a corpus for the service")
    _add_corpus_args(p)
    p.add_argument("--name", required=True)
    p.add_argument("--data-dir", default="./rulescout-data")
    p.set_defaults(func=cmd_ingest)

    p_index = sub.add_parser("index", help="index operations")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p = index_sub.add_parser("build", help="build a pattern index")
    _add_corpus_args(p)
    _add_index_args(p)
    p.add_argument("--out", default=None, help="snapshot output path")
    p.set_defaults(func=cmd_index_build)

    p = sub.add_parser("run", help="run a discovery session")
    _add_corpus_args(p)
    _add_index_args(p)
    p.add_argument("--seed-rule", default=None)
    p.add_argument("--seed-sentences", default=None, help="comma-separated ids")
    p.add_argument("--strategy", default="hybrid",
                   choices=["local", "universal", "hybrid", "highp", "highc"])
    p.add_argument("--tau", default="5")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--candidates", type=int, default=10_000)
    p.add_argument("--oracle", default="simulated", choices=["simulated", "human"])
    p.add_argument("--oracle-threshold", type=float, default=0.8)
    p.add_argument("--oracle-noise", type=float, default=0.0)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", default=None, help="results JSON output path")
    p.set_defaults(func=cmd_run)

    p_theory = sub.add_parser("theory", help="score-model verification")
    theory_sub = p_theory.add_subparsers(dest="theory_command", required=True)
    p = theory_sub.add_parser("check", help="run the Monte-Carlo bound checks")
    p.add_argument("--theta", type=float, default=0.7)
    p.add_argument("--beta", type=float, default=0.8)
    p.add_argument("--beta-prime", type=float, default=0.3)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--rng-seed", type=int, default=0)
    p.set_defaults(func=cmd_theory_check)

    p_bench = sub.add_parser("bench", help="synthetic benchmarks")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)

    p = bench_sub.add_parser("synth", help="generate a planted corpus")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--plants", type=int, default=8)
    p.add_argument("--positive-rate", type=float, default=0.05)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--vocab", type=int, default=1_500)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_bench_synth)

    p = bench_sub.add_parser("compare", help="strategy comparison curves")
    _add_corpus_args(p)
    _add_index_args(p)
    p.add_argument("--strategies", default="hybrid,local,universal,highp,highc")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--seed-rule", required=True)
    p.add_argument("--candidates", type=int, default=10_000)
    p.add_argument("--keywords", default=None, help="for the ks baseline")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_compare)

    p = bench_sub.add_parser("sweep", help="parameter sensitivity sweep")
    _add_corpus_args(p)
    _add_index_args(p)
    p.add_argument("--param", required=True, choices=["tau", "seed_rule", "k_candidates"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--seed-rule", required=True)
    p.add_argument("--candidates", type=int, default=10_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_sweep)

    p = sub.add_parser("serve", help="start the annotation HTTP service")
    p.add_argument("--data-dir", default="./rulescout-data")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
