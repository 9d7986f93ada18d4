"""Pluggable sentence scorer estimating the probability of being positive.

The default is a logistic model over hashed token 1-2 gram counts,
trained on discovered positives against randomly sampled negatives and
retrained as the oracle confirms new rules.  Negatives may contain
unlabeled positives; that label noise is accepted.  An averaged
pretrained-embedding feature block can be enabled by pointing the config
at a text embedding file (one "token v1 v2 ... vd" per line).

Scores feed the benefit of a rule: the summed probabilities of the
covered sentences not yet in the positive set.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import sparse

from .corpus import Corpus


@dataclass(frozen=True)
class ScorerConfig:
    feature_dim: int = 2 ** 18
    use_bigrams: bool = True
    negative_ratio: float = 3.0
    epochs: int = 300
    learning_rate: float = 5.0
    l2: float = 1e-5
    rescore_threshold: float = 0.3
    rescore_period: int = 3
    embeddings_path: Optional[str] = None


def _bucket(kind: bytes, text: str, dim: int) -> int:
    return zlib.crc32(kind + text.encode("utf-8")) % dim


class FeatureMap:
    """Sparse hashed-ngram design matrix over a corpus, built once.

    The corpus is immutable, so rows are reused across every retraining
    and scoring pass of a session.
    """

    def __init__(self, corpus: Corpus, config: ScorerConfig):
        self.config = config
        self.dim = config.feature_dim
        rows: list[int] = []
        cols: list[int] = []
        for pos, sent in enumerate(corpus.sentences):
            toks = sent.tokens
            for tok in toks:
                rows.append(pos)
                cols.append(_bucket(b"1:", tok, self.dim))
            if config.use_bigrams:
                for a, b in zip(toks, toks[1:]):
                    rows.append(pos)
                    cols.append(_bucket(b"2:", a + "\x1f" + b, self.dim))
        data = np.ones(len(rows), dtype=np.float32)
        mat = sparse.coo_matrix(
            (data, (rows, cols)), shape=(len(corpus), self.dim), dtype=np.float32
        ).tocsr()
        mat.sum_duplicates()
        # l2-normalize rows so long sentences do not dominate
        norms = np.sqrt(mat.multiply(mat).sum(axis=1)).A.ravel()
        norms[norms == 0] = 1.0
        self.matrix = sparse.diags(1.0 / norms).dot(mat).tocsr()
        self.embed_block: Optional[np.ndarray] = None
        if config.embeddings_path:
            self.embed_block = _embed_rows(corpus, config.embeddings_path)

    def design(self) -> sparse.csr_matrix:
        if self.embed_block is None:
            return self.matrix
        return sparse.hstack([self.matrix, sparse.csr_matrix(self.embed_block)]).tocsr()


def _embed_rows(corpus: Corpus, path: str) -> np.ndarray:
    vectors: dict[str, np.ndarray] = {}
    dim = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) < 2:
                continue
            vec = np.array([float(x) for x in parts[1:]], dtype=np.float32)
            vectors[parts[0]] = vec
            dim = len(vec)
    out = np.zeros((len(corpus), dim), dtype=np.float32)
    for pos, sent in enumerate(corpus.sentences):
        hits = [vectors[t] for t in sent.tokens if t in vectors]
        if hits:
            out[pos] = np.mean(hits, axis=0)
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -30, 30)))


@dataclass
class LinearScorer:
    """Logistic scorer; deterministic given the training sample."""

    weights: np.ndarray
    bias: float
    config: ScorerConfig

    def score_rows(self, design: sparse.csr_matrix, rows: Optional[np.ndarray] = None) -> np.ndarray:
        mat = design if rows is None else design[rows]
        return _sigmoid(mat.dot(self.weights) + self.bias)

    def save(self, path: str | Path) -> None:
        np.savez_compressed(
            path,
            v=np.array([1]),
            weights=self.weights,
            bias=np.array([self.bias]),
            feature_dim=np.array([self.config.feature_dim]),
        )

    @classmethod
    def load(cls, path: str | Path, config: ScorerConfig = ScorerConfig()) -> "LinearScorer":
        snap = np.load(path)
        if int(snap["v"][0]) != 1:
            raise ValueError("unsupported scorer snapshot version")
        dim = int(snap["feature_dim"][0])
        if dim != config.feature_dim:
            config = replace(config, feature_dim=dim)
        return cls(weights=snap["weights"], bias=float(snap["bias"][0]), config=config)


def train_scorer(
    positive_positions: np.ndarray,
    features: FeatureMap,
    config: ScorerConfig,
    rng: np.random.Generator,
    negative_pool: Optional[np.ndarray] = None,
) -> LinearScorer:
    """Fit the logistic model on positives vs sampled negatives.

    Negatives are `negative_ratio * |P|` sentences drawn uniformly
    without replacement from outside the positive set (restricted to
    negative_pool when given), using the caller's generator, so
    identical seeds give identical scorers.
    """
    pos = np.asarray(sorted(positive_positions), dtype=np.int64)
    if pos.size == 0:
        raise ValueError("no positives")
    design = features.design()
    pool = negative_pool if negative_pool is not None else np.arange(design.shape[0], dtype=np.int64)
    candidates = np.setdiff1d(pool, pos)
    n_neg = min(len(candidates), max(1, int(round(config.negative_ratio * pos.size))))
    if n_neg:
        neg = rng.choice(candidates, size=n_neg, replace=False)
    else:
        neg = np.array([], dtype=np.int64)
    rows = np.concatenate([pos, neg])
    y = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    x = design[rows]

    w = np.zeros(design.shape[1], dtype=np.float64)
    b = 0.0
    m = len(y)
    for _ in range(config.epochs):
        p = _sigmoid(x.dot(w) + b)
        grad_w = x.T.dot(p - y) / m + config.l2 * w
        grad_b = float(np.mean(p - y))
        w -= config.learning_rate * grad_w
        b -= config.learning_rate * grad_b
    return LinearScorer(weights=w, bias=b, config=config)


@dataclass
class ScoreCache:
    """Per-sentence probability cache with a staleness counter.

    Low-scoring sentences may be skipped during lazy rescoring; a
    sentence is refreshed at the latest every rescore_period passes.
    """

    scores: np.ndarray
    staleness: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "ScoreCache":
        return cls(scores=np.zeros(n), staleness=np.zeros(n, dtype=np.int32))

    def copy(self) -> "ScoreCache":
        return ScoreCache(self.scores.copy(), self.staleness.copy())


def score_all(
    scorer: LinearScorer,
    features: FeatureMap,
    cache: ScoreCache,
    lazy: bool = False,
) -> ScoreCache:
    """Refresh the cache; lazy mode rescores only promising or stale rows.

    Lazy passes rescore sentences whose cached score exceeds the
    configured threshold; the rest only once their staleness counter
    reaches rescore_period.
    """
    design = features.design()
    if not lazy:
        cache.scores = scorer.score_rows(design)
        cache.staleness[:] = 0
        return cache
    cfg = scorer.config
    due = (cache.scores > cfg.rescore_threshold) | (
        cache.staleness >= cfg.rescore_period - 1
    )
    rows = np.flatnonzero(due)
    if rows.size:
        cache.scores[rows] = scorer.score_rows(design, rows)
    cache.staleness[~due] += 1
    cache.staleness[due] = 0
    return cache


@dataclass(frozen=True)
class Benefit:
    total: float
    average: float
    new_count: int


def benefit(
    coverage_positions: np.ndarray,
    positive_mask: np.ndarray,
    cache: ScoreCache,
) -> Benefit:
    """Expected number of new positives a rule would add.

    total sums the cached probabilities of covered sentences outside the
    positive set; average divides by their count (0 when the rule adds
    nothing).
    """
    cov = np.asarray(coverage_positions, dtype=np.int64)
    if cov.size == 0:
        return Benefit(0.0, 0.0, 0)
    new = cov[~positive_mask[cov]]
    if new.size == 0:
        return Benefit(0.0, 0.0, 0)
    total = float(cache.scores[new].sum())
    return Benefit(total, total / new.size, int(new.size))
