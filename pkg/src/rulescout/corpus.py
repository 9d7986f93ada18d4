"""Sentence corpus loading and normalization.

Sentences are tokenized (lowercase, punctuation split off) and may carry
POS tags, a dependency tree, and a gold label.  Parses are ingested from
CoNLL-U, never computed here.  A corpus is immutable after load and safe
to share across workers.
"""
from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

_PUNCT = set(string.punctuation)


class CorpusError(ValueError):
    """Raised for malformed corpus files or inconsistent sentences."""


@dataclass(frozen=True)
class Sentence:
    """One tokenized sentence with optional annotations.

    dep_edges, when present, is a list of (head_index, child_index) pairs
    over token indices forming a single tree: exactly one token has no
    head, and no token appears as a child twice.
    """

    id: int
    raw_text: str
    tokens: tuple[str, ...]
    pos_tags: Optional[tuple[str, ...]] = None
    dep_edges: Optional[tuple[tuple[int, int], ...]] = None
    gold_label: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.pos_tags is not None and len(self.pos_tags) != len(self.tokens):
            raise CorpusError(
                f"sentence {self.id}: {len(self.pos_tags)} POS tags for "
                f"{len(self.tokens)} tokens"
            )
        if self.dep_edges is not None:
            _validate_tree(self.id, len(self.tokens), self.dep_edges)

    @property
    def has_parse(self) -> bool:
        return self.dep_edges is not None

    def children_of(self, index: int) -> list[int]:
        """Token indices whose dependency head is `index`."""
        if self.dep_edges is None:
            return []
        return [c for h, c in self.dep_edges if h == index]

    def root_index(self) -> int:
        """Index of the unique token with no dependency head."""
        if self.dep_edges is None:
            raise CorpusError(f"sentence {self.id} has no parse")
        heads = {c for _, c in self.dep_edges}
        for i in range(len(self.tokens)):
            if i not in heads:
                return i
        raise CorpusError(f"sentence {self.id}: no root token")


def _validate_tree(sent_id: int, n: int, edges: Sequence[tuple[int, int]]) -> None:
    children = set()
    parent: dict[int, int] = {}
    for head, child in edges:
        if not (0 <= head < n and 0 <= child < n):
            raise CorpusError(f"sentence {sent_id}: edge ({head},{child}) out of range")
        if child in children:
            raise CorpusError(f"sentence {sent_id}: token {child} has two heads")
        children.add(child)
        parent[child] = head
    roots = [i for i in range(n) if i not in children]
    if len(roots) != 1:
        raise CorpusError(f"sentence {sent_id}: expected one root, found {len(roots)}")
    # walking up from every node must terminate at the root, else a cycle
    for start in children:
        seen = set()
        node = start
        while node in parent:
            if node in seen:
                raise CorpusError(f"sentence {sent_id}: dependency cycle at token {node}")
            seen.add(node)
            node = parent[node]


class Corpus:
    """Immutable ordered collection of sentences with unique ids."""

    def __init__(self, sentences: Iterable[Sentence]):
        self.sentences: tuple[Sentence, ...] = tuple(sentences)
        self._by_id: dict[int, int] = {}
        for pos, sent in enumerate(self.sentences):
            if sent.id in self._by_id:
                raise CorpusError(f"duplicate sentence id {sent.id}")
            self._by_id[sent.id] = pos
        self.vocab: frozenset[str] = frozenset(
            tok for sent in self.sentences for tok in sent.tokens
        )
        self.pos_vocab: frozenset[str] = frozenset(
            tag for sent in self.sentences if sent.pos_tags for tag in sent.pos_tags
        )

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, sent_id: int) -> Sentence:
        return self.sentences[self._by_id[sent_id]]

    def __contains__(self, sent_id: int) -> bool:
        return sent_id in self._by_id

    def position(self, sent_id: int) -> int:
        """Dense position of a sentence id (stable load order)."""
        return self._by_id[sent_id]

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.sentences]

    def full_vocab(self, include_pos: bool = False) -> frozenset[str]:
        """Token vocabulary, optionally unioned with the POS tag set."""
        if include_pos:
            return self.vocab | self.pos_vocab
        return self.vocab

    @property
    def has_gold(self) -> bool:
        return all(s.gold_label is not None for s in self.sentences)

    def gold_positive_ids(self) -> set[int]:
        return {s.id for s in self.sentences if s.gold_label}


def tokenize(raw_text: str) -> list[str]:
    """Lowercase, split on whitespace, peel punctuation off chunk ends.

    Internal punctuation (don't, u.s) stays attached; a chunk that is all
    punctuation becomes one token per character.  Idempotent on its own
    space-joined output.
    """
    out: list[str] = []
    for chunk in raw_text.lower().split():
        leading: list[str] = []
        trailing: list[str] = []
        while chunk and chunk[0] in _PUNCT:
            leading.append(chunk[0])
            chunk = chunk[1:]
        while chunk and chunk[-1] in _PUNCT:
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(leading)
        if chunk:
            out.append(chunk)
        out.extend(reversed(trailing))
    return out


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a corpus from a JSONL or CoNLL-U file.

    JSONL: one object per line with fields id (int), text (str), optional
    tokens (str[]), pos (str[]), label (bool).  CoNLL-U: standard ten
    column format; a `# label = true|false` comment carries the gold
    label and `# sent_id = N` the id.
    """
    path = Path(path)
    if format == "jsonl":
        return Corpus(_read_jsonl(path))
    if format == "conllu":
        return Corpus(_read_conllu(path))
    raise CorpusError(f"unknown corpus format {format!r}")


def _read_jsonl(path: Path) -> list[Sentence]:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(rec, dict) or "id" not in rec:
                raise CorpusError(f"{path}:{lineno}: record missing 'id'")
            if "text" not in rec and "tokens" not in rec:
                raise CorpusError(f"{path}:{lineno}: record needs 'text' or 'tokens'")
            try:
                sent_id = int(rec["id"])
            except (TypeError, ValueError):
                raise CorpusError(f"{path}:{lineno}: non-integer id {rec['id']!r}")
            text = rec.get("text", "")
            if "tokens" in rec:
                tokens = tuple(str(t).lower() for t in rec["tokens"])
            else:
                tokens = tuple(tokenize(text))
            pos = tuple(rec["pos"]) if rec.get("pos") else None
            edges = None
            if rec.get("dep_edges"):
                edges = tuple((int(h), int(c)) for h, c in rec["dep_edges"])
            label = rec.get("label")
            if label is not None:
                label = bool(label)
            try:
                sentences.append(
                    Sentence(sent_id, text or " ".join(tokens), tokens, pos, edges, label)
                )
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return sentences


def _read_conllu(path: Path) -> list[Sentence]:
    sentences = []
    block: list[str] = []
    comments: list[str] = []
    next_id = 1
    with open(path, encoding="utf-8") as fh:
        for line in list(fh) + [""]:
            line = line.rstrip("\n")
            if line.startswith("#"):
                comments.append(line)
                continue
            if line.strip():
                block.append(line)
                continue
            if block:
                sentences.append(_parse_conllu_block(block, comments, next_id))
                next_id = sentences[-1].id + 1
            block, comments = [], []
    return sentences


def _parse_conllu_block(block: list[str], comments: list[str], default_id: int) -> Sentence:
    sent_id = default_id
    label = None
    text = ""
    for comment in comments:
        body = comment.lstrip("#").strip()
        if "=" in body:
            key, _, value = body.partition("=")
            key, value = key.strip(), value.strip()
            if key == "sent_id":
                try:
                    sent_id = int(value)
                except ValueError:
                    pass
            elif key == "label":
                label = value.lower() == "true"
            elif key == "text":
                text = value
    tokens: list[str] = []
    pos: list[str] = []
    heads: list[int] = []
    for row in block:
        cols = row.split("\t")
        if len(cols) < 8:
            raise CorpusError(f"sentence {sent_id}: CoNLL-U row with {len(cols)} columns")
        if not cols[0].isdigit():  # skip multiword ranges (1-2) and empty nodes (1.1)
            continue
        tokens.append(cols[1].lower())
        pos.append(cols[3])
        try:
            heads.append(int(cols[6]))
        except ValueError:
            raise CorpusError(f"sentence {sent_id}: bad HEAD value {cols[6]!r}")
    edges = tuple((h - 1, i) for i, h in enumerate(heads) if h > 0)
    return Sentence(
        id=sent_id,
        raw_text=text or " ".join(tokens),
        tokens=tuple(tokens),
        pos_tags=tuple(pos),
        dep_edges=edges,
        gold_label=label,
    )


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSONL; load_corpus(save_corpus(c)) round-trips."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent in corpus:
            rec: dict = {"id": sent.id, "text": sent.raw_text, "tokens": list(sent.tokens)}
            if sent.pos_tags is not None:
                rec["pos"] = list(sent.pos_tags)
            if sent.dep_edges is not None:
                rec["dep_edges"] = [list(e) for e in sent.dep_edges]
            if sent.gold_label is not None:
                rec["label"] = sent.gold_label
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
