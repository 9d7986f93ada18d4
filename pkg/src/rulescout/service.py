"""HTTP API exposing discovery sessions to the annotation UI.

Single-operator service: corpora are registered by the CLI (or POST
/corpora), sessions advance one pending query at a time, and every
event is appended to a per-session JSONL log before the state summary
is returned.  Replaying the log reconstructs a session exactly (the
engine is deterministic given its seed and the answer sequence), so a
crash between persisting an answer and advancing recovers cleanly and
never re-asks an answered query.

Answers are applied synchronously; at the corpus sizes a human loop
handles, retraining takes well under a second, so the summary returned
by the answer endpoint already reflects the advanced state and the UI
simply polls for the next query.
"""
from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .corpus import Corpus, CorpusError, load_corpus, save_corpus
from .engine import (
    DiscoveryEngine,
    EngineError,
    SeedSpec,
    SessionConfig,
    StaleQueryError,
)
from .oracle import SimulatedOracle
from .scorer import FeatureMap
from .trie_index import IndexLimits, PatternIndex, build_index
from .grammars import make_grammar

API_VERSION = 1


class CorpusIn(BaseModel):
    name: str
    path: str
    format: str = "jsonl"


class SeedIn(BaseModel):
    rule: Optional[str] = None
    sentences: list[int] = Field(default_factory=list)


class SessionIn(BaseModel):
    corpus: str
    seed: SeedIn
    strategy: str = "hybrid"
    budget: int = 100
    oracle: str = "simulated"  # or "human"
    grammar: str = "tokens_regex"
    max_depth: int = 10
    max_gaps: int = 1
    tau: float = 5
    rng_seed: int = 0
    candidate_count: int = 10_000


class AnswerIn(BaseModel):
    query_id: int
    answer: str  # "yes" | "no"


class ServiceSession:
    def __init__(self, session_id: str, corpus_name: str, engine: DiscoveryEngine,
                 oracle: Optional[SimulatedOracle], log_path: Path):
        self.session_id = session_id
        self.corpus_name = corpus_name
        self.engine = engine
        self.oracle = oracle
        self.log_path = log_path
        self.lock = threading.Lock()
        self._flushed = 0

    def flush_events(self) -> None:
        events = self.engine.events
        if self._flushed >= len(events):
            return
        with open(self.log_path, "a", encoding="utf-8") as fh:
            for event in events[self._flushed:]:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
        self._flushed = len(events)

    def advance(self) -> None:
        """Run until the next human decision point (or completion)."""
        if self.oracle is not None:
            self.engine.run(self.oracle)
        else:
            self.engine.next_query()
        self.flush_events()

    def summary(self) -> dict:
        engine = self.engine
        metrics = engine.metrics()
        out = {
            "v": API_VERSION,
            "session_id": self.session_id,
            "corpus": self.corpus_name,
            "status": engine.status,
            "queries_used": len(engine.queries),
            "budget": engine.config.budget,
            "positives": int(engine.p_mask.sum()),
            "rules": [r.to_json() for r in engine.accepted],
            "curve": metrics.curve,
        }
        if metrics.rule_recall is not None:
            out["recall"] = metrics.rule_recall
        return out

    def snapshot(self) -> None:
        path = self.log_path.with_name(f"{self.session_id}.snapshot.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, sort_keys=True)


class ServiceState:
    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        (self.data_dir / "corpora").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self.corpora: dict[str, Corpus] = {}
        self.sessions: dict[str, ServiceSession] = {}
        self.indexes: dict[tuple, PatternIndex] = {}
        self.features: dict[str, FeatureMap] = {}
        self.lock = threading.Lock()

    # -- corpora ----------------------------------------------------------

    def corpus_path(self, name: str) -> Path:
        return self.data_dir / "corpora" / f"{name}.jsonl"

    def register_corpus(self, name: str, path: str | Path, format: str = "jsonl") -> Corpus:
        corpus = load_corpus(path, format=format)
        save_corpus(corpus, self.corpus_path(name))
        self.corpora[name] = corpus
        return corpus

    def get_corpus(self, name: str) -> Optional[Corpus]:
        if name not in self.corpora:
            path = self.corpus_path(name)
            if path.exists():
                self.corpora[name] = load_corpus(path, format="jsonl")
        return self.corpora.get(name)

    def list_corpora(self) -> list[dict]:
        names = {p.stem for p in (self.data_dir / "corpora").glob("*.jsonl")}
        names |= set(self.corpora)
        out = []
        for name in sorted(names):
            corpus = self.get_corpus(name)
            out.append({
                "name": name,
                "sentences": len(corpus) if corpus else 0,
                "has_gold": bool(corpus and corpus.has_gold),
            })
        return out

    # -- sessions ---------------------------------------------------------

    def shared_index(self, name: str, corpus: Corpus, config: SessionConfig) -> PatternIndex:
        key = (name, config.grammar_id, config.max_depth, config.limits)
        if key not in self.indexes:
            grammar = make_grammar(config.grammar_id, config.max_depth)
            self.indexes[key] = build_index(corpus, grammar, limits=config.limits)
        return self.indexes[key]

    def shared_features(self, name: str, corpus: Corpus, config: SessionConfig) -> FeatureMap:
        if name not in self.features:
            self.features[name] = FeatureMap(corpus, config.scorer)
        return self.features[name]

    def create_session(self, body: SessionIn) -> ServiceSession:
        corpus = self.get_corpus(body.corpus)
        if corpus is None:
            raise HTTPException(status_code=404, detail=f"unknown corpus {body.corpus!r}")
        config = SessionConfig(
            grammar_id=body.grammar,
            max_depth=body.max_depth,
            limits=IndexLimits(max_gaps=body.max_gaps),
            strategy=body.strategy,
            tau=body.tau,
            budget=body.budget,
            candidate_count=body.candidate_count,
            rng_seed=body.rng_seed,
        )
        seed = SeedSpec(rule_text=body.seed.rule or None,
                        sentence_ids=tuple(body.seed.sentences))
        oracle: Optional[SimulatedOracle] = None
        if body.oracle == "simulated":
            if not corpus.has_gold:
                raise HTTPException(
                    status_code=422,
                    detail="simulated oracle requires gold labels",
                )
            oracle = SimulatedOracle(corpus, threshold=config.oracle_threshold)
        elif body.oracle != "human":
            raise HTTPException(status_code=422, detail=f"unknown oracle {body.oracle!r}")
        try:
            engine = DiscoveryEngine(
                corpus, config, seed,
                index=self.shared_index(body.corpus, corpus, config),
                features=self.shared_features(body.corpus, corpus, config),
            )
        except (EngineError, CorpusError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session_id = uuid.uuid4().hex[:12]
        log_path = self.data_dir / "sessions" / f"{session_id}.events.jsonl"
        meta = {
            "v": API_VERSION,
            "session_id": session_id,
            "request": body.model_dump(),
        }
        with open(log_path.with_suffix(".meta.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, sort_keys=True)
        session = ServiceSession(session_id, body.corpus, engine, oracle, log_path)
        self.sessions[session_id] = session
        session.advance()
        session.snapshot()
        return session

    def get_session(self, session_id: str) -> ServiceSession:
        session = self.sessions.get(session_id)
        if session is None:
            session = self._load_session(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def _load_session(self, session_id: str) -> Optional[ServiceSession]:
        log_path = self.data_dir / "sessions" / f"{session_id}.events.jsonl"
        meta_path = log_path.with_suffix(".meta.json")
        if not meta_path.exists():
            return None
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        body = SessionIn(**meta["request"])
        answers: list[tuple[int, bool]] = []
        n_disk_events = 0
        if log_path.exists():
            with open(log_path, encoding="utf-8") as fh:
                for line in fh:
                    try:
                        event = json.loads(line)
                    except json.JSONDecodeError:
                        break  # tolerate a truncated trailing line
                    n_disk_events += 1
                    if event.get("type") == "answer":
                        answers.append((event["query_id"], event["answer"]))
        # rebuild by replay: recreate the engine and feed the recorded
        # answers back; determinism guarantees the same query sequence
        session = self.create_session_for_replay(session_id, body, log_path)
        for query_id, answer in answers:
            query = session.engine.next_query()
            if query is None or query.query_id != query_id:
                raise HTTPException(
                    status_code=500,
                    detail=f"session {session_id} log replay diverged",
                )
            session.engine.submit_answer(answer, query_id)
        if session.oracle is not None:
            session.engine.run(session.oracle)
        else:
            session.engine.next_query()
        # replayed events are a prefix already on disk; only genuinely
        # new ones (at most the next pending query) still need flushing
        session._flushed = min(n_disk_events, len(session.engine.events))
        session.flush_events()
        self.sessions[session_id] = session
        return session

    def create_session_for_replay(self, session_id: str, body: SessionIn,
                                  log_path: Path) -> ServiceSession:
        corpus = self.get_corpus(body.corpus)
        if corpus is None:
            raise HTTPException(status_code=404, detail=f"unknown corpus {body.corpus!r}")
        config = SessionConfig(
            grammar_id=body.grammar,
            max_depth=body.max_depth,
            limits=IndexLimits(max_gaps=body.max_gaps),
            strategy=body.strategy,
            tau=body.tau,
            budget=body.budget,
            candidate_count=body.candidate_count,
            rng_seed=body.rng_seed,
        )
        seed = SeedSpec(rule_text=body.seed.rule or None,
                        sentence_ids=tuple(body.seed.sentences))
        oracle = None
        if body.oracle == "simulated":
            oracle = SimulatedOracle(corpus, threshold=config.oracle_threshold)
        engine = DiscoveryEngine(
            corpus, config, seed,
            index=self.shared_index(body.corpus, corpus, config),
            features=self.shared_features(body.corpus, corpus, config),
        )
        return ServiceSession(session_id, body.corpus, engine, oracle, log_path)


def create_app(data_dir: str | Path) -> FastAPI:
    state = ServiceState(Path(data_dir))
    app = FastAPI(title="rulescout", version="0.1.0")
    # the UI is served as static files from a different origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.rulescout = state

    @app.get("/corpora")
    def list_corpora() -> list[dict]:
        return state.list_corpora()

    @app.post("/corpora", status_code=201)
    def add_corpus(body: CorpusIn) -> dict:
        try:
            corpus = state.register_corpus(body.name, body.path, body.format)
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail=f"no such file {body.path!r}")
        except CorpusError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"v": API_VERSION, "name": body.name, "sentences": len(corpus)}

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionIn) -> dict:
        with state.lock:
            session = state.create_session(body)
        return {"v": API_VERSION, "session_id": session.session_id,
                "status": session.engine.status}

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str):
        session = state.get_session(session_id)
        with session.lock:
            query = session.engine.next_query()
            session.flush_events()
            if query is None:
                return Response(status_code=204)
            corpus = session.engine.corpus
            grammar = session.engine.grammar
            payload = query.to_json(corpus)
            for sample in payload["samples"]:
                sent = corpus[sample["id"]]
                sample["spans"] = [
                    list(span) for span in grammar.match_spans(query.rule, sent)
                ]
            payload["queries_used"] = len(session.engine.queries)
            payload["budget"] = session.engine.config.budget
            return payload

    @app.post("/sessions/{session_id}/answer")
    def post_answer(session_id: str, body: AnswerIn) -> dict:
        if body.answer not in ("yes", "no"):
            raise HTTPException(status_code=422, detail="answer must be yes or no")
        session = state.get_session(session_id)
        with session.lock:
            try:
                session.engine.submit_answer(body.answer == "yes", body.query_id)
            except StaleQueryError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            session.flush_events()
            session.advance()
            session.snapshot()
            return session.summary()

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str) -> dict:
        session = state.get_session(session_id)
        with session.lock:
            return session.summary()

    return app
