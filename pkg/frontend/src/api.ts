/**
 * Typed client for the annotation service.
 *
 * The server is the single source of truth: the client never caches
 * state beyond the currently rendered payloads, so a page reload always
 * reconverges on GET responses.
 */

export interface RuleJson {
  grammar: string;
  canonical: string;
  display: string;
}

export interface SampleJson {
  id: number;
  text: string;
  tokens: string[];
  spans: [number, number][];
}

export interface QueryJson {
  v: number;
  query_id: number;
  rule: RuleJson;
  samples: SampleJson[];
  coverage_size: number;
  queries_used: number;
  budget: number;
}

export interface CurvePoint {
  queries: number;
  positives: number;
  recall?: number;
}

export interface SessionState {
  v: number;
  session_id: string;
  corpus: string;
  status: "running" | "awaiting_answer" | "done";
  queries_used: number;
  budget: number;
  positives: number;
  rules: RuleJson[];
  curve: CurvePoint[];
  recall?: number;
}

export type Answer = "yes" | "no";

export type AnswerOutcome =
  | { kind: "applied"; state: SessionState }
  | { kind: "stale" }; // someone answered first; refresh and move on

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function expectJson(response: Response): Promise<unknown> {
  if (!response.ok) {
    throw new ApiError(response.status, await response.text());
  }
  return response.json();
}

export class AnnotationApi {
  constructor(private readonly base: string = "") {}

  private url(path: string): string {
    return this.base + path;
  }

  async pendingQuery(sessionId: string): Promise<QueryJson | null> {
    const response = await fetch(this.url(`/sessions/${sessionId}/query`));
    if (response.status === 204) {
      return null;
    }
    return (await expectJson(response)) as QueryJson;
  }

  /**
   * Submit a verdict. A 409 means the query is no longer pending
   * (already answered, possibly by a double click); that is absorbed
   * into a "stale" outcome so callers refresh instead of failing.
   */
  async submitAnswer(
    sessionId: string,
    queryId: number,
    answer: Answer,
  ): Promise<AnswerOutcome> {
    const response = await fetch(this.url(`/sessions/${sessionId}/answer`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query_id: queryId, answer }),
    });
    if (response.status === 409) {
      return { kind: "stale" };
    }
    const state = (await expectJson(response)) as SessionState;
    return { kind: "applied", state };
  }

  async sessionState(sessionId: string): Promise<SessionState> {
    const response = await fetch(this.url(`/sessions/${sessionId}/state`));
    return (await expectJson(response)) as SessionState;
  }

  async createSession(body: Record<string, unknown>): Promise<string> {
    const response = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = (await expectJson(response)) as { session_id: string };
    return payload.session_id;
  }

  async listCorpora(): Promise<{ name: string; sentences: number }[]> {
    const response = await fetch(this.url("/corpora"));
    return (await expectJson(response)) as { name: string; sentences: number }[];
  }
}
