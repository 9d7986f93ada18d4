/**
 * Glue between the API client and the rendered views.
 *
 * The loop is poll-driven (the human is the slow side): refresh the
 * pending query and the dashboard every second, render, and on an
 * answer click submit then immediately refresh.  A stale submission
 * (someone else answered, or a double event) is absorbed by refreshing
 * to the server's current pending query with a notice.
 */
import { AnnotationApi, QueryJson } from "./api.js";
import { renderDashboard, renderDone, renderQuery } from "./render.js";

export interface ControllerOptions {
  pollMs?: number;
  notice?: (message: string) => void;
}

export class SessionController {
  private lastRenderedQuery: number | null = null;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: AnnotationApi,
    private readonly sessionId: string,
    private readonly queryRoot: HTMLElement,
    private readonly dashboardRoot: HTMLElement,
    private readonly options: ControllerOptions = {},
  ) {}

  async refresh(): Promise<void> {
    const state = await this.api.sessionState(this.sessionId);
    renderDashboard(this.dashboardRoot, state);
    if (state.status === "done") {
      renderDone(this.queryRoot, state);
      this.lastRenderedQuery = null;
      return;
    }
    const query = await this.api.pendingQuery(this.sessionId);
    if (query === null) {
      renderDone(this.queryRoot, await this.api.sessionState(this.sessionId));
      this.lastRenderedQuery = null;
      return;
    }
    if (query.query_id !== this.lastRenderedQuery) {
      this.renderPending(query);
    }
  }

  private renderPending(query: QueryJson): void {
    this.lastRenderedQuery = query.query_id;
    renderQuery(this.queryRoot, query, {
      onAnswer: (queryId, answer) => void this.answer(queryId, answer),
    });
  }

  async answer(queryId: number, answer: "yes" | "no"): Promise<void> {
    const outcome = await this.api.submitAnswer(this.sessionId, queryId, answer);
    if (outcome.kind === "stale") {
      this.options.notice?.(
        "That query was already answered; showing the current one.",
      );
      this.lastRenderedQuery = null; // force a re-render on refresh
    }
    await this.refresh();
  }

  start(): void {
    const pollMs = this.options.pollMs ?? 1000;
    const tick = async () => {
      if (this.stopped) return;
      try {
        await this.refresh();
      } catch (error) {
        this.options.notice?.(`connection problem: ${String(error)}`);
      }
      this.timer = setTimeout(tick, pollMs);
    };
    void tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
  }
}
