/**
 * End-to-end loop against the real annotation service on the demo
 * corpus: a scripted browser session answers every query through the
 * rendered UI and must land on the same accepted rules and positive
 * count as a purely simulated run with the same seed; a double submit
 * causes exactly one state transition.
 */
import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { AnnotationApi } from "../src/api.js";
import { SessionController } from "../src/controller.js";

const PORT = 8841;
const BASE = `http://127.0.0.1:${PORT}`;
const HERE = dirname(fileURLToPath(import.meta.url));

let server: ChildProcess;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const response = await fetch(`${BASE}/corpora`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  throw new Error("fixture server did not come up");
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "rulescout-ui-"));
  server = spawn(
    "python3",
    [join(HERE, "fixture_server.py"), String(PORT), dataDir],
    { stdio: ["ignore", "pipe", "inherit"] },
  );
  await waitForServer();
});

afterAll(() => {
  server?.kill();
});

const SESSION_BODY = {
  corpus: "example",
  seed: { rule: "best way to" },
  strategy: "hybrid",
  budget: 5,
  max_depth: 4,
  max_gaps: 0,
  candidate_count: 200,
  rng_seed: 0,
};

describe("annotation loop against the live service", () => {
  it("scripted session reproduces the simulated run given the same answers", async () => {
    const api = new AnnotationApi(BASE);

    // reference: the same configuration with the server-side oracle
    const simulatedId = await api.createSession({
      ...SESSION_BODY,
      oracle: "simulated",
    });
    const reference = await api.sessionState(simulatedId);
    expect(reference.status).toBe("done");
    expect(reference.queries_used).toBe(5);
    const acceptedCanonicals = new Set(reference.rules.map((r) => r.canonical));

    // scripted: drive the UI, answering YES exactly when the displayed
    // rule is one the simulated session accepted (determinism makes the
    // query sequences line up)
    const humanId = await api.createSession({ ...SESSION_BODY, oracle: "human" });
    document.body.innerHTML = "<div id='q'></div><div id='d'></div>";
    const queryRoot = document.getElementById("q")!;
    const dashboardRoot = document.getElementById("d")!;
    const controller = new SessionController(api, humanId, queryRoot, dashboardRoot);

    let answered = 0;
    for (; answered < 20; answered++) {
      await controller.refresh();
      if (queryRoot.textContent?.includes("Session complete")) break;
      const query = await api.pendingQuery(humanId);
      if (query === null) break;
      expect(queryRoot.querySelectorAll(".sample-row").length).toBeGreaterThan(0);
      const button = acceptedCanonicals.has(query.rule.canonical)
        ? (queryRoot.querySelector("button.answer.yes") as HTMLButtonElement)
        : (queryRoot.querySelector("button.answer.no") as HTMLButtonElement);
      button.click();
      await new Promise((resolve) => setTimeout(resolve, 50));
      await controller.refresh();
    }

    const final = await api.sessionState(humanId);
    expect(final.status).toBe("done");
    expect(final.queries_used).toBe(reference.queries_used);
    expect(final.rules.map((r) => r.canonical)).toEqual(
      reference.rules.map((r) => r.canonical),
    );
    expect(final.positives).toBe(reference.positives);
  });

  it("double submit yields exactly one transition", async () => {
    const api = new AnnotationApi(BASE);
    const sessionId = await api.createSession({ ...SESSION_BODY, oracle: "human" });
    const query = await api.pendingQuery(sessionId);
    expect(query).not.toBeNull();
    const before = await api.sessionState(sessionId);

    const first = await api.submitAnswer(sessionId, query!.query_id, "no");
    const second = await api.submitAnswer(sessionId, query!.query_id, "no");
    expect(first.kind).toBe("applied");
    expect(second.kind).toBe("stale"); // 409 absorbed

    const after = await api.sessionState(sessionId);
    expect(after.queries_used).toBe(before.queries_used + 1);
  });

  it("reloading the page reconverges on server state", async () => {
    const api = new AnnotationApi(BASE);
    const sessionId = await api.createSession({ ...SESSION_BODY, oracle: "human" });
    document.body.innerHTML = "<div id='q1'></div><div id='d1'></div>";
    const c1 = new SessionController(
      api, sessionId,
      document.getElementById("q1")!, document.getElementById("d1")!,
    );
    await c1.refresh();
    const renderedRule = document.querySelector("#q1 .rule")?.textContent;

    // a second, fresh controller (a reloaded tab) renders the same thing
    document.body.innerHTML += "<div id='q2'></div><div id='d2'></div>";
    const c2 = new SessionController(
      api, sessionId,
      document.getElementById("q2")!, document.getElementById("d2")!,
    );
    await c2.refresh();
    expect(document.querySelector("#q2 .rule")?.textContent).toBe(renderedRule);
  });
});
