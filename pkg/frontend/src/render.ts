/**
 * DOM rendering for the annotation views.
 *
 * The query panel shows the rule under review and its sample sentences
 * with the matched tokens highlighted (offsets come from the server, so
 * the client never re-implements pattern matching).  The dashboard is a
 * pure function of GET /state.
 */
import type { QueryJson, SampleJson, SessionState } from "./api.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderSample(sample: SampleJson): HTMLElement {
  const row = el("li", "sample-row");
  const highlighted = new Set<number>();
  for (const [start, end] of sample.spans) {
    for (let i = start; i < end; i++) highlighted.add(i);
  }
  sample.tokens.forEach((token, i) => {
    const span = el("span", highlighted.has(i) ? "tok hit" : "tok", token);
    row.appendChild(span);
    row.appendChild(document.createTextNode(" "));
  });
  return row;
}

export interface QueryCallbacks {
  onAnswer: (queryId: number, answer: "yes" | "no") => void;
}

/**
 * Render the pending query. Both buttons disable themselves on the
 * first click, so a double click produces exactly one POST; the stale
 * (409) path is handled by the controller.
 */
export function renderQuery(
  container: HTMLElement,
  query: QueryJson,
  callbacks: QueryCallbacks,
): void {
  container.replaceChildren();
  const panel = el("div", "query-panel");
  panel.appendChild(el("h2", "rule", query.rule.display));
  panel.appendChild(
    el(
      "p",
      "meta",
      `matches ${query.coverage_size} sentences (examples below), ` +
        `query ${query.queries_used + 1} of ${query.budget}`,
    ),
  );
  panel.appendChild(
    el("p", "prompt", "Do sentences like these belong to the positive class?"),
  );
  const list = el("ul", "samples");
  for (const sample of query.samples) {
    list.appendChild(renderSample(sample));
  }
  panel.appendChild(list);

  const controls = el("div", "controls");
  const yes = el("button", "answer yes", "YES");
  const no = el("button", "answer no", "NO");
  const fire = (answer: "yes" | "no") => {
    if (yes.disabled) return; // already advancing
    yes.disabled = true;
    no.disabled = true;
    controls.classList.add("advancing");
    callbacks.onAnswer(query.query_id, answer);
  };
  yes.addEventListener("click", () => fire("yes"));
  no.addEventListener("click", () => fire("no"));
  controls.appendChild(yes);
  controls.appendChild(no);
  panel.appendChild(controls);
  container.appendChild(panel);
}

export function renderDone(container: HTMLElement, state: SessionState): void {
  container.replaceChildren();
  const panel = el("div", "query-panel done");
  panel.appendChild(el("h2", "rule", "Session complete"));
  panel.appendChild(
    el(
      "p",
      "meta",
      `${state.queries_used} queries answered, ${state.rules.length} rules accepted, ` +
        `${state.positives} positive sentences found.`,
    ),
  );
  container.appendChild(panel);
}

function sparkline(curve: SessionState["curve"]): SVGElement {
  const width = 220;
  const height = 48;
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "sparkline");
  if (curve.length === 0) return svg;
  const maxPos = Math.max(...curve.map((p) => p.positives), 1);
  const maxQ = Math.max(...curve.map((p) => p.queries), 1);
  const points = curve
    .map((p) => {
      const x = (p.queries / maxQ) * (width - 4) + 2;
      const y = height - 2 - (p.positives / maxPos) * (height - 4);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "currentColor");
  line.setAttribute("stroke-width", "2");
  svg.appendChild(line);
  return svg;
}

export function renderDashboard(container: HTMLElement, state: SessionState): void {
  container.replaceChildren();
  const panel = el("div", "dashboard");

  const budget = el("div", "budget");
  const used = state.budget > 0 ? state.queries_used / state.budget : 1;
  const bar = el("div", "budget-bar");
  const fill = el("div", "budget-fill");
  fill.style.width = `${Math.round(used * 100)}%`;
  bar.appendChild(fill);
  budget.appendChild(
    el("span", "budget-label", `budget ${state.queries_used}/${state.budget}`),
  );
  budget.appendChild(bar);
  panel.appendChild(budget);

  const stats = el("p", "stats");
  let text = `${state.positives} positives across ${state.rules.length} accepted rules`;
  if (state.recall !== undefined) {
    text += `, recall ${(state.recall * 100).toFixed(1)}%`;
  }
  stats.textContent = text;
  panel.appendChild(stats);
  panel.appendChild(sparkline(state.curve));

  const rules = el("ul", "accepted-rules");
  for (const rule of state.rules) {
    rules.appendChild(el("li", "accepted-rule", rule.display));
  }
  panel.appendChild(rules);
  container.appendChild(panel);
}
