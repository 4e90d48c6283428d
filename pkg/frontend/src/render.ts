import type {
  InsightTable,
  InsightsResponse,
  PredictionResponse,
  ProbMap,
  TopicReport,
  WhatIfResponse,
} from "./types.js";
import type { HistoryEntry } from "./state.js";

// Every number shown on screen is String(value) of a server-response field.
// Bar widths and cell shading are layout derived from the same values; the
// readable text is never reformatted, so it matches the response exactly.

function el(doc: Document, tag: string, className?: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pct(value: number): string {
  return (value * 100).toFixed(2) + "%";
}

export function renderBars(
  doc: Document,
  probs: ProbMap,
  categories: string[],
  predicted?: string,
): HTMLElement {
  const bars = el(doc, "div", "bars");
  for (const slug of categories) {
    const value = probs[slug] ?? 0;
    const row = el(doc, "div", slug === predicted ? "bar-row predicted" : "bar-row");
    row.appendChild(el(doc, "span", "bar-label", slug));
    const track = el(doc, "div", "bar-track");
    const fill = el(doc, "div", "bar-fill");
    fill.style.width = pct(value);
    track.appendChild(fill);
    row.appendChild(track);
    const valueNode = el(doc, "span", "bar-value", String(value));
    valueNode.dataset.prob = String(value);
    row.appendChild(valueNode);
    bars.appendChild(row);
  }
  return bars;
}

/** 7-row x 4-class strip; rows listed in agreement_flags get `.agrees`. */
export function renderPerView(doc: Document, prediction: PredictionResponse): HTMLElement {
  const { per_view, explanation } = prediction;
  const strip = el(doc, "table", "per-view");
  const body = doc.createElement("tbody");
  for (const [view, probs] of Object.entries(per_view)) {
    const agrees = explanation.agreement_flags.includes(view);
    const row = doc.createElement("tr");
    row.className = agrees ? "view-row agrees" : "view-row";
    row.dataset.view = view;
    const name = el(doc, "th", "view-name", view) as HTMLTableCellElement;
    name.title = explanation.narratives[view] ?? "";
    row.appendChild(name);
    for (const [slug, value] of Object.entries(probs)) {
      const cell = el(doc, "td", "view-cell", String(value)) as HTMLTableCellElement;
      cell.dataset.category = slug;
      cell.dataset.prob = String(value);
      cell.style.opacity = String(0.25 + 0.75 * value);
      const top = explanation.per_view_top[view];
      if (top && top.category === slug) cell.classList.add("view-top");
      row.appendChild(cell);
    }
    body.appendChild(row);
  }
  strip.appendChild(body);
  return strip;
}

export function renderPrediction(
  doc: Document,
  prediction: PredictionResponse,
  categories: string[],
): HTMLElement {
  const box = el(doc, "div", "prediction");
  const headline = el(doc, "div", "verdict");
  headline.appendChild(el(doc, "span", "verdict-display", prediction.predicted_display));
  headline.appendChild(el(doc, "span", "verdict-slug", prediction.predicted));
  box.appendChild(headline);
  box.appendChild(renderBars(doc, prediction.final_probs, categories, prediction.predicted));
  box.appendChild(renderPerView(doc, prediction));
  return box;
}

export function renderDelta(doc: Document, delta: ProbMap, categories: string[]): HTMLElement {
  const row = el(doc, "div", "delta-row");
  for (const slug of categories) {
    const value = delta[slug] ?? 0;
    const cell = el(doc, "span", "delta");
    if (value > 0) cell.classList.add("up");
    else if (value < 0) cell.classList.add("down");
    cell.dataset.category = slug;
    cell.dataset.delta = String(value);
    cell.textContent = String(value);
    row.appendChild(cell);
  }
  return row;
}

export function renderWhatIf(
  doc: Document,
  response: WhatIfResponse,
  categories: string[],
): HTMLElement {
  const panel = el(doc, "div", "whatif-result");
  const baseline = el(doc, "div", "whatif-side baseline");
  baseline.appendChild(el(doc, "h3", undefined, "Baseline"));
  baseline.appendChild(
    renderBars(doc, response.baseline.final_probs, categories, response.baseline.predicted),
  );
  const modified = el(doc, "div", "whatif-side modified");
  modified.appendChild(el(doc, "h3", undefined, "With overrides"));
  modified.appendChild(
    renderBars(doc, response.modified.final_probs, categories, response.modified.predicted),
  );
  panel.appendChild(baseline);
  panel.appendChild(modified);
  const deltaBox = el(doc, "div", "whatif-delta");
  deltaBox.appendChild(el(doc, "h3", undefined, "Delta"));
  deltaBox.appendChild(renderDelta(doc, response.delta, categories));
  panel.appendChild(deltaBox);
  return panel;
}

export function describeOverrides(overrides: HistoryEntry["overrides"]): string {
  const parts = Object.entries(overrides).map(([field, value]) => {
    if (value === null) return `${field}: (cleared)`;
    if (Array.isArray(value)) return `${field}: ${value.join(", ") || "(empty)"}`;
    return `${field}: ${value}`;
  });
  return parts.length ? parts.join(" | ") : "no overrides";
}

export function renderHistory(
  doc: Document,
  entries: HistoryEntry[],
  onRecall: (index: number) => void,
): HTMLElement {
  const list = el(doc, "ul", "history");
  entries.forEach((entry, index) => {
    const item = el(doc, "li", "history-entry");
    const button = el(doc, "button", "history-recall", describeOverrides(entry.overrides));
    button.addEventListener("click", () => onRecall(index));
    item.appendChild(button);
    item.appendChild(
      el(doc, "span", "history-verdict", entry.response.modified.predicted),
    );
    list.appendChild(item);
  });
  return list;
}

function renderStackedTable(
  doc: Document,
  title: string,
  table: InsightTable,
  categories: string[],
): HTMLElement {
  const section = el(doc, "section", "insight-table");
  section.appendChild(el(doc, "h3", undefined, title));
  for (const [rowName, counts] of Object.entries(table.counts)) {
    const proportions = table.proportions[rowName] ?? [];
    const row = el(doc, "div", "stack-row");
    row.appendChild(el(doc, "span", "stack-label", rowName));
    const bar = el(doc, "div", "stack-bar");
    counts.forEach((count, i) => {
      const segment = el(doc, "div", `stack-segment cat-${i}`);
      segment.style.width = pct(proportions[i] ?? 0);
      segment.title = `${categories[i]}: ${String(count)}`;
      segment.dataset.count = String(count);
      bar.appendChild(segment);
    });
    row.appendChild(bar);
    row.appendChild(
      el(doc, "span", "stack-total", String(counts.reduce((a, b) => a + b, 0))),
    );
    section.appendChild(row);
  }
  return section;
}

export function renderInsights(doc: Document, insights: InsightsResponse): HTMLElement {
  const box = el(doc, "div", "insights");
  box.appendChild(
    el(doc, "p", "insights-total", `${insights.project}: ${String(insights.total)} issues`),
  );
  box.appendChild(
    renderStackedTable(doc, "By priority", insights.by_priority, insights.categories),
  );
  box.appendChild(
    renderStackedTable(doc, "By issue type", insights.by_issue_type, insights.categories),
  );
  box.appendChild(
    renderStackedTable(doc, "By component", insights.by_component, insights.categories),
  );
  if (insights.by_topic) {
    box.appendChild(renderStackedTable(doc, "By topic", insights.by_topic, insights.categories));
  }
  return box;
}

export function renderTopics(doc: Document, report: TopicReport): HTMLElement {
  const grid = el(doc, "div", "topic-grid");
  for (const topic of report.topics) {
    const card = el(doc, "div", "topic-card");
    card.appendChild(el(doc, "h4", undefined, `Topic ${String(topic.id)}`));
    card.appendChild(el(doc, "p", "topic-size", `${String(topic.size)} issues`));
    const words = el(doc, "ul", "topic-keywords");
    for (const [token] of topic.keywords) {
      words.appendChild(el(doc, "li", undefined, token));
    }
    card.appendChild(words);
    grid.appendChild(card);
  }
  return grid;
}

/** Swap `container`'s content for `node` — the one mutation point. */
export function mount(container: HTMLElement, node: HTMLElement): void {
  container.replaceChildren(node);
}
