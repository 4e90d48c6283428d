import { ApiError, ConnectionError, FixtimeClient, resolveBaseUrl } from "./api.js";
import { RequestGate } from "./sequence.js";
import { TriageSession } from "./state.js";
import {
  mount,
  renderHistory,
  renderInsights,
  renderPrediction,
  renderTopics,
  renderWhatIf,
} from "./render.js";
import type { IssueDraft, Overrides, ProjectMetadata } from "./types.js";

const INHERIT = "__inherit__";
const UNASSIGN = "__unassign__";

function byId<T extends HTMLElement>(doc: Document, id: string): T {
  const node = doc.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fillSelect(
  select: HTMLSelectElement,
  values: string[],
  blankLabel: string | null,
): void {
  select.replaceChildren();
  if (blankLabel !== null) {
    const blank = select.ownerDocument.createElement("option");
    blank.value = "";
    blank.textContent = blankLabel;
    select.appendChild(blank);
  }
  for (const value of values) {
    const option = select.ownerDocument.createElement("option");
    option.value = value;
    option.textContent = value;
    select.appendChild(option);
  }
}

function selectedValues(select: HTMLSelectElement): string[] {
  return Array.from(select.selectedOptions).map((o) => o.value).filter((v) => v !== "");
}

function debounce<A extends unknown[]>(fn: (...args: A) => void, ms: number) {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => fn(...args), ms);
  };
}

/** Signals tests (and any observer) that a render pass finished. */
function announce(doc: Document, kind: string): void {
  doc.dispatchEvent(new doc.defaultView!.CustomEvent("fixtime:rendered", { detail: { kind } }));
}

export class App {
  readonly doc: Document;
  readonly client: FixtimeClient;
  session: TriageSession | null = null;
  metadata: ProjectMetadata | null = null;
  categories: string[] = [];

  private predictGate = new RequestGate();
  private whatifGate = new RequestGate();

  constructor(doc: Document, client: FixtimeClient) {
    this.doc = doc;
    this.client = client;
  }

  async start(): Promise<void> {
    this.wireForms();
    let projects;
    try {
      projects = await this.client.listProjects();
    } catch (err) {
      this.showBanner(err);
      announce(this.doc, "error");
      return;
    }
    if (projects.length === 0) {
      byId(this.doc, "empty-state").classList.remove("hidden");
      byId(this.doc, "triage-view").classList.add("hidden");
      announce(this.doc, "empty");
      return;
    }
    const select = byId<HTMLSelectElement>(this.doc, "project-select");
    fillSelect(select, projects.map((p) => p.id), null);
    select.addEventListener("change", () => void this.selectProject(select.value));
    await this.selectProject(projects[0]!.id);
  }

  async selectProject(project: string): Promise<void> {
    try {
      this.metadata = await this.client.metadata(project);
    } catch (err) {
      this.showBanner(err);
      announce(this.doc, "error");
      return;
    }
    this.categories = this.metadata.categories.map((c) => c.slug);
    this.session = new TriageSession(project, { summary: "" });
    this.populateDraftSelectors(this.metadata);
    this.populateOverrideSelectors(this.metadata);
    byId(this.doc, "prediction").replaceChildren();
    byId(this.doc, "whatif-result").replaceChildren();
    byId(this.doc, "history").replaceChildren();
    announce(this.doc, "project");
  }

  private populateDraftSelectors(meta: ProjectMetadata): void {
    fillSelect(byId(this.doc, "f-priority"), meta.priorities, "(unset)");
    fillSelect(byId(this.doc, "f-issue-type"), meta.issue_types, "(unset)");
    fillSelect(byId(this.doc, "f-components"), meta.components, null);
    fillSelect(byId(this.doc, "f-labels"), meta.labels, null);
    fillSelect(byId(this.doc, "f-assignee"), meta.assignees, "(unassigned)");
  }

  private populateOverrideSelectors(meta: ProjectMetadata): void {
    fillSelect(byId(this.doc, "w-priority"), meta.priorities, "(keep)");
    fillSelect(byId(this.doc, "w-issue-type"), meta.issue_types, "(keep)");
    fillSelect(byId(this.doc, "w-components"), meta.components, null);
    fillSelect(byId(this.doc, "w-labels"), meta.labels, null);
    const assignee = byId<HTMLSelectElement>(this.doc, "w-assignee");
    fillSelect(assignee, meta.assignees, "(keep)");
    const unassign = this.doc.createElement("option");
    unassign.value = UNASSIGN;
    unassign.textContent = "(unassign)";
    assignee.insertBefore(unassign, assignee.options[1] ?? null);
  }

  readDraft(): IssueDraft {
    const draft: IssueDraft = {
      summary: byId<HTMLInputElement>(this.doc, "f-summary").value,
    };
    const description = byId<HTMLTextAreaElement>(this.doc, "f-description").value;
    if (description.trim()) draft.description = description;
    const priority = byId<HTMLSelectElement>(this.doc, "f-priority").value;
    if (priority) draft.priority = priority;
    const issueType = byId<HTMLSelectElement>(this.doc, "f-issue-type").value;
    if (issueType) draft.issue_type = issueType;
    const components = selectedValues(byId(this.doc, "f-components"));
    if (components.length) draft.components = components;
    const labels = selectedValues(byId(this.doc, "f-labels"));
    if (labels.length) draft.labels = labels;
    const assignee = byId<HTMLSelectElement>(this.doc, "f-assignee").value;
    if (assignee) draft.assignee = assignee;
    return draft;
  }

  readOverrides(): Overrides {
    const overrides: Overrides = {};
    const priority = byId<HTMLSelectElement>(this.doc, "w-priority").value;
    if (priority && priority !== INHERIT) overrides.priority = priority;
    const issueType = byId<HTMLSelectElement>(this.doc, "w-issue-type").value;
    if (issueType) overrides.issue_type = issueType;
    const components = selectedValues(byId(this.doc, "w-components"));
    if (components.length) overrides.components = components;
    const labels = selectedValues(byId(this.doc, "w-labels"));
    if (labels.length) overrides.labels = labels;
    const assignee = byId<HTMLSelectElement>(this.doc, "w-assignee").value;
    if (assignee === UNASSIGN) overrides.assignee = null;
    else if (assignee) overrides.assignee = assignee;
    return overrides;
  }

  async submitDraft(): Promise<void> {
    if (!this.session) return;
    const draft = this.readDraft();
    this.session.draft = draft;
    this.clearFieldErrors();
    let outcome;
    try {
      outcome = await this.predictGate.run(() =>
        this.client.predict(this.session!.project, draft),
      );
    } catch (err) {
      this.handleRequestError(err);
      announce(this.doc, "error");
      return;
    }
    if (outcome.stale) return;
    this.session.setBaseline(outcome.value);
    mount(
      byId(this.doc, "prediction"),
      renderPrediction(this.doc, outcome.value, this.categories),
    );
    byId(this.doc, "whatif-result").replaceChildren();
    this.renderHistoryList();
    announce(this.doc, "predict");
  }

  async submitWhatIf(): Promise<void> {
    if (!this.session || !this.session.baseline) return;
    const overrides = this.readOverrides();
    let outcome;
    try {
      outcome = await this.whatifGate.run(() =>
        this.client.whatif(this.session!.project, this.session!.draft, overrides),
      );
    } catch (err) {
      this.handleRequestError(err);
      announce(this.doc, "error");
      return;
    }
    if (outcome.stale) return;
    this.session.recordWhatIf(overrides, outcome.value);
    mount(byId(this.doc, "whatif-result"), renderWhatIf(this.doc, outcome.value, this.categories));
    this.renderHistoryList();
    announce(this.doc, "whatif");
  }

  recallHistory(index: number): void {
    if (!this.session) return;
    const entry = this.session.recall(index);
    mount(
      byId(this.doc, "whatif-result"),
      renderWhatIf(this.doc, entry.response, this.categories),
    );
    announce(this.doc, "recall");
  }

  async showInsights(): Promise<void> {
    if (!this.session) return;
    try {
      const [tables, topicReport] = await Promise.all([
        this.client.insights(this.session.project),
        this.client.topics(this.session.project),
      ]);
      mount(byId(this.doc, "insights"), renderInsights(this.doc, tables));
      mount(byId(this.doc, "topics"), renderTopics(this.doc, topicReport));
      announce(this.doc, "insights");
    } catch (err) {
      this.showBanner(err);
      announce(this.doc, "error");
    }
  }

  private renderHistoryList(): void {
    if (!this.session) return;
    mount(
      byId(this.doc, "history"),
      renderHistory(this.doc, this.session.history, (i) => this.recallHistory(i)),
    );
  }

  private wireForms(): void {
    const issueForm = byId<HTMLFormElement>(this.doc, "issue-form");
    issueForm.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitDraft();
    });
    const live = debounce(() => void this.submitDraft(), 250);
    byId(this.doc, "f-summary").addEventListener("input", live);
    byId(this.doc, "f-description").addEventListener("input", live);

    const whatifForm = byId<HTMLFormElement>(this.doc, "whatif-form");
    whatifForm.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitWhatIf();
    });
    byId(this.doc, "w-clear").addEventListener("click", (event) => {
      event.preventDefault();
      whatifForm.reset();
      void this.submitWhatIf();
    });

    byId(this.doc, "tab-triage").addEventListener("click", () => this.showTab("triage"));
    byId(this.doc, "tab-insights").addEventListener("click", () => {
      this.showTab("insights");
      void this.showInsights();
    });
    byId(this.doc, "banner-dismiss").addEventListener("click", () => {
      byId(this.doc, "banner").classList.add("hidden");
    });
  }

  private showTab(which: "triage" | "insights"): void {
    byId(this.doc, "triage-view").classList.toggle("hidden", which !== "triage");
    byId(this.doc, "insights-view").classList.toggle("hidden", which !== "insights");
  }

  private handleRequestError(err: unknown): void {
    if (err instanceof ApiError && err.fields.length > 0) {
      this.markFieldErrors(err.fields, err.message);
      return;
    }
    this.showBanner(err);
  }

  private markFieldErrors(fields: string[], message: string): void {
    for (const field of fields) {
      const slot = this.doc.querySelector(`[data-error-for="${field}"]`);
      if (slot) slot.textContent = message;
    }
  }

  private clearFieldErrors(): void {
    for (const slot of Array.from(this.doc.querySelectorAll("[data-error-for]"))) {
      slot.textContent = "";
    }
  }

  private showBanner(err: unknown): void {
    const banner = byId(this.doc, "banner");
    const text = byId(this.doc, "banner-text");
    text.textContent =
      err instanceof ConnectionError
        ? `Cannot reach the prediction service: ${err.message}`
        : err instanceof Error
          ? err.message
          : String(err);
    banner.classList.remove("hidden");
  }
}

export function initApp(doc: Document, client?: FixtimeClient): App {
  const resolved =
    client ?? new FixtimeClient(resolveBaseUrl(doc, doc.defaultView?.location.search ?? ""));
  const app = new App(doc, resolved);
  void app.start();
  return app;
}
