import type { IssueDraft, Overrides, PredictionResponse, WhatIfResponse } from "./types.js";

export interface HistoryEntry {
  overrides: Overrides;
  response: WhatIfResponse;
}

function cloneOverrides(overrides: Overrides): Overrides {
  const copy: Overrides = { ...overrides };
  if (copy.components) copy.components = [...copy.components];
  if (copy.labels) copy.labels = [...copy.labels];
  return copy;
}

export function overridesEqual(a: Overrides, b: Overrides): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}

/**
 * One triage conversation: a draft issue, its baseline prediction, the
 * override set under inspection, and every what-if response seen so far.
 * History entries store the full server response, so recalling one is a pure
 * re-render — no refetch, byte-identical numbers.
 */
export class TriageSession {
  project: string;
  draft: IssueDraft;
  baseline: PredictionResponse | null = null;
  overrides: Overrides = {};
  current: WhatIfResponse | null = null;
  history: HistoryEntry[] = [];

  constructor(project: string, draft: IssueDraft) {
    this.project = project;
    this.draft = draft;
  }

  setBaseline(prediction: PredictionResponse): void {
    this.baseline = prediction;
    // a new baseline invalidates comparisons made against the old one
    this.current = null;
    this.history = [];
  }

  recordWhatIf(overrides: Overrides, response: WhatIfResponse): void {
    this.overrides = cloneOverrides(overrides);
    this.current = response;
    const snapshot = cloneOverrides(overrides);
    const existing = this.history.findIndex((e) => overridesEqual(e.overrides, snapshot));
    if (existing >= 0) this.history.splice(existing, 1);
    this.history.unshift({ overrides: snapshot, response });
  }

  /** Stored response for a history entry; never hits the network. */
  recall(index: number): HistoryEntry {
    const entry = this.history[index];
    if (!entry) throw new RangeError(`no history entry ${index}`);
    this.overrides = cloneOverrides(entry.overrides);
    this.current = entry.response;
    return entry;
  }
}
