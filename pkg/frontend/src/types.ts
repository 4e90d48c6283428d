// Shapes mirroring the service JSON, field for field. The UI never invents
// numbers: everything rendered comes out of one of these responses.

export interface ProjectListing {
  id: string;
  categories: string[];
}

export interface CategoryInfo {
  slug: string;
  display: string;
}

export interface ProjectMetadata {
  project: string;
  priorities: string[];
  issue_types: string[];
  components: string[];
  labels: string[];
  assignees: string[];
  categories: CategoryInfo[];
}

/** Probability per category slug, already rounded by the server. */
export type ProbMap = Record<string, number>;

export interface ViewTop {
  category: string;
  probability: number;
}

export interface ExplanationPayload {
  per_view_top: Record<string, ViewTop>;
  agreement_flags: string[];
  narratives: Record<string, string>;
}

export interface PredictionResponse {
  issue_key: string;
  predicted: string;
  predicted_display: string;
  final_probs: ProbMap;
  per_view: Record<string, ProbMap>;
  explanation: ExplanationPayload;
}

export interface WhatIfResponse {
  baseline: PredictionResponse;
  modified: PredictionResponse;
  delta: ProbMap;
  overridable_fields: string[];
}

export interface InsightTable {
  counts: Record<string, number[]>;
  proportions: Record<string, number[]>;
}

export interface InsightsResponse {
  project: string;
  total: number;
  categories: string[];
  by_priority: InsightTable;
  by_issue_type: InsightTable;
  by_component: InsightTable;
  by_topic?: InsightTable;
}

export interface TopicEntry {
  id: number;
  size: number;
  keywords: [string, number][];
}

export interface TopicReport {
  k: number;
  topics: TopicEntry[];
}

export interface IssueDraft {
  summary: string;
  description?: string;
  priority?: string;
  issue_type?: string;
  components?: string[];
  labels?: string[];
  assignee?: string | null;
}

/** Subset of IssueDraft fields the what-if endpoint accepts. */
export interface Overrides {
  priority?: string;
  issue_type?: string;
  components?: string[];
  labels?: string[];
  assignee?: string | null;
}
