import type {
  InsightsResponse,
  IssueDraft,
  Overrides,
  PredictionResponse,
  ProjectListing,
  ProjectMetadata,
  TopicReport,
  WhatIfResponse,
} from "./types.js";

/** Non-2xx response, carrying the server's error message and field list. */
export class ApiError extends Error {
  status: number;
  fields: string[];

  constructor(status: number, message: string, fields: string[] = []) {
    super(message);
    this.status = status;
    this.fields = fields;
  }
}

/** Network-level failure (service unreachable), distinct from an API error. */
export class ConnectionError extends Error {}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ConnectionError(err instanceof Error ? err.message : String(err));
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // fall through; non-JSON bodies only matter for the error message
  }
  if (!response.ok) {
    const record = (body ?? {}) as { error?: string; fields?: string[] };
    throw new ApiError(
      response.status,
      record.error ?? `request failed with status ${response.status}`,
      record.fields ?? [],
    );
  }
  return body as T;
}

function post(payload: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(payload),
  };
}

export class FixtimeClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  listProjects(): Promise<ProjectListing[]> {
    return request(this.url("/projects"));
  }

  metadata(project: string): Promise<ProjectMetadata> {
    return request(this.url(`/projects/${encodeURIComponent(project)}/metadata`));
  }

  predict(project: string, draft: IssueDraft): Promise<PredictionResponse> {
    return request(this.url(`/projects/${encodeURIComponent(project)}/predict`), post(draft));
  }

  whatif(project: string, draft: IssueDraft, overrides: Overrides): Promise<WhatIfResponse> {
    return request(
      this.url(`/projects/${encodeURIComponent(project)}/whatif`),
      post({ issue: draft, overrides }),
    );
  }

  insights(project: string): Promise<InsightsResponse> {
    return request(this.url(`/projects/${encodeURIComponent(project)}/insights`));
  }

  topics(project: string): Promise<TopicReport> {
    return request(this.url(`/projects/${encodeURIComponent(project)}/topics`));
  }
}

/**
 * Base URL resolution: `?api=` query parameter wins, then a
 * `<meta name="fixtime-api">` tag, then the default local service address.
 */
export function resolveBaseUrl(doc: Document, locationSearch: string): string {
  const fromQuery = new URLSearchParams(locationSearch).get("api");
  if (fromQuery) return fromQuery;
  const meta = doc.querySelector('meta[name="fixtime-api"]');
  const fromMeta = meta?.getAttribute("content");
  if (fromMeta) return fromMeta;
  return "http://127.0.0.1:8571";
}
