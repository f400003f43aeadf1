/** Thin typed client over the triage service HTTP API. */

import {
  ApiErrorBody,
  DecisionPayload,
  DecisionPosted,
  EntriesResponse,
  EntryDetailResponse,
  LabelRow,
  LabelsPosted,
  PlaybookEntryResponse,
  ReliabilityResponse,
  ReportResponse,
  WorkspaceResponse,
} from "./types.js";

export interface EntryFilters {
  vendor?: string;
  category?: string;
  ot?: boolean;
  remediation?: string;
  interaction?: string;
}

/** Build the query string for the entry listing; "" when unfiltered. */
export function entriesQuery(filters: EntryFilters): string {
  const params = new URLSearchParams();
  if (filters.vendor !== undefined) params.set("vendor", filters.vendor);
  if (filters.category !== undefined) params.set("category", filters.category);
  if (filters.ot !== undefined) params.set("ot", filters.ot ? "true" : "false");
  if (filters.remediation !== undefined) params.set("remediation", filters.remediation);
  if (filters.interaction !== undefined) params.set("interaction", filters.interaction);
  const text = params.toString();
  return text === "" ? "" : `?${text}`;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody,
  ) {
    super(`service returned ${status}: ${JSON.stringify(body.detail ?? body)}`);
    this.name = "ApiError";
  }
}

export type PlaybookResult =
  | { kind: "entry"; body: PlaybookEntryResponse }
  | { kind: "gap"; cveId: string; reason: string };

export class ApiClient {
  /** baseUrl has no trailing slash; "" targets the serving origin. */
  constructor(
    readonly baseUrl: string,
    readonly reviewerId?: string,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers = new Headers(init?.headers);
    if (init?.body !== undefined) {
      headers.set("content-type", "application/json");
    }
    if (this.reviewerId !== undefined) {
      headers.set("X-Reviewer-Id", this.reviewerId);
    }
    const res = await fetch(this.baseUrl + path, { ...init, headers });
    const body = (await res.json()) as T;
    if (!res.ok) {
      throw new ApiError(res.status, body as ApiErrorBody);
    }
    return body;
  }

  entries(filters: EntryFilters = {}): Promise<EntriesResponse> {
    return this.request(`/api/entries${entriesQuery(filters)}`);
  }

  entry(cveId: string): Promise<EntryDetailResponse> {
    return this.request(`/api/entries/${encodeURIComponent(cveId)}`);
  }

  /** Playbook lookup; a 404 carrying a gap reason is a result, not an error. */
  async playbook(cveId: string): Promise<PlaybookResult> {
    try {
      const body = await this.request<PlaybookEntryResponse>(
        `/api/entries/${encodeURIComponent(cveId)}/playbook`,
      );
      return { kind: "entry", body };
    } catch (err) {
      if (err instanceof ApiError && err.status === 404 && typeof err.body.gap === "string") {
        const cve = typeof err.body.cve_id === "string" ? err.body.cve_id : cveId;
        return { kind: "gap", cveId: cve, reason: err.body.gap };
      }
      throw err;
    }
  }

  report<T>(name: string, top?: number): Promise<ReportResponse<T>> {
    const suffix = top === undefined ? "" : `?top=${top}`;
    return this.request(`/api/reports/${encodeURIComponent(name)}${suffix}`);
  }

  reliability(attribute: string, mode?: string): Promise<ReliabilityResponse> {
    const suffix = mode === undefined ? "" : `?mode=${encodeURIComponent(mode)}`;
    return this.request(`/api/reliability/${encodeURIComponent(attribute)}${suffix}`);
  }

  workspace(): Promise<WorkspaceResponse> {
    return this.request("/api/workspace");
  }

  postDecision(payload: DecisionPayload): Promise<DecisionPosted> {
    return this.request("/api/decisions", {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }

  postLabels(labels: LabelRow[], expectedVersion?: string): Promise<LabelsPosted> {
    const payload =
      expectedVersion === undefined ? { labels } : { labels, expected_version: expectedVersion };
    return this.request("/api/labels", {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }
}
