/** Wire shapes returned by the triage service.
 *
 * The console never derives numbers of its own; these interfaces mirror
 * the service JSON field for field so every rendered value is traceable
 * to a response.
 */

export interface EntryRow {
  cve_id: string;
  vendor_project: string;
  product: string;
  vulnerability_name: string;
  date_added: string;
  due_date: string;
  known_ransomware_use: string;
  unspsc_code: string;
  category_title: string;
  ot_relevant: boolean;
  ui_required: string;
  remediation_label: string | null;
}

export interface EntriesResponse {
  version: string;
  count: number;
  entries: EntryRow[];
}

export interface DecisionRecord {
  cve_id: string;
  decision: string;
  reviewer_id: string;
  decided_at: string;
  mitigation_id?: string | null;
  note?: string | null;
}

export interface EntryDetailResponse {
  version: string;
  entry: Record<string, unknown>;
  advisory: Record<string, unknown> | null;
  mappings: unknown[];
  candidates: unknown[];
  gap: string | null;
  decisions: DecisionRecord[];
}

export interface PlaybookEntryResponse {
  version: string;
  generated_at: string;
  provenance: Record<string, string>;
  entry: Record<string, unknown>;
}

export interface BreakdownRowData {
  label: string;
  count: number;
  share: number;
  percent: string;
}

export interface BreakdownData {
  name: string;
  total: number;
  rows: BreakdownRowData[];
}

export interface OtSharesData {
  plausible: BreakdownData;
  interaction_all: BreakdownData;
  interaction_ot: BreakdownData | null;
}

export interface MitigationRowData {
  rank: number;
  mitigation_id: string;
  total: number;
  high: number;
  medium: number;
  low: number;
}

export interface VendorRowData {
  vendor: string;
  entries: number;
  with_advisories: number;
  without_advisories: number;
}

export interface ReportResponse<T> {
  version: string;
  report: string;
  data: T;
}

export interface ReliabilityRowData {
  rater_a: string;
  rater_b: string;
  n_items: number;
  k: number;
  p_o: number;
  p_e: number;
  ac1: number;
}

export interface ReliabilityResponse {
  version: string;
  attribute: string;
  mode: string;
  pooling: string;
  pooled_ac1: number;
  rows: ReliabilityRowData[];
}

export interface WorkspaceResponse {
  version: string;
  stages: Record<string, boolean>;
  decision_count: number;
  label_count: number;
}

export interface DecisionPayload {
  cve_id: string;
  decision: string;
  reviewer_id?: string;
  decided_at?: string;
  mitigation_id?: string | null;
  note?: string | null;
  expected_version?: string;
}

export interface DecisionPosted {
  seq: number;
  version: string;
  decision: DecisionRecord;
}

export interface LabelRow {
  item_id: string;
  rater_id: string;
  attribute: string;
  label: string;
}

export interface LabelsPosted {
  appended: number;
  version: string;
}

export interface ApiErrorBody {
  error?: string;
  detail?: unknown;
  [key: string]: unknown;
}
