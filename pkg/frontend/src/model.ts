/** View-model builders shaping service responses for rendering.
 *
 * These functions arrange response fields; they do not recompute them.
 * Counts and percent strings pass through verbatim so a rendered chart
 * can be diffed against the report table that produced it.  The only
 * derived values are CSS bar widths, which are styling rather than
 * displayed numbers.
 */

import {
  BreakdownData,
  BreakdownRowData,
  EntryRow,
  MitigationRowData,
  ReliabilityResponse,
  VendorRowData,
} from "./types.js";

export const EMPTY_TABLE_MESSAGE = "No entries match the current filters.";

export interface TableRow {
  cveId: string;
  vendor: string;
  product: string;
  category: string;
  ot: "OT" | "-";
  interaction: string;
  remediation: string;
}

export interface TableModel {
  rows: TableRow[];
  empty: string | null;
}

export function entryTableRows(entries: EntryRow[]): TableRow[] {
  return entries.map((entry) => ({
    cveId: entry.cve_id,
    vendor: entry.vendor_project,
    product: entry.product,
    category: entry.category_title,
    ot: entry.ot_relevant ? "OT" : "-",
    interaction: entry.ui_required,
    remediation: entry.remediation_label ?? "unlabeled",
  }));
}

export function entryTable(entries: EntryRow[]): TableModel {
  const rows = entryTableRows(entries);
  return { rows, empty: rows.length === 0 ? EMPTY_TABLE_MESSAGE : null };
}

export interface Bar {
  label: string;
  count: number;
  percent: string;
  width: number;
}

export interface BarChartModel {
  name: string;
  total: number;
  bars: Bar[];
  note: string | null;
}

/** Flag when the one-decimal displayed shares do not add up to 100.0.
 *
 * Sums the percent strings the user actually reads, in tenths to stay
 * in integer arithmetic, so a 100.1 artifact is reported as such.
 */
export function shareSumNote(rows: BreakdownRowData[]): string | null {
  if (rows.length === 0) {
    return null;
  }
  const tenths = rows.reduce((acc, row) => acc + Math.round(parseFloat(row.percent) * 10), 0);
  if (tenths === 1000) {
    return null;
  }
  return `Displayed shares sum to ${(tenths / 10).toFixed(1)} because of one-decimal rounding.`;
}

export function barChart(data: BreakdownData): BarChartModel {
  return {
    name: data.name,
    total: data.total,
    bars: data.rows.map((row) => ({
      label: row.label,
      count: row.count,
      percent: row.percent,
      width: parseFloat(row.percent),
    })),
    note: shareSumNote(data.rows),
  };
}

export type Rating = "high" | "medium" | "low";

export interface StackedSegment {
  rating: Rating;
  count: number;
  width: number;
}

export interface StackedBar {
  rank: number;
  mitigationId: string;
  total: number;
  segments: StackedSegment[];
}

/** Stacked bars for the mitigation ranking; widths scale to the top row. */
export function stackedMitigationChart(rows: MitigationRowData[]): StackedBar[] {
  const max = rows.reduce((acc, row) => Math.max(acc, row.total), 0);
  const ratings: Rating[] = ["high", "medium", "low"];
  return rows.map((row) => ({
    rank: row.rank,
    mitigationId: row.mitigation_id,
    total: row.total,
    segments: ratings.map((rating) => ({
      rating,
      count: row[rating],
      width: max === 0 ? 0 : Math.round((row[rating] / max) * 1000) / 10,
    })),
  }));
}

export interface ReliabilityBar {
  pair: string;
  nItems: number;
  ac1: string;
  width: number;
}

export interface ReliabilityChartModel {
  attribute: string;
  mode: string;
  pooling: string;
  pooled: string;
  bars: ReliabilityBar[];
}

export function reliabilityChart(report: ReliabilityResponse): ReliabilityChartModel {
  return {
    attribute: report.attribute,
    mode: report.mode,
    pooling: report.pooling,
    pooled: report.pooled_ac1.toFixed(6),
    bars: report.rows.map((row) => ({
      pair: `${row.rater_a} vs ${row.rater_b}`,
      nItems: row.n_items,
      ac1: row.ac1.toFixed(6),
      // AC1 can go negative; clamp the bar, keep the printed value.
      width: Math.round(Math.max(0, row.ac1) * 1000) / 10,
    })),
  };
}

export interface VendorTableRow {
  vendor: string;
  entries: number;
  withAdvisories: number;
  withoutAdvisories: number;
}

export function vendorTable(rows: VendorRowData[]): VendorTableRow[] {
  return rows.map((row) => ({
    vendor: row.vendor,
    entries: row.entries,
    withAdvisories: row.with_advisories,
    withoutAdvisories: row.without_advisories,
  }));
}

export const DECISION_VALUES = ["Accepted", "Rejected", "NeedsEdit"] as const;

export type DecisionValue = (typeof DECISION_VALUES)[number];

/** Client-side mirror of the service's decision validation.
 *
 * Returns the inline message to show next to the form, or null when the
 * submission is well formed.  The service remains the authority; this
 * only saves a round trip for the common mistake.
 */
export function validateDecisionForm(decision: string, note: string): string | null {
  if (!(DECISION_VALUES as readonly string[]).includes(decision)) {
    return `Unknown decision value: ${decision}`;
  }
  if (decision === "NeedsEdit" && note.trim() === "") {
    return "NeedsEdit requires a note describing the needed change.";
  }
  return null;
}

export interface GapPanelModel {
  cveId: string;
  heading: string;
  reason: string;
}

export function gapPanel(result: { cveId: string; reason: string }): GapPanelModel {
  return {
    cveId: result.cveId,
    heading: `${result.cveId}: nothing actionable`,
    reason: result.reason,
  };
}
