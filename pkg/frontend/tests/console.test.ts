/** End-to-end console checks against a live service instance.
 *
 * Global setup builds a fixture workspace with the CLI and serves it;
 * these tests drive the console's client and view models against that
 * server and snapshot what would render.  Snapshots avoid workspace
 * version hashes, which change whenever the event log grows.
 */

import { describe, expect, inject, it } from "vitest";
import { ApiClient, entriesQuery, type EntryFilters } from "../src/client.js";
import {
  barChart,
  entryTable,
  entryTableRows,
  gapPanel,
  reliabilityChart,
  shareSumNote,
  stackedMitigationChart,
  validateDecisionForm,
  vendorTable,
  EMPTY_TABLE_MESSAGE,
} from "../src/model.js";
import type {
  BreakdownData,
  EntriesResponse,
  MitigationRowData,
  OtSharesData,
  VendorRowData,
} from "../src/types.js";

const BASE = inject("consoleBaseUrl");
const client = new ApiClient(BASE, "console-tests");

/** Fetch the listing without going through the console's query builder. */
async function directEntries(query: Record<string, string>): Promise<EntriesResponse> {
  const params = new URLSearchParams(query);
  const text = params.toString();
  const res = await fetch(`${BASE}/api/entries${text === "" ? "" : `?${text}`}`);
  expect(res.status).toBe(200);
  return (await res.json()) as EntriesResponse;
}

describe("entry table", () => {
  const cases: [string, EntryFilters, Record<string, string>][] = [
    ["unfiltered", {}, {}],
    ["vendor", { vendor: "Northfield Systems" }, { vendor: "Northfield Systems" }],
    ["vendor lowercased", { vendor: "northfield systems" }, { vendor: "northfield systems" }],
    ["category code", { category: "43222609" }, { category: "43222609" }],
    [
      "category title",
      { category: "Operating system software" },
      { category: "Operating system software" },
    ],
    ["ot only", { ot: true }, { ot: "true" }],
    ["non-ot", { ot: false }, { ot: "false" }],
    ["remediation", { remediation: "no_workaround" }, { remediation: "no_workaround" }],
    ["interaction", { interaction: "no" }, { interaction: "no" }],
    [
      "vendor and remediation",
      { vendor: "Vistaplay Software", remediation: "no_advisory" },
      { vendor: "Vistaplay Software", remediation: "no_advisory" },
    ],
    ["ot and interaction", { ot: true, interaction: "no" }, { ot: "true", interaction: "no" }],
  ];

  it.each(cases)("filter set %s matches the direct API query", async (_name, filters, raw) => {
    const viaConsole = await client.entries(filters);
    const direct = await directEntries(raw);
    expect(viaConsole.count).toBe(direct.count);
    expect(JSON.stringify(viaConsole.entries)).toBe(JSON.stringify(direct.entries));
    expect(entryTableRows(viaConsole.entries)).toEqual(entryTableRows(direct.entries));
  });

  it("renders one row per listed entry with fields copied verbatim", async () => {
    const response = await client.entries();
    expect(response.count).toBe(1391);
    const rows = entryTableRows(response.entries);
    expect(rows).toHaveLength(1391);
    const first = response.entries[0];
    expect(rows[0]).toEqual({
      cveId: first.cve_id,
      vendor: first.vendor_project,
      product: first.product,
      category: first.category_title,
      ot: first.ot_relevant ? "OT" : "-",
      interaction: first.ui_required,
      remediation: first.remediation_label,
    });
  });

  it("snapshots the head of the table", async () => {
    const response = await client.entries();
    expect(entryTableRows(response.entries.slice(0, 5))).toMatchSnapshot();
  });

  it("snapshots the filter counts", async () => {
    const counts: Record<string, number> = {};
    const probes: [string, EntryFilters][] = [
      ["ot", { ot: true }],
      ["interaction-no", { interaction: "no" }],
      ["no-advisory", { remediation: "no_advisory" }],
      ["specific", { remediation: "specific" }],
      ["ot-no-interaction", { ot: true, interaction: "no" }],
    ];
    for (const [name, filters] of probes) {
      counts[name] = (await client.entries(filters)).count;
    }
    expect(counts).toMatchSnapshot();
  });

  it("shows the explicit empty state when nothing matches", async () => {
    const response = await client.entries({ vendor: "No Such Vendor" });
    expect(response.count).toBe(0);
    const table = entryTable(response.entries);
    expect(table.rows).toEqual([]);
    expect(table.empty).toBe(EMPTY_TABLE_MESSAGE);
  });

  it("builds the query string the service route expects", () => {
    expect(entriesQuery({})).toBe("");
    expect(entriesQuery({ ot: true, interaction: "no" })).toBe("?ot=true&interaction=no");
    expect(entriesQuery({ vendor: "Bastion Networks" })).toBe("?vendor=Bastion+Networks");
  });
});

describe("playbook review", () => {
  it("loads a playbook entry for a covered CVE", async () => {
    const result = await client.playbook("CVE-2021-30000");
    expect(result.kind).toBe("entry");
    if (result.kind === "entry") {
      expect(result.body.generated_at).toBe("2025-08-01T00:00:00Z");
      expect(result.body.entry.cve_id).toBe("CVE-2021-30000");
      expect(result.body.entry.steps).toBeTruthy();
    }
  });

  it("records a decision and reads it back through the entry detail", async () => {
    const decidedAt = "2025-08-02T09:00:00Z";
    const posted = await client.postDecision({
      cve_id: "CVE-2021-30000",
      decision: "Accepted",
      mitigation_id: "M1030",
      decided_at: decidedAt,
    });
    expect(posted.seq).toBeGreaterThanOrEqual(1);
    expect(posted.decision.reviewer_id).toBe("console-tests");
    const detail = await client.entry("CVE-2021-30000");
    const match = detail.decisions.find((d) => d.decided_at === decidedAt);
    expect(match).toBeDefined();
    expect(match?.decision).toBe("Accepted");
    expect(match?.mitigation_id).toBe("M1030");
  });

  it("mirrors the NeedsEdit note rule inline and on the service", async () => {
    expect(validateDecisionForm("NeedsEdit", "")).toMatch(/note/);
    expect(validateDecisionForm("NeedsEdit", "tighten the blocking step")).toBeNull();
    expect(validateDecisionForm("Accepted", "")).toBeNull();
    await expect(
      client.postDecision({ cve_id: "CVE-2021-30000", decision: "NeedsEdit", note: "" }),
    ).rejects.toMatchObject({ status: 422, body: { error: "validation_failed" } });
    const second = (await client.entries()).entries[1].cve_id;
    const posted = await client.postDecision({
      cve_id: second,
      decision: "NeedsEdit",
      note: "tighten the blocking step",
      decided_at: "2025-08-02T10:00:00Z",
    });
    expect(posted.decision.note).toBe("tighten the blocking step");
  });

  it("falls back to the gap panel when nothing is actionable", async () => {
    const result = await client.playbook("CVE-2021-30336");
    expect(result.kind).toBe("gap");
    if (result.kind === "gap") {
      const panel = gapPanel(result);
      expect(panel.reason).toContain("no advisory remediation");
      expect(panel).toMatchSnapshot();
    }
  });

  it("propagates unknown CVEs as errors rather than gap panels", async () => {
    await expect(client.playbook("CVE-1999-0001")).rejects.toMatchObject({ status: 404 });
  });
});

describe("dashboards", () => {
  it("advisory format chart repeats the report table verbatim", async () => {
    const report = await client.report<BreakdownData>("advisory-formats");
    const chart = barChart(report.data);
    expect(chart.total).toBe(report.data.total);
    expect(JSON.stringify(chart.bars.map((b) => [b.label, b.count, b.percent]))).toBe(
      JSON.stringify(report.data.rows.map((r) => [r.label, r.count, r.percent])),
    );
    expect(chart).toMatchSnapshot();
  });

  it("remediation chart carries the rounding note", async () => {
    const report = await client.report<BreakdownData>("remediation");
    const chart = barChart(report.data);
    expect(chart.note).toContain("100.1");
    expect(chart).toMatchSnapshot();
  });

  it("omits the note when displayed shares sum to 100.0", async () => {
    const report = await client.report<OtSharesData>("ot-shares");
    expect(shareSumNote(report.data.plausible.rows)).toBeNull();
  });

  it("ot dashboards bind both interaction denominators", async () => {
    const report = await client.report<OtSharesData>("ot-shares");
    const plausible = barChart(report.data.plausible);
    expect(plausible.bars.map((b) => b.percent)).toContain("65.4");
    expect(report.data.interaction_ot).not.toBeNull();
    const within = barChart(report.data.interaction_ot as BreakdownData);
    expect(within.bars.map((b) => b.percent)).toContain("73.6");
    expect({ plausible, within }).toMatchSnapshot();
  });

  it("top mitigation chart ranks M1030 first with stacked ratings", async () => {
    const report = await client.report<MitigationRowData[]>("top-mitigations");
    const bars = stackedMitigationChart(report.data);
    expect(bars[0].mitigationId).toBe("M1030");
    expect(bars[0].rank).toBe(1);
    const first = report.data[0];
    expect(bars[0].segments.map((s) => s.count)).toEqual([first.high, first.medium, first.low]);
    expect(bars[0].total).toBe(first.total);
    expect(bars.slice(0, 3)).toMatchSnapshot();
  });

  it("vendor table renders the report rows in order", async () => {
    const report = await client.report<VendorRowData[]>("vendors");
    const rows = vendorTable(report.data);
    expect(rows).toHaveLength(15);
    expect(rows[0]).toEqual({
      vendor: report.data[0].vendor,
      entries: report.data[0].entries,
      withAdvisories: report.data[0].with_advisories,
      withoutAdvisories: report.data[0].without_advisories,
    });
    expect(rows[0].vendor).toBe("Northfield Systems");
    const widened = await client.report<VendorRowData[]>("vendors", 19);
    expect(vendorTable(widened.data).map((r) => r.vendor)).toContain("Vistaplay Software");
  });

  it("reliability chart prints pooled AC1 from the response", async () => {
    const report = await client.reliability("advisory_format");
    const chart = reliabilityChart(report);
    expect(chart.pooled).toBe(report.pooled_ac1.toFixed(6));
    expect(chart.pooled).toBe("0.899946");
    expect(chart.bars).toHaveLength(report.rows.length);
    expect(chart).toMatchSnapshot();
    const standard = await client.reliability("advisory_format", "gwet-standard");
    expect(standard.mode).toBe("gwet_standard");
  });
});

describe("workspace summary", () => {
  it("reports built stages and label counts", async () => {
    const ws = await client.workspace();
    expect(ws.stages.playbook).toBe(true);
    expect(ws.label_count).toBe(840);
  });
});
