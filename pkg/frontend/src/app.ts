/** Console bootstrap: tabs, filter wiring, and data loading.
 *
 * The console is stateless by design.  Each view fetches what it shows
 * when it becomes active; nothing authoritative is cached here.
 */

import { ApiClient, ApiError, EntryFilters } from "./client.js";
import {
  barChart,
  entryTable,
  gapPanel,
  reliabilityChart,
  stackedMitigationChart,
  validateDecisionForm,
  vendorTable,
  DECISION_VALUES,
} from "./model.js";
import {
  clearChildren,
  el,
  renderBarChart,
  renderEntryTable,
  renderGapPanel,
  renderReliabilityChart,
  renderStackedChart,
  renderVendorTable,
} from "./dom.js";
import {
  BreakdownData,
  MitigationRowData,
  OtSharesData,
  VendorRowData,
} from "./types.js";

const REMEDIATION_VALUES = ["no_advisory", "no_workaround", "generic", "specific"];
const INTERACTION_VALUES = ["yes", "no", "unknown"];
const RELIABILITY_ATTRIBUTES = ["advisory_format", "remediation_label", "ot_relevance"];

function reviewerId(): string {
  try {
    return window.localStorage.getItem("kevtriage-reviewer") ?? "console";
  } catch {
    return "console";
  }
}

function rememberReviewer(value: string): void {
  try {
    window.localStorage.setItem("kevtriage-reviewer", value);
  } catch {
    // Storage can be unavailable; the header still goes out per request.
  }
}

function client(): ApiClient {
  return new ApiClient("", reviewerId());
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) {
    return typeof err.body.detail === "string" ? err.body.detail : err.message;
  }
  return err instanceof Error ? err.message : String(err);
}

function select(name: string, values: string[]): HTMLSelectElement {
  const node = el("select", { name });
  node.append(el("option", { value: "" }, ["any"]));
  for (const value of values) {
    node.append(el("option", { value }, [value]));
  }
  return node;
}

// --- entries view -------------------------------------------------------

function entriesView(): HTMLElement {
  const root = el("div", { class: "view" });
  const vendor = el("input", { name: "vendor", placeholder: "vendor" });
  const category = el("input", { name: "category", placeholder: "category code or title" });
  const ot = select("ot", ["true", "false"]);
  const remediation = select("remediation", REMEDIATION_VALUES);
  const interaction = select("interaction", INTERACTION_VALUES);
  const apply = el("button", { type: "submit" }, ["Apply"]);
  const form = el("form", { class: "filters" }, [
    vendor,
    category,
    ot,
    remediation,
    interaction,
    apply,
  ]);
  const status = el("p", { class: "status" });
  const tableHost = el("div", { class: "table-host" });
  root.append(form, status, tableHost);

  async function load(): Promise<void> {
    const filters: EntryFilters = {};
    if (vendor.value.trim() !== "") filters.vendor = vendor.value.trim();
    if (category.value.trim() !== "") filters.category = category.value.trim();
    if (ot.value !== "") filters.ot = ot.value === "true";
    if (remediation.value !== "") filters.remediation = remediation.value;
    if (interaction.value !== "") filters.interaction = interaction.value;
    status.textContent = "Loading entries...";
    try {
      const response = await client().entries(filters);
      status.textContent = `${response.count} entries (workspace ${response.version})`;
      clearChildren(tableHost);
      tableHost.append(renderEntryTable(entryTable(response.entries)));
    } catch (err) {
      status.textContent = errorText(err);
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void load();
  });
  void load();
  return root;
}

// --- review view --------------------------------------------------------

function reviewView(): HTMLElement {
  const root = el("div", { class: "view" });
  const cve = el("input", { name: "cve", placeholder: "CVE id" });
  const loadButton = el("button", { type: "submit" }, ["Load"]);
  const lookup = el("form", { class: "filters" }, [cve, loadButton]);
  const playbookHost = el("div", { class: "playbook-host" });

  const reviewer = el("input", { name: "reviewer", value: reviewerId() });
  const decision = el("select", { name: "decision" });
  for (const value of DECISION_VALUES) {
    decision.append(el("option", { value }, [value]));
  }
  const mitigation = el("input", { name: "mitigation", placeholder: "mitigation id (optional)" });
  const note = el("textarea", { name: "note", placeholder: "note (required for NeedsEdit)" });
  const submit = el("button", { type: "submit" }, ["Record decision"]);
  const inline = el("p", { class: "inline-error" });
  const outcome = el("p", { class: "status" });
  const decisionsHost = el("div", { class: "decisions-host" });
  const form = el("form", { class: "decision-form" }, [
    el("label", {}, ["Reviewer ", reviewer]),
    el("label", {}, ["Decision ", decision]),
    el("label", {}, ["Mitigation ", mitigation]),
    el("label", {}, ["Note ", note]),
    submit,
    inline,
    outcome,
  ]);
  root.append(lookup, playbookHost, form, decisionsHost);

  async function showDecisions(cveId: string): Promise<void> {
    const detail = await client().entry(cveId);
    clearChildren(decisionsHost);
    if (detail.decisions.length === 0) {
      decisionsHost.append(el("p", { class: "status" }, ["No decisions recorded."]));
      return;
    }
    const list = el("ul", { class: "decision-list" });
    for (const record of detail.decisions) {
      const note = record.note ? ` note: ${record.note}` : "";
      list.append(
        el("li", {}, [
          `${record.decided_at} ${record.reviewer_id} ${record.decision}${note}`,
        ]),
      );
    }
    decisionsHost.append(list);
  }

  async function loadPlaybook(): Promise<void> {
    const cveId = cve.value.trim();
    if (cveId === "") {
      return;
    }
    clearChildren(playbookHost);
    try {
      const result = await client().playbook(cveId);
      if (result.kind === "gap") {
        playbookHost.append(renderGapPanel(gapPanel(result)));
      } else {
        playbookHost.append(
          el("pre", { class: "playbook" }, [JSON.stringify(result.body.entry, null, 2)]),
        );
      }
      await showDecisions(cveId);
    } catch (err) {
      playbookHost.append(el("p", { class: "inline-error" }, [errorText(err)]));
    }
  }

  lookup.addEventListener("submit", (event) => {
    event.preventDefault();
    void loadPlaybook();
  });

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    inline.textContent = "";
    outcome.textContent = "";
    rememberReviewer(reviewer.value.trim());
    const message = validateDecisionForm(decision.value, note.value);
    if (message !== null) {
      inline.textContent = message;
      return;
    }
    try {
      const posted = await new ApiClient("", reviewer.value.trim()).postDecision({
        cve_id: cve.value.trim(),
        decision: decision.value,
        mitigation_id: mitigation.value.trim() === "" ? null : mitigation.value.trim(),
        note: note.value.trim() === "" ? null : note.value.trim(),
      });
      outcome.textContent = `Recorded decision ${posted.seq} (workspace ${posted.version}).`;
      await showDecisions(cve.value.trim());
    } catch (err) {
      inline.textContent = errorText(err);
    }
  });
  return root;
}

// --- dashboards view ----------------------------------------------------

function dashboardsView(): HTMLElement {
  const root = el("div", { class: "view" });
  const status = el("p", { class: "status" }, ["Loading dashboards..."]);
  root.append(status);

  async function load(): Promise<void> {
    const api = client();
    try {
      const formats = await api.report<BreakdownData>("advisory-formats");
      const remediation = await api.report<BreakdownData>("remediation");
      const otShares = await api.report<OtSharesData>("ot-shares");
      const mitigations = await api.report<MitigationRowData[]>("top-mitigations");
      const vendors = await api.report<VendorRowData[]>("vendors");
      status.textContent = `Workspace ${formats.version}`;
      root.append(
        renderBarChart(barChart(formats.data), "Advisory formats"),
        renderBarChart(barChart(remediation.data), "Remediation availability"),
        renderBarChart(barChart(otShares.data.plausible), "OT plausibility"),
        renderBarChart(barChart(otShares.data.interaction_all), "User interaction, all entries"),
      );
      if (otShares.data.interaction_ot !== null) {
        root.append(
          renderBarChart(barChart(otShares.data.interaction_ot), "User interaction, OT subset"),
        );
      }
      root.append(
        renderStackedChart(stackedMitigationChart(mitigations.data), "Top mitigations"),
        el("h3", {}, ["Vendor advisories"]),
        renderVendorTable(vendorTable(vendors.data)),
      );
      for (const attribute of RELIABILITY_ATTRIBUTES) {
        try {
          const report = await api.reliability(attribute);
          root.append(renderReliabilityChart(reliabilityChart(report)));
        } catch (err) {
          if (err instanceof ApiError && err.status === 404) {
            root.append(
              el("p", { class: "status" }, ["No labels recorded; AC1 dashboards are empty."]),
            );
            break;
          }
          throw err;
        }
      }
    } catch (err) {
      status.textContent = errorText(err);
    }
  }

  void load();
  return root;
}

// --- shell --------------------------------------------------------------

const VIEWS: Record<string, () => HTMLElement> = {
  entries: entriesView,
  review: reviewView,
  dashboards: dashboardsView,
};

function activate(name: string): void {
  const host = document.getElementById("view");
  if (host === null) {
    return;
  }
  const build = VIEWS[name] ?? VIEWS.entries;
  clearChildren(host);
  host.append(build());
  for (const link of document.querySelectorAll("#tabs a")) {
    link.classList.toggle("active", link.getAttribute("data-view") === name);
  }
}

function currentView(): string {
  const name = window.location.hash.replace(/^#\//, "");
  return name in VIEWS ? name : "entries";
}

function boot(): void {
  const tabs = document.getElementById("tabs");
  if (tabs !== null) {
    for (const name of Object.keys(VIEWS)) {
      tabs.append(el("a", { href: `#/${name}`, "data-view": name }, [name]));
    }
  }
  window.addEventListener("hashchange", () => activate(currentView()));
  activate(currentView());
}

boot();
