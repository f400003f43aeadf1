/** DOM construction for the console views.
 *
 * Everything here takes a view model from model.ts and returns detached
 * elements; app.ts owns attaching them and wiring events.
 */

import {
  BarChartModel,
  GapPanelModel,
  ReliabilityChartModel,
  StackedBar,
  TableModel,
  VendorTableRow,
} from "./model.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") {
      node.className = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function renderEntryTable(model: TableModel): HTMLElement {
  if (model.empty !== null) {
    return el("p", { class: "empty-state" }, [model.empty]);
  }
  const head = el("tr", {}, []);
  for (const title of ["CVE", "Vendor", "Product", "Category", "OT", "Interaction", "Remediation"]) {
    head.append(el("th", {}, [title]));
  }
  const body = el("tbody");
  for (const row of model.rows) {
    body.append(
      el("tr", {}, [
        el("td", { class: "mono" }, [row.cveId]),
        el("td", {}, [row.vendor]),
        el("td", {}, [row.product]),
        el("td", {}, [row.category]),
        el("td", { class: row.ot === "OT" ? "flag-ot" : "flag-it" }, [row.ot]),
        el("td", {}, [row.interaction]),
        el("td", {}, [el("span", { class: `badge badge-${row.remediation}` }, [row.remediation])]),
      ]),
    );
  }
  return el("table", { class: "entry-table" }, [el("thead", {}, [head]), body]);
}

export function renderBarChart(chart: BarChartModel, title: string): HTMLElement {
  const bars = chart.bars.map((bar) =>
    el("div", { class: "bar-row" }, [
      el("span", { class: "bar-label" }, [bar.label]),
      el("div", { class: "bar-track" }, [
        el("div", { class: "bar-fill", style: `width: ${bar.width}%` }),
      ]),
      el("span", { class: "bar-value" }, [`${bar.count} (${bar.percent}%)`]),
    ]),
  );
  const children: (Node | string)[] = [
    el("h3", {}, [title]),
    el("p", { class: "chart-total" }, [`n = ${chart.total}`]),
    ...bars,
  ];
  if (chart.note !== null) {
    children.push(el("p", { class: "chart-note" }, [chart.note]));
  }
  return el("section", { class: "chart" }, children);
}

export function renderStackedChart(bars: StackedBar[], title: string): HTMLElement {
  const rows = bars.map((bar) =>
    el("div", { class: "bar-row" }, [
      el("span", { class: "bar-label mono" }, [`${bar.rank}. ${bar.mitigationId}`]),
      el("div", { class: "bar-track" }, [
        ...bar.segments.map((seg) =>
          el("div", {
            class: `bar-fill rating-${seg.rating}`,
            style: `width: ${seg.width}%`,
            title: `${seg.rating}: ${seg.count}`,
          }),
        ),
      ]),
      el("span", { class: "bar-value" }, [
        bar.segments.map((seg) => `${seg.rating} ${seg.count}`).join(", "),
      ]),
    ]),
  );
  return el("section", { class: "chart" }, [el("h3", {}, [title]), ...rows]);
}

export function renderReliabilityChart(chart: ReliabilityChartModel): HTMLElement {
  const rows = chart.bars.map((bar) =>
    el("div", { class: "bar-row" }, [
      el("span", { class: "bar-label" }, [`${bar.pair} (n=${bar.nItems})`]),
      el("div", { class: "bar-track" }, [
        el("div", { class: "bar-fill", style: `width: ${bar.width}%` }),
      ]),
      el("span", { class: "bar-value mono" }, [bar.ac1]),
    ]),
  );
  return el("section", { class: "chart" }, [
    el("h3", {}, [`AC1: ${chart.attribute}`]),
    el("p", { class: "chart-total" }, [
      `mode ${chart.mode}, pooled ${chart.pooled} (${chart.pooling})`,
    ]),
    ...rows,
  ]);
}

export function renderVendorTable(rows: VendorTableRow[]): HTMLElement {
  const head = el("tr", {}, []);
  for (const title of ["Vendor", "Entries", "With advisories", "Without"]) {
    head.append(el("th", {}, [title]));
  }
  const body = el("tbody");
  for (const row of rows) {
    body.append(
      el("tr", {}, [
        el("td", {}, [row.vendor]),
        el("td", { class: "num" }, [String(row.entries)]),
        el("td", { class: "num" }, [String(row.withAdvisories)]),
        el("td", { class: "num" }, [String(row.withoutAdvisories)]),
      ]),
    );
  }
  return el("table", { class: "vendor-table" }, [el("thead", {}, [head]), body]);
}

export function renderGapPanel(panel: GapPanelModel): HTMLElement {
  return el("section", { class: "gap-panel" }, [
    el("h3", {}, [panel.heading]),
    el("p", {}, [panel.reason]),
  ]);
}

export function clearChildren(node: HTMLElement): void {
  while (node.firstChild !== null) {
    node.removeChild(node.firstChild);
  }
}
