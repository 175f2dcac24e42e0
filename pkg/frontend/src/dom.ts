import { lineChart } from "./charts.js";
import { Workbench } from "./controller.js";
import { COLOR_HEX } from "./map.js";
import { encodeState } from "./state.js";
import type { IntensityName } from "./types.js";

function el(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  return node;
}

function numberInput(value: number | null): string {
  return value === null ? "" : String(value);
}

export function renderApp(root: HTMLElement, bench: Workbench): void {
  root.textContent = "";
  root.append(
    renderParameterPanel(bench),
    renderScorePanel(bench),
    renderMapPanel(bench),
    renderComparisonPanel(bench),
    renderTimeseriesPanel(bench),
    renderDistributionPanel(bench),
    renderHistoryPanel(bench),
  );
  history.replaceState(null, "", "?" + encodeState(bench.state));
}

function issueFor(bench: Workbench, field: string): string | null {
  const issue = bench.issues.find((i) => i.field === field);
  return issue ? issue.message : null;
}

function field(bench: Workbench, label: string, name: string,
               input: HTMLElement): HTMLElement {
  const wrap = el("label", { class: "field" });
  wrap.append(el("span", {}, label), input);
  const message = issueFor(bench, name);
  if (message) wrap.append(el("em", { class: "issue" }, message));
  return wrap;
}

function renderParameterPanel(bench: Workbench): HTMLElement {
  const panel = el("section", { class: "panel params" });
  panel.append(el("h2", {}, "Parameters"));
  const draft = bench.state.draft;

  const dataset = el("select", { name: "dataset" }) as HTMLSelectElement;
  for (const d of bench.datasets.filter((d) => d.dimension !== null)) {
    const option = el("option", { value: d.name },
                      `${d.name} (${d.entities} areas)`) as HTMLOptionElement;
    option.selected = d.name === bench.state.dataset;
    dataset.append(option);
  }
  dataset.onchange = () => bench.selectDataset(dataset.value);
  panel.append(field(bench, "Dataset", "dataset", dataset));

  const algorithm = el("select", { name: "algorithm" }) as HTMLSelectElement;
  for (const a of ["kmeans", "dbscan", "agglomerative"]) {
    const option = el("option", { value: a }, a) as HTMLOptionElement;
    option.selected = a === draft.algorithm;
    algorithm.append(option);
  }
  algorithm.onchange = () => {
    draft.algorithm = algorithm.value as typeof draft.algorithm;
  };
  panel.append(field(bench, "Algorithm", "algorithm", algorithm));

  const mk = (name: string, value: string, handler: (v: string) => void) => {
    const input = el("input", { name, value }) as HTMLInputElement;
    input.onchange = () => handler(input.value);
    return input;
  };
  panel.append(
    field(bench, "k", "k",
          mk("k", String(draft.k), (v) => { draft.k = Number(v); })),
    field(bench, "eps", "eps",
          mk("eps", String(draft.eps), (v) => { draft.eps = Number(v); })),
    field(bench, "min samples", "min_samples",
          mk("min_samples", String(draft.min_samples),
             (v) => { draft.min_samples = Number(v); })),
    field(bench, "PCA components", "n_components",
          mk("n_components", numberInput(draft.n_components),
             (v) => { draft.n_components = v === "" ? null : Number(v); })),
    field(bench, "seed", "seed",
          mk("seed", numberInput(draft.seed),
             (v) => { draft.seed = v === "" ? null : Number(v); })),
  );

  const submit = el("button", { class: "submit" }, "Run") as HTMLButtonElement;
  submit.onclick = () => void bench.submit();
  panel.append(submit);
  if (bench.lastError) panel.append(el("p", { class: "error" }, bench.lastError));
  return panel;
}

function renderScorePanel(bench: Workbench): HTMLElement {
  const panel = el("section", { class: "panel scores" });
  panel.append(el("h2", {}, "Quality"));
  const { current, previous } = bench.scorePanel();
  const table = el("table");
  const head = el("tr");
  head.append(el("th"), el("th", {}, "current"), el("th", {}, "previous"));
  table.append(head);
  for (const key of ["silhouette", "davies_bouldin", "wcss", "clusters"]) {
    const row = el("tr");
    row.append(
      el("td", {}, key),
      el("td", { class: "score", "data-field": key },
         current ? current[key] : "-"),
      el("td", { class: "score-prev" }, previous ? previous[key] : "-"),
    );
    table.append(row);
  }
  panel.append(table);
  return panel;
}

function renderMapPanel(bench: Workbench): HTMLElement {
  const panel = el("section", { class: "panel map" });
  panel.append(el("h2", {}, "Map"));
  const toggles = el("div", { class: "filters" });
  for (const name of ["Low", "Medium", "High"] as IntensityName[]) {
    const button = el("button", {
      class: bench.state.filters.includes(name) ? "filter on" : "filter",
    }, name) as HTMLButtonElement;
    button.onclick = () => bench.setFilter(name);
    toggles.append(button);
  }
  panel.append(toggles);
  const model = bench.mapModel;
  if (!model) {
    panel.append(el("p", { class: "hint" }, "submit a run to see the map"));
    return panel;
  }
  const svg = svgEl("svg", {
    viewBox: `0 0 ${model.width} ${model.height}`,
    class: "mapcanvas",
  });
  const hatch = svgEl("pattern", {
    id: "hatch", width: "6", height: "6", patternUnits: "userSpaceOnUse",
  });
  hatch.append(svgEl("path", { d: "M0,6 L6,0", stroke: "#888", "stroke-width": "1" }));
  svg.append(hatch);
  for (const shape of model.shapes) {
    if (!shape.visible) continue;
    let node: SVGElement;
    if (shape.kind === "polygon") {
      node = svgEl("path", { d: shape.path ?? "", fill: shape.fill,
                             stroke: "#333", "stroke-width": "0.5" });
    } else if (shape.kind === "point") {
      node = svgEl("circle", { cx: String(shape.cx), cy: String(shape.cy),
                               r: "7", fill: shape.fill, stroke: "#333",
                               "stroke-width": "0.5" });
    } else {
      node = svgEl("rect", { x: String((shape.cx ?? 0) - 8),
                             y: String((shape.cy ?? 0) - 8),
                             width: "16", height: "16", fill: "url(#hatch)",
                             stroke: "#888" });
    }
    const title = svgEl("title");
    title.textContent = shape.title;
    node.append(title);
    node.addEventListener("click", () => void bench.selectArea(shape.code));
    svg.append(node);
  }
  panel.append(svg);
  return panel;
}

function renderComparisonPanel(bench: Workbench): HTMLElement {
  const panel = el("section", { class: "panel comparison" });
  panel.append(el("h2", {}, "Comparison"));
  if (!bench.comparisonReady()) {
    panel.append(el("p", { class: "hint" },
                    "run at least two datasets with different dimensions to compare"));
    return panel;
  }
  const slider = el("input", {
    type: "range", min: "1", max: "2", step: "1",
    value: String(bench.state.threshold),
  }) as HTMLInputElement;
  slider.onchange = () => void bench.refreshComparison(Number(slider.value));
  const sliderWrap = el("label", { class: "field" });
  sliderWrap.append(el("span", {}, `threshold ${bench.state.threshold}`), slider);
  panel.append(sliderWrap);
  const comparison = bench.comparison;
  if (!comparison) {
    panel.append(el("p", { class: "hint" }, "comparison pending"));
    return panel;
  }
  const flagged = bench.flaggedAreas();
  const slopes = new Map(comparison.flagged.map((f) => [f.area, f.trend_slope]));
  const table = el("table");
  const head = el("tr");
  head.append(el("th", {}, "area"));
  for (const dim of comparison.table.dimensions) head.append(el("th", {}, dim));
  head.append(el("th", {}, "gap"), el("th", {}, "trend"));
  table.append(head);
  for (const row of bench.comparisonRows()) {
    const tr = el("tr", { class: flagged.has(row.area) ? "flagged" : "" });
    tr.append(el("td", {}, row.area));
    for (const dim of comparison.table.dimensions) {
      const label = row.labels[dim];
      const td = el("td", {}, label.name);
      td.style.background = COLOR_HEX[label.color];
      tr.append(td);
    }
    tr.append(el("td", {}, row.gap === null ? "" : String(row.gap)));
    const slope = slopes.get(row.area);
    tr.append(el("td", {}, slope === undefined || slope === null
                           ? "" : String(slope)));
    table.append(tr);
  }
  panel.append(table);
  return panel;
}

function renderTimeseriesPanel(bench: Workbench): HTMLElement {
  const panel = el("section", { class: "panel timeseries" });
  panel.append(el("h2", {}, "Timeseries"));
  const series = bench.timeseries;
  if (!series || !bench.state.selectedArea) {
    panel.append(el("p", { class: "hint" }, "click an area on the map"));
    return panel;
  }
  panel.append(el("p", {}, `net business growth: ${bench.state.selectedArea}`));
  const points = series.series[bench.state.selectedArea] ?? [];
  const chart = lineChart(points);
  const svg = svgEl("svg", { viewBox: `0 0 ${chart.width} ${chart.height}` });
  svg.append(svgEl("path", { d: chart.path, fill: "none", stroke: "#1f77b4",
                             "stroke-width": "1.5" }));
  for (const tick of chart.xTicks) {
    const text = svgEl("text", { x: String(tick.x), y: String(chart.height - 8),
                                 "font-size": "8", "text-anchor": "middle" });
    text.textContent = tick.label;
    svg.append(text);
  }
  panel.append(svg);
  return panel;
}

function renderDistributionPanel(bench: Workbench): HTMLElement {
  const panel = el("section", { class: "panel distribution" });
  panel.append(el("h2", {}, "Feature spread"));
  const summary = bench.boxSummary();
  const d = bench.distribution;
  if (!summary || !d) {
    panel.append(el("p", { class: "hint" }, "no intensity feature loaded"));
    return panel;
  }
  panel.append(el("p", {}, summary.feature));
  // box-summary overlay: min whisker, q1..q3 box with median, max whisker
  const width = 380, height = 56, pad = 16;
  const span = Math.max(d.max - d.min, 1e-9);
  const sx = (v: number) => pad + ((v - d.min) / span) * (width - 2 * pad);
  const svg = svgEl("svg", { viewBox: `0 0 ${width} ${height}`, class: "box" });
  const mid = height / 2;
  svg.append(
    svgEl("line", { x1: String(sx(d.min)), x2: String(sx(d.max)),
                    y1: String(mid), y2: String(mid), stroke: "#888" }),
    svgEl("rect", { x: String(sx(d.q1)), y: String(mid - 11),
                    width: String(Math.max(sx(d.q3) - sx(d.q1), 1)),
                    height: "22", fill: "#9ecae1", stroke: "#333" }),
    svgEl("line", { x1: String(sx(d.median)), x2: String(sx(d.median)),
                    y1: String(mid - 11), y2: String(mid + 11),
                    stroke: "#333", "stroke-width": "2" }),
  );
  for (const [, value] of d.outliers) {
    svg.append(svgEl("circle", { cx: String(sx(value)), cy: String(mid),
                                 r: "2.5", fill: "#d62728" }));
  }
  panel.append(svg);
  const table = el("table");
  for (const key of ["min", "q1", "median", "q3", "max", "outliers"]) {
    const row = el("tr");
    row.append(el("td", {}, key),
               el("td", { class: "dist", "data-field": key }, summary[key]));
    table.append(row);
  }
  panel.append(table);
  return panel;
}

function renderHistoryPanel(bench: Workbench): HTMLElement {
  const panel = el("section", { class: "panel history" });
  panel.append(el("h2", {}, "History"));
  const list = el("ul");
  for (const entry of bench.history) {
    list.append(el("li", {}, `${entry.runId.slice(0, 8)} ${entry.dataset}: ${entry.summary}`));
  }
  panel.append(list);
  return panel;
}
