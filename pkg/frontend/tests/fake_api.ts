// In-memory double of the workbench API for controller tests. It mimics the
// engine's contracts (deterministic run ids, cached bodies, RAG gaps) so the
// UI tests can check that everything on screen equals a response field.

import type { FetchLike } from "../src/api.js";
import type { IntensityColor, IntensityEntry, RunDraft } from "../src/types.js";

export const AREAS = ["A1", "A2", "A3", "A4", "A5", "A6"];

const COLORS: Record<number, IntensityColor> = { 0: "Green", 1: "Amber", 2: "Red" };

function names(k: number): string[] {
  if (k === 3) return ["Low", "Medium", "High"];
  if (k === 2) return ["Low", "High"];
  return Array.from({ length: k }, (_, i) => `L${i + 1}`);
}

function colorFor(ordinal: number, k: number): IntensityColor {
  if (ordinal === 0) return "Green";
  if (ordinal === k - 1) return "Red";
  return COLORS[1];
}

// planted ordinals per dimension at k=3; collapsed for k=2
const DEATHS3: Record<string, number> = { A1: 0, A2: 0, A3: 1, A4: 1, A5: 2, A6: 2 };
const LOANS3: Record<string, number> = { A1: 2, A2: 1, A3: 1, A4: 0, A5: 0, A6: 2 };

function intensityFor(dataset: string, k: number): Record<string, IntensityEntry> {
  const base = dataset === "loans" ? LOANS3 : DEATHS3;
  const labels = names(k);
  const out: Record<string, IntensityEntry> = {};
  for (const area of AREAS) {
    const ordinal = k === 2 ? (base[area] >= 2 ? 1 : 0) : Math.min(base[area], k - 1);
    out[area] = { ordinal, name: labels[ordinal], color: colorFor(ordinal, k) };
  }
  return out;
}

const QUALITY: Record<number, { silhouette: number; davies_bouldin: number }> = {
  2: { silhouette: 0.73, davies_bouldin: 0.58 },
  3: { silhouette: 0.703, davies_bouldin: 0.44 },
  4: { silhouette: 0.6, davies_bouldin: 0.52 },
};

export interface FakeApiState {
  calls: string[];
  runs: Map<string, Record<string, unknown>>;
}

export function makeFakeApi(): { fetchImpl: FetchLike; state: FakeApiState } {
  const state: FakeApiState = { calls: [], runs: new Map() };

  const json = (body: unknown, status = 200): Response =>
    ({
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    }) as unknown as Response;

  const fetchImpl: FetchLike = async (url, init) => {
    state.calls.push(`${init?.method ?? "GET"} ${url}`);
    if (url === "/datasets") {
      return json([
        { name: "demography", kind: "demography", dimension: "deaths",
          entities: AREAS.length, features: ["f1", "f2"], years: [2014, 2019],
          intensity_feature: "avg_deaths" },
        { name: "loans", kind: "loans", dimension: "loans",
          entities: AREAS.length, features: ["apps", "value"], years: [],
          intensity_feature: "application_count" },
      ]);
    }
    if (url === "/runs" && init?.method === "POST") {
      const draft = JSON.parse(String(init.body)) as RunDraft;
      if (!(draft.eps > 0)) {
        return json({ error: { code: "invalid_params",
                               message: "invalid fields: eps" } }, 400);
      }
      if (draft.k === 1) {
        return json({ error: { code: "data_error",
                               message: "single cluster" } }, 422);
      }
      const runId = `run-${draft.dataset}-k${draft.k}-p${draft.n_components}-s${draft.seed}`;
      if (!state.runs.has(runId)) {
        const quality = QUALITY[draft.k] ?? { silhouette: 0.5, davies_bouldin: 0.6 };
        state.runs.set(runId, {
          run_id: runId,
          status: "done",
          created: `2020-12-17T00:00:0${state.runs.size}Z`,
          dataset: draft.dataset,
          dimension: draft.dataset === "loans" ? "loans" : "deaths",
          request: { ...draft },
          labels: Object.fromEntries(AREAS.map((a, i) => [a, i % draft.k])),
          quality: { ...quality, n_clusters_scored: draft.k,
                     n_points_scored: AREAS.length, noise_excluded: 0 },
          wcss: 12.5 / draft.k,
          centroids: [],
          intensity: intensityFor(draft.dataset, draft.k),
          entity_names: Object.fromEntries(AREAS.map((a) => [a, `Area ${a}`])),
        });
      }
      const run = state.runs.get(runId)!;
      return json({ run_id: runId, status: "done", created: run.created,
                    result: `/runs/${runId}` });
    }
    const runMatch = url.match(/^\/runs\/([^/]+)$/);
    if (runMatch) {
      const run = state.runs.get(runMatch[1]);
      return run ? json(run)
                 : json({ error: { code: "not_found", message: "unknown run" } }, 404);
    }
    const geoMatch = url.match(/^\/runs\/([^/]+)\/geojson$/);
    if (geoMatch) {
      const run = state.runs.get(geoMatch[1]);
      if (!run) {
        return json({ error: { code: "not_found", message: "unknown run" } }, 404);
      }
      const intensity = run.intensity as Record<string, IntensityEntry>;
      const hex = { Green: "#2ca02c", Amber: "#ffbf00", Red: "#d62728" };
      return json({
        type: "FeatureCollection",
        features: AREAS.map((area, i) => ({
          type: "Feature",
          geometry: { type: "Point", coordinates: [i * 0.1, 51 + i * 0.1] },
          properties: {
            code: area,
            name: `Area ${area}`,
            cluster: i % 3,
            label: intensity[area].name,
            color: intensity[area].color,
            fill: hex[intensity[area].color],
          },
        })),
      });
    }
    if (url.startsWith("/compare?")) {
      const params = new URLSearchParams(url.split("?")[1]);
      const threshold = Number(params.get("threshold") ?? "2");
      const runIds = (params.get("runs") ?? "").split(",");
      const byDim: Record<string, Record<string, IntensityEntry>> = {};
      for (const id of runIds) {
        const run = state.runs.get(id);
        if (!run) {
          return json({ error: { code: "not_found", message: `unknown run ${id}` } }, 404);
        }
        byDim[run.dimension as string] = run.intensity as Record<string, IntensityEntry>;
      }
      const dims = Object.keys(byDim);
      const rows = AREAS.map((area) => ({
        area,
        labels: Object.fromEntries(dims.map((d) => [d, byDim[d][area]])),
        gap: byDim.loans && byDim.deaths
          ? byDim.loans[area].ordinal - byDim.deaths[area].ordinal
          : null,
      }));
      const flagged = rows
        .filter((r) => r.gap !== null && Math.abs(r.gap) >= threshold)
        .map((r) => ({ area: r.area, gap: r.gap as number, trend_slope: -0.5 }));
      return json({ threshold, table: { dimensions: dims, rows }, flagged });
    }
    const distMatch = url.match(/^\/datasets\/([^/]+)\/distribution\?(.*)$/);
    if (distMatch) {
      if (!["demography", "loans"].includes(distMatch[1])) {
        return json({ error: { code: "not_found", message: "unknown dataset" } }, 404);
      }
      const feature = new URLSearchParams(distMatch[2]).get("feature");
      return json({
        feature, n: AREAS.length, min: 1500, q1: 1520.5, median: 1660,
        q3: 2895, max: 6400, iqr: 1374.5, outliers: [["A6", 6400]],
      });
    }
    if (url.startsWith("/timeseries?")) {
      const params = new URLSearchParams(url.split("?")[1]);
      const area = params.get("area") ?? "";
      if (!AREAS.includes(area)) {
        return json({ error: { code: "data_error", message: "unknown area" } }, 422);
      }
      return json({
        kind: params.get("kind"),
        series: { [area]: [[2016, 10], [2017, -5], [2018, 7]] },
      });
    }
    return json({ error: { code: "not_found", message: url } }, 404);
  };

  return { fetchImpl, state };
}
