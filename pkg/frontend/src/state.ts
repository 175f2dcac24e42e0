import type { IntensityName, RunDraft } from "./types.js";

export interface ViewState {
  dataset: string;
  draft: RunDraft;
  activeRuns: string[];
  filters: IntensityName[];
  selectedArea: string | null;
  threshold: number;
}

export interface FieldIssue {
  field: string;
  message: string;
}

export const DEFAULT_DRAFT: RunDraft = {
  dataset: "",
  algorithm: "kmeans",
  k: 3,
  eps: 1.0,
  min_samples: 2,
  linkage: "ward",
  n_components: 2,
  standardize: true,
  seed: null,
};

export function defaultState(dataset = ""): ViewState {
  return {
    dataset,
    draft: { ...DEFAULT_DRAFT, dataset },
    activeRuns: [],
    filters: ["Low", "Medium", "High"],
    selectedArea: null,
    threshold: 2,
  };
}

// Client-side guard mirroring the engine's parameter rules; invalid drafts
// never reach the API.
export function validateDraft(draft: RunDraft): FieldIssue[] {
  const issues: FieldIssue[] = [];
  if (!draft.dataset) {
    issues.push({ field: "dataset", message: "pick a dataset" });
  }
  if (!["kmeans", "dbscan", "agglomerative"].includes(draft.algorithm)) {
    issues.push({ field: "algorithm", message: "unknown algorithm" });
  }
  if (!Number.isInteger(draft.k) || draft.k < 1) {
    issues.push({ field: "k", message: "k must be an integer >= 1" });
  }
  if (!(draft.eps > 0)) {
    issues.push({ field: "eps", message: "eps must be > 0" });
  }
  if (!Number.isInteger(draft.min_samples) || draft.min_samples < 1) {
    issues.push({ field: "min_samples", message: "min_samples must be >= 1" });
  }
  if (!["ward", "average", "complete"].includes(draft.linkage)) {
    issues.push({ field: "linkage", message: "unknown linkage" });
  }
  if (draft.n_components !== null &&
      (!Number.isInteger(draft.n_components) || draft.n_components < 1)) {
    issues.push({ field: "n_components", message: "components must be >= 1 or empty" });
  }
  if (draft.seed !== null && !Number.isInteger(draft.seed)) {
    issues.push({ field: "seed", message: "seed must be an integer" });
  }
  return issues;
}

// The filter set stays non-empty while the map layer is visible.
export function toggleFilter(filters: IntensityName[], name: IntensityName): IntensityName[] {
  if (filters.includes(name)) {
    const next = filters.filter((f) => f !== name);
    return next.length > 0 ? next : filters;
  }
  return [...filters, name];
}

// View state round-trips through the URL query string so an analysis is a
// shareable link.
export function encodeState(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.dataset) params.set("dataset", state.dataset);
  params.set("algorithm", state.draft.algorithm);
  params.set("k", String(state.draft.k));
  params.set("eps", String(state.draft.eps));
  params.set("min_samples", String(state.draft.min_samples));
  params.set("linkage", state.draft.linkage);
  if (state.draft.n_components !== null) {
    params.set("pca", String(state.draft.n_components));
  }
  params.set("standardize", state.draft.standardize ? "1" : "0");
  if (state.draft.seed !== null) params.set("seed", String(state.draft.seed));
  if (state.activeRuns.length) params.set("runs", state.activeRuns.join(","));
  params.set("filters", state.filters.join(","));
  if (state.selectedArea) params.set("area", state.selectedArea);
  params.set("threshold", String(state.threshold));
  return params.toString();
}

export function decodeState(query: string): ViewState {
  const params = new URLSearchParams(query);
  const state = defaultState(params.get("dataset") ?? "");
  const draft = state.draft;
  const algorithm = params.get("algorithm");
  if (algorithm === "kmeans" || algorithm === "dbscan" || algorithm === "agglomerative") {
    draft.algorithm = algorithm;
  }
  if (params.has("k")) draft.k = Number(params.get("k"));
  if (params.has("eps")) draft.eps = Number(params.get("eps"));
  if (params.has("min_samples")) draft.min_samples = Number(params.get("min_samples"));
  const linkage = params.get("linkage");
  if (linkage === "ward" || linkage === "average" || linkage === "complete") {
    draft.linkage = linkage;
  }
  draft.n_components = params.has("pca") ? Number(params.get("pca")) : null;
  if (params.has("standardize")) draft.standardize = params.get("standardize") === "1";
  draft.seed = params.has("seed") ? Number(params.get("seed")) : null;
  if (params.has("runs")) {
    state.activeRuns = params.get("runs")!.split(",").filter(Boolean);
  }
  if (params.has("filters")) {
    const filters = params.get("filters")!.split(",").filter(Boolean);
    if (filters.length) state.filters = filters;
  }
  state.selectedArea = params.get("area");
  if (params.has("threshold")) state.threshold = Number(params.get("threshold"));
  return state;
}
