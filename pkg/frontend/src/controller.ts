import { ApiClient, ApiRequestError } from "./api.js";
import { buildMapModel, MapModel } from "./map.js";
import {
  FieldIssue, ViewState, defaultState, toggleFilter, validateDraft,
} from "./state.js";
import type {
  CompareResponse, DatasetInfo, DistributionSummary, FeatureCollection,
  IntensityName, RunResult, TimeseriesResponse,
} from "./types.js";

export interface HistoryEntry {
  runId: string;
  dataset: string;
  summary: string;
}

/** Scores come straight from the API response; the UI shows them verbatim. */
export function scoreText(value: number): string {
  return String(value);
}

export function describeDraft(draft: ViewState["draft"]): string {
  const parts: string[] = [draft.algorithm];
  if (draft.n_components !== null) parts.push(`PCA=${draft.n_components}`);
  if (draft.algorithm === "dbscan") {
    parts.push(`eps=${draft.eps}`, `min_samples=${draft.min_samples}`);
  } else {
    parts.push(`k=${draft.k}`);
  }
  return parts.join(", ");
}

/** DOM-free application core: holds view state, talks to the API, and
 * exposes render models. At most one run submission is in flight; stale
 * responses (superseded submissions) are discarded by token check. */
export class Workbench {
  state: ViewState;
  datasets: DatasetInfo[] = [];
  history: HistoryEntry[] = [];
  currentRun: RunResult | null = null;
  previousRun: RunResult | null = null;
  geojson: FeatureCollection | null = null;
  mapModel: MapModel | null = null;
  comparison: CompareResponse | null = null;
  timeseries: TimeseriesResponse | null = null;
  distribution: DistributionSummary | null = null;
  issues: FieldIssue[] = [];
  lastError: string | null = null;
  // latest run id per comparison dimension feeds /compare
  runsByDimension: Record<string, string> = {};

  private submissionToken = 0;
  private inflight = false;
  private listeners: (() => void)[] = [];

  constructor(private readonly api: ApiClient, initial?: ViewState) {
    this.state = initial ?? defaultState();
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  async loadDatasets(): Promise<void> {
    this.datasets = await this.api.datasets();
    if (!this.state.dataset && this.datasets.length) {
      const first = this.datasets.find((d) => d.dimension !== null);
      if (first) {
        this.state.dataset = first.name;
        this.state.draft.dataset = first.name;
      }
    }
    await this.loadDistribution();
    this.notify();
  }

  selectDataset(name: string): void {
    this.state.dataset = name;
    this.state.draft.dataset = name;
    void this.loadDistribution().then(() => this.notify());
    this.notify();
  }

  /** Box-summary review of the dataset's intensity feature (spread +
   * outliers); values come straight from the distribution endpoint. */
  async loadDistribution(): Promise<void> {
    const info = this.datasets.find((d) => d.name === this.state.dataset);
    if (!info || !info.intensity_feature) {
      this.distribution = null;
      return;
    }
    try {
      this.distribution = await this.api.distribution(
        info.name, info.intensity_feature);
    } catch {
      this.distribution = null;
    }
  }

  boxSummary(): Record<string, string> | null {
    const d = this.distribution;
    if (d === null) return null;
    return {
      feature: d.feature,
      min: String(d.min),
      q1: String(d.q1),
      median: String(d.median),
      q3: String(d.q3),
      max: String(d.max),
      outliers: String(d.outliers.length),
    };
  }

  /** Validate, POST, and refresh the map within the same request cycle.
   * Returns field issues when the client guard blocks the request. */
  async submit(): Promise<FieldIssue[]> {
    this.issues = validateDraft(this.state.draft);
    if (this.issues.length) {
      this.notify();
      return this.issues;
    }
    if (this.inflight) return [];
    this.inflight = true;
    const token = ++this.submissionToken;
    this.lastError = null;
    try {
      const handle = await this.api.submitRun({ ...this.state.draft });
      const [run, geojson] = await Promise.all([
        this.api.run(handle.run_id),
        this.api.runGeojson(handle.run_id),
      ]);
      if (token !== this.submissionToken) return []; // superseded; discard
      this.previousRun = this.currentRun;
      this.currentRun = run;
      this.geojson = geojson;
      this.mapModel = buildMapModel(geojson, this.state.filters);
      if (run.dimension) {
        this.runsByDimension[run.dimension] = run.run_id;
      }
      if (!this.state.activeRuns.includes(run.run_id)) {
        this.state.activeRuns = [...this.state.activeRuns, run.run_id];
      }
      if (!this.history.some((h) => h.runId === run.run_id)) {
        this.history = [
          { runId: run.run_id, dataset: run.dataset,
            summary: describeDraft(this.state.draft) },
          ...this.history,
        ];
      }
    } catch (err) {
      if (err instanceof ApiRequestError) {
        this.lastError = err.message;
        const named = this.fieldFromError(err.message);
        if (named) this.issues = [{ field: named, message: err.message }];
      } else {
        this.lastError = String(err);
      }
    } finally {
      this.inflight = false;
      this.notify();
    }
    return this.issues;
  }

  private fieldFromError(message: string): string | null {
    for (const field of ["k", "eps", "min_samples", "n_components", "seed",
                         "algorithm", "linkage", "dataset"]) {
      if (message.includes(field)) return field;
    }
    return null;
  }

  /** Pure view operation: recolors visibility, no refetch. */
  setFilter(name: IntensityName): void {
    this.state.filters = toggleFilter(this.state.filters, name);
    if (this.geojson) {
      this.mapModel = buildMapModel(this.geojson, this.state.filters);
    }
    this.notify();
  }

  comparisonReady(): boolean {
    return Object.keys(this.runsByDimension).length >= 2;
  }

  async refreshComparison(threshold?: number): Promise<void> {
    if (threshold !== undefined) this.state.threshold = threshold;
    if (!this.comparisonReady()) {
      this.comparison = null;
      this.notify();
      return;
    }
    const runs = Object.values(this.runsByDimension);
    try {
      this.comparison = await this.api.compare(runs, this.state.threshold);
      this.lastError = null;
    } catch (err) {
      this.comparison = null;
      this.lastError = err instanceof ApiRequestError ? err.message : String(err);
    }
    this.notify();
  }

  flaggedAreas(): Set<string> {
    return new Set((this.comparison?.flagged ?? []).map((f) => f.area));
  }

  /** Comparison rows sorted by |gap| descending, then area. */
  comparisonRows() {
    const rows = [...(this.comparison?.table.rows ?? [])];
    rows.sort((a, b) =>
      Math.abs(b.gap ?? 0) - Math.abs(a.gap ?? 0) || a.area.localeCompare(b.area));
    return rows;
  }

  async selectArea(code: string): Promise<void> {
    this.state.selectedArea = code;
    try {
      this.timeseries = await this.api.timeseries("net_growth", code);
      this.lastError = null;
    } catch (err) {
      this.timeseries = null;
      this.lastError = err instanceof ApiRequestError ? err.message : String(err);
    }
    this.notify();
  }

  scorePanel(): { current: Record<string, string> | null;
                  previous: Record<string, string> | null } {
    const fields = (run: RunResult | null) =>
      run === null
        ? null
        : {
            silhouette: scoreText(run.quality.silhouette),
            davies_bouldin: scoreText(run.quality.davies_bouldin),
            wcss: scoreText(run.wcss),
            clusters: scoreText(run.quality.n_clusters_scored),
          };
    return { current: fields(this.currentRun), previous: fields(this.previousRun) };
  }
}
