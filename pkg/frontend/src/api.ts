import type {
  CompareResponse, DatasetInfo, DistributionSummary, FeatureCollection,
  RunDraft, RunHandle, RunResult, TimeseriesResponse,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(readonly status: number, readonly code: string, message: string) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      const err = body?.error ?? { code: "unknown", message: "request failed" };
      throw new ApiRequestError(response.status, err.code, err.message);
    }
    return body as T;
  }

  datasets(): Promise<DatasetInfo[]> {
    return this.request("/datasets");
  }

  submitRun(draft: RunDraft): Promise<RunHandle> {
    return this.request("/runs", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(draft),
    });
  }

  run(runId: string): Promise<RunResult> {
    return this.request(`/runs/${runId}`);
  }

  runGeojson(runId: string): Promise<FeatureCollection> {
    return this.request(`/runs/${runId}/geojson`);
  }

  compare(runIds: string[], threshold: number): Promise<CompareResponse> {
    const params = new URLSearchParams({
      runs: runIds.join(","),
      threshold: String(threshold),
    });
    return this.request(`/compare?${params}`);
  }

  timeseries(kind: string, area?: string, sector?: string): Promise<TimeseriesResponse> {
    const params = new URLSearchParams({ kind });
    if (area) params.set("area", area);
    if (sector) params.set("sector", sector);
    return this.request(`/timeseries?${params}`);
  }

  distribution(dataset: string, feature: string): Promise<DistributionSummary> {
    const params = new URLSearchParams({ feature });
    return this.request(`/datasets/${dataset}/distribution?${params}`);
  }
}
