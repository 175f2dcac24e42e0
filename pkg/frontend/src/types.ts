// Shapes mirror the workbench API responses field for field; the UI never
// computes analytics, it only arranges these values on screen.

export type IntensityName = string; // "Low" | "Medium" | "High" | "L1".."Lc"
export type IntensityColor = "Green" | "Amber" | "Red";

export interface DatasetInfo {
  name: string;
  kind: string;
  dimension: string | null;
  entities: number;
  features: string[];
  years: number[];
  intensity_feature: string | null;
}

export interface RunDraft {
  dataset: string;
  algorithm: "kmeans" | "dbscan" | "agglomerative";
  k: number;
  eps: number;
  min_samples: number;
  linkage: "ward" | "average" | "complete";
  n_components: number | null;
  standardize: boolean;
  seed: number | null;
}

export interface RunHandle {
  run_id: string;
  status: string;
  created: string;
  result: string;
}

export interface QualityReport {
  silhouette: number;
  davies_bouldin: number;
  n_clusters_scored: number;
  n_points_scored: number;
  noise_excluded: number;
}

export interface IntensityEntry {
  ordinal: number;
  name: IntensityName;
  color: IntensityColor;
}

export interface RunResult {
  run_id: string;
  status: string;
  created: string;
  dataset: string;
  dimension: string | null;
  request: Record<string, unknown>;
  labels: Record<string, number>;
  quality: QualityReport;
  wcss: number;
  centroids: number[][];
  intensity: Record<string, IntensityEntry>;
  entity_names: Record<string, string>;
}

export interface GeoFeature {
  type: "Feature";
  geometry: {
    type: "Point" | "Polygon" | "MultiPolygon";
    coordinates: unknown;
  } | null;
  properties: {
    code: string;
    name: string;
    cluster?: number;
    label?: IntensityName;
    color?: IntensityColor;
    fill?: string;
    [key: string]: unknown;
  };
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: GeoFeature[];
}

export interface RagLabel {
  ordinal: number;
  name: IntensityName;
  color: IntensityColor;
}

export interface RagRow {
  area: string;
  labels: Record<string, RagLabel>;
  gap: number | null;
}

export interface CompareResponse {
  threshold: number;
  table: { dimensions: string[]; rows: RagRow[] };
  flagged: { area: string; gap: number; trend_slope: number | null }[];
}

export interface TimeseriesResponse {
  kind: string;
  area?: string;
  series: Record<string, [number | string, number][]>;
}

export interface DistributionSummary {
  feature: string;
  n: number;
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
  iqr: number;
  outliers: [string, number][];
}

export interface ApiError {
  error: { code: string; message: string };
}
