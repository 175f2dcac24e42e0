import type { FeatureCollection, GeoFeature, IntensityName } from "./types.js";

// Same palette the engine documents for its artifacts.
export const COLOR_HEX: Record<string, string> = {
  Green: "#2ca02c",
  Amber: "#ffbf00",
  Red: "#d62728",
};
export const UNLABELED_HEX = "#9e9e9e";

export interface MapShape {
  code: string;
  title: string;
  kind: "point" | "polygon" | "placeholder";
  visible: boolean;
  fill: string;
  label: IntensityName | null;
  // point
  cx?: number;
  cy?: number;
  // polygon
  path?: string;
}

export interface MapModel {
  width: number;
  height: number;
  shapes: MapShape[];
}

type Ring = [number, number][];

function* coordinatesOf(feature: GeoFeature): Generator<[number, number]> {
  const geometry = feature.geometry;
  if (!geometry) return;
  if (geometry.type === "Point") {
    yield geometry.coordinates as [number, number];
  } else if (geometry.type === "Polygon") {
    for (const ring of geometry.coordinates as Ring[]) yield* ring;
  } else if (geometry.type === "MultiPolygon") {
    for (const polygon of geometry.coordinates as Ring[][]) {
      for (const ring of polygon) yield* ring;
    }
  }
}

function fillFor(feature: GeoFeature): string {
  const explicit = feature.properties.fill;
  if (typeof explicit === "string") return explicit;
  const color = feature.properties.color;
  return (color && COLOR_HEX[color]) || UNLABELED_HEX;
}

/** Project a FeatureCollection into a self-contained SVG render model.
 *
 * Filter toggles are pure view operations: shapes outside the filter set
 * come back with visible=false, nothing is refetched. Features without
 * geometry become hatched placeholders with an explanatory tooltip. */
export function buildMapModel(
  collection: FeatureCollection,
  filters: IntensityName[],
  width = 420,
  height = 320,
): MapModel {
  let minLon = Infinity, maxLon = -Infinity, minLat = Infinity, maxLat = -Infinity;
  for (const feature of collection.features) {
    for (const [lon, lat] of coordinatesOf(feature)) {
      minLon = Math.min(minLon, lon);
      maxLon = Math.max(maxLon, lon);
      minLat = Math.min(minLat, lat);
      maxLat = Math.max(maxLat, lat);
    }
  }
  const pad = 14;
  const spanLon = Math.max(maxLon - minLon, 1e-9);
  const spanLat = Math.max(maxLat - minLat, 1e-9);
  const sx = (lon: number) => pad + ((lon - minLon) / spanLon) * (width - 2 * pad);
  const sy = (lat: number) => height - pad - ((lat - minLat) / spanLat) * (height - 2 * pad);

  const shapes: MapShape[] = [];
  let placeholderSlot = 0;
  for (const feature of collection.features) {
    const label = (feature.properties.label as IntensityName | undefined) ?? null;
    const visible = label !== null && filters.includes(label);
    const base = {
      code: feature.properties.code,
      label,
      fill: fillFor(feature),
      visible,
    };
    if (!feature.geometry) {
      shapes.push({
        ...base,
        kind: "placeholder",
        title: `${feature.properties.name}: no geometry available`,
        cx: pad + 10 + 22 * placeholderSlot,
        cy: height - pad,
        visible,
      });
      placeholderSlot += 1;
      continue;
    }
    if (feature.geometry.type === "Point") {
      const [lon, lat] = feature.geometry.coordinates as [number, number];
      shapes.push({
        ...base,
        kind: "point",
        title: feature.properties.name,
        cx: sx(lon),
        cy: sy(lat),
      });
      continue;
    }
    const rings: Ring[] =
      feature.geometry.type === "Polygon"
        ? (feature.geometry.coordinates as Ring[])
        : (feature.geometry.coordinates as Ring[][]).flat();
    const path = rings
      .map((ring) =>
        ring
          .map(([lon, lat], i) => `${i === 0 ? "M" : "L"}${sx(lon).toFixed(1)},${sy(lat).toFixed(1)}`)
          .join(" ") + " Z")
      .join(" ");
    shapes.push({
      ...base,
      kind: "polygon",
      title: feature.properties.name,
      path,
    });
  }
  return { width, height, shapes };
}

export function visibleCodes(model: MapModel): string[] {
  return model.shapes.filter((s) => s.visible).map((s) => s.code);
}
