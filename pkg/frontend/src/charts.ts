// Minimal line-chart render model: values in, SVG path string out.

export interface LineChart {
  path: string;
  width: number;
  height: number;
  xTicks: { x: number; label: string }[];
  yTicks: { y: number; label: string }[];
}

export function lineChart(
  points: [number | string, number][],
  width = 420,
  height = 180,
): LineChart {
  if (points.length === 0) {
    return { path: "", width, height, xTicks: [], yTicks: [] };
  }
  const xs = points.map((_, i) => i);
  const ys = points.map(([, v]) => v);
  const minY = Math.min(...ys, 0);
  const maxY = Math.max(...ys);
  const spanY = Math.max(maxY - minY, 1e-9);
  const pad = 28;
  const px = (i: number) =>
    pad + (xs.length === 1 ? 0 : (i / (xs.length - 1)) * (width - 2 * pad));
  const py = (v: number) => height - pad - ((v - minY) / spanY) * (height - 2 * pad);
  const path = points
    .map(([, v], i) => `${i === 0 ? "M" : "L"}${px(i).toFixed(1)},${py(v).toFixed(1)}`)
    .join(" ");
  const step = Math.max(1, Math.floor(points.length / 6));
  const xTicks = points
    .filter((_, i) => i % step === 0)
    .map(([t], i) => ({ x: px(i * step), label: String(t) }));
  const yTicks = [minY, (minY + maxY) / 2, maxY].map((v) => ({
    y: py(v),
    label: v.toFixed(0),
  }));
  return { path, width, height, xTicks, yTicks };
}
