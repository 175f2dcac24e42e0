"""Artifact emission: delimited labels, GeoJSON, markdown grids, figures."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .errors import GeoClusterError
from .pipeline import (
    CompareResult, EvaluateResult, IngestResult, RunReport,
    clean_partial_artifacts,
)
from .config import PipelineConfig

log = logging.getLogger("geocluster.report")

# fixed encoding for bit-exact artifact diffs
COLOR_HEX = {"Green": "#2ca02c", "Amber": "#ffbf00", "Red": "#d62728"}
NOISE_HEX = "#9e9e9e"


# ---------------------------------------------------------------------------
# delimited labels

def labels_csv(ingest: IngestResult, evaluated: EvaluateResult,
               compared: CompareResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "dimension", "entity_id", "entity_name",
                     "cluster", "ordinal", "label", "color"])
    for name, selection in sorted(evaluated.datasets.items()):
        bundle = ingest.bundles[name]
        if bundle.dimension is None:
            continue
        labeling = compared.labelings.get(bundle.dimension, {})
        model = selection.selected.model
        for entity, cluster in zip(model.entity_ids, model.labels):
            label = labeling.get(entity)
            writer.writerow([
                name, bundle.dimension, entity,
                bundle.entity_names.get(entity, entity),
                int(cluster),
                label.ordinal if label else "",
                label.name if label else "noise",
                label.color if label else "",
            ])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# markdown grids

def model_grid_markdown(evaluated: EvaluateResult) -> str:
    lines = ["# Clustering candidate grid", ""]
    for name, selection in sorted(evaluated.datasets.items()):
        lines.append(f"## {name}")
        lines.append("")
        descriptors = [c.descriptor for c in selection.candidates]
        lines.append("| | " + " | ".join(descriptors) + " |")
        lines.append("|---" * (len(descriptors) + 1) + "|")
        sil = " | ".join(f"{c.report.silhouette:.4f}" for c in selection.candidates)
        db = " | ".join(f"{c.report.davies_bouldin:.4f}" for c in selection.candidates)
        lines.append(f"| Silhouette Score | {sil} |")
        lines.append(f"| Davies-Bouldin Score | {db} |")
        lines.append("")
        suffix = " (forced k)" if selection.selected.forced else ""
        lines.append(f"Selected: **{selection.selected.descriptor}**{suffix}")
        lines.append("")
    return "\n".join(lines)


def _gap_str(gap) -> str:
    if gap is None:
        return ""
    return f"+{gap}" if gap > 0 else str(gap)


def rag_csv(compared: CompareResult,
            entity_names: dict[str, str] | None = None) -> str:
    """The comparison table as delimited text: area, per-dimension color, gap."""
    table = compared.table
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if table is None:
        writer.writerow(["area", "gap"])
        return buf.getvalue()
    names = entity_names or {}
    flagged = {f.area: f for f in compared.flagged}
    writer.writerow(["area", "name"] + [f"{d}_color" for d in table.dimensions]
                    + ["gap", "flagged", "trend_slope"])
    for row in table.rows:
        flag = flagged.get(row.area)
        writer.writerow(
            [row.area, names.get(row.area, row.area)]
            + [row.labels[d].color for d in table.dimensions]
            + [table.gaps.get(row.area, ""),
               "yes" if flag is not None else "",
               "" if flag is None or flag.trend_slope is None
               else repr(flag.trend_slope)])
    return buf.getvalue()


def rag_markdown(compared: CompareResult,
                 entity_names: dict[str, str] | None = None) -> str:
    table = compared.table
    if table is None:
        return "# Intensity comparison\n\n(no labeled dimensions)\n"
    names = entity_names or {}
    flagged = {f.area: f for f in compared.flagged}
    lines = ["# Intensity comparison", ""]
    header = ["Area"] + [d.capitalize() for d in table.dimensions] + ["Gap", "Flag", "Trend slope"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|---" * len(header) + "|")
    for row in table.rows:
        gap = table.gaps.get(row.area)
        flag = flagged.get(row.area)
        slope = ""
        if flag is not None and flag.trend_slope is not None:
            slope = f"{flag.trend_slope:+.2f}"
        cells = [names.get(row.area, row.area)]
        cells += [row.labels[d].color for d in table.dimensions]
        cells.append(_gap_str(gap))
        cells.append("flagged" if flag is not None else "")
        cells.append(slope)
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    lines.append(f"Discrepancy threshold: {compared.threshold} "
                 f"({len(compared.flagged)} areas flagged)")
    lines.append("")
    return "\n".join(lines)


def sentiment_markdown(compared: CompareResult) -> str:
    if not compared.sentiment_ranking:
        return ""
    lines = ["", "## Sector exposure (peak paused trading)", ""]
    lines.append("| Sector | Peak paused |")
    lines.append("|---|---|")
    for sector, peak in compared.sentiment_ranking:
        lines.append(f"| {sector} | {peak:.0%} |")
    lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# geojson

def _load_boundaries(path: Path, key: str) -> dict[str, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    by_code = {}
    for feature in payload.get("features", []):
        code = feature.get("properties", {}).get(key)
        if code is not None:
            by_code[str(code)] = feature.get("geometry")
    return by_code


def comparison_geojson(config: PipelineConfig, ingest: IngestResult,
                       compared: CompareResult) -> dict:
    """FeatureCollection of labeled areas: polygons when boundaries are
    supplied, registry-centroid points otherwise."""
    boundaries = {}
    if config.boundaries:
        boundaries = _load_boundaries(config.boundaries, config.boundary_key)
    if compared.table is not None:
        areas = [row.area for row in compared.table.rows]
    else:
        areas = sorted({e for labels in compared.labelings.values() for e in labels})
    names = {}
    for bundle in ingest.bundles.values():
        names.update(bundle.entity_names)
    features = []
    for area in areas:
        properties = {"code": area, "name": names.get(area, area)}
        for dim, labels in sorted(compared.labelings.items()):
            label = labels.get(area)
            if label is None:
                continue
            properties[f"{dim}_label"] = label.name
            properties[f"{dim}_color"] = label.color
            properties[f"{dim}_fill"] = COLOR_HEX[label.color]
        if compared.table is not None and area in compared.table.gaps:
            properties["gap"] = compared.table.gaps[area]
        geometry = boundaries.get(area)
        if geometry is None:
            entity = ingest.registry.by_code.get(area)
            if entity is None:
                log.warning("no geometry or centroid for %r; feature skipped", area)
                continue
            lat, lon = entity.centroid
            geometry = {"type": "Point", "coordinates": [lon, lat]}
        features.append({"type": "Feature", "geometry": geometry,
                         "properties": properties})
    return {"type": "FeatureCollection", "features": features}


# ---------------------------------------------------------------------------
# figures (the report path renders these next to the delimited output)

def _figure_elbow(path: Path, name: str, selection) -> bool:
    frame_key = selection.frame_keys[selection.selected.descriptor]
    points = []
    for c in selection.candidates:
        model = c.model
        if model is None or model.params.algorithm != "kmeans":
            continue
        if selection.frame_keys[c.descriptor] != frame_key:
            continue
        points.append((model.params.k, model.wcss))
    if len(points) < 2:
        return False
    points.sort()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot([p[0] for p in points], [p[1] for p in points], marker="o")
    if selection.selected.model is not None:
        ax.axvline(selection.selected.model.params.k, color="#d62728",
                   linestyle="--", linewidth=1)
    ax.set_xlabel("k")
    ax.set_ylabel("wcss")
    ax.set_title(f"{name}: wcss by k ({frame_key})")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return True


def _figure_scatter(path: Path, name: str, frame, model, labeling) -> bool:
    if frame.n_features < 2:
        return False
    xs, ys = frame.values[:, 0], frame.values[:, 1]
    colors = []
    for entity, cluster in zip(model.entity_ids, model.labels):
        label = labeling.get(entity) if labeling else None
        if cluster < 0:
            colors.append(NOISE_HEX)
        elif label is not None:
            colors.append(COLOR_HEX[label.color])
        else:
            colors.append("#1f77b4")
    fig, ax = plt.subplots(figsize=(4.2, 4))
    ax.scatter(xs, ys, c=colors, s=24, edgecolors="none")
    ax.set_xlabel(frame.feature_names[0])
    ax.set_ylabel(frame.feature_names[1])
    ax.set_title(f"{name}: clusters")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return True


def _figure_map(path: Path, ingest: IngestResult, compared: CompareResult) -> bool:
    if not compared.labelings:
        return False
    dims = sorted(compared.labelings)
    fig, axes = plt.subplots(1, len(dims), figsize=(3.6 * len(dims), 3.6),
                             squeeze=False)
    drew = False
    for ax, dim in zip(axes[0], dims):
        xs, ys, cs = [], [], []
        for entity, label in sorted(compared.labelings[dim].items()):
            info = ingest.registry.by_code.get(entity)
            if info is None:
                continue
            lat, lon = info.centroid
            xs.append(lon)
            ys.append(lat)
            cs.append(COLOR_HEX[label.color])
        if xs:
            drew = True
            ax.scatter(xs, ys, c=cs, s=30, edgecolors="black", linewidths=0.3)
        ax.set_title(dim)
        ax.set_xlabel("lon")
        ax.set_ylabel("lat")
    if not drew:
        plt.close(fig)
        return False
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return True


def _figure_net_growth(path: Path, ingest: IngestResult,
                       compared: CompareResult) -> bool:
    from .compare import net_growth_series

    demography = next(
        (b for b in ingest.bundles.values() if b.kind == "demography"), None)
    if demography is None or not compared.flagged:
        return False
    fig, ax = plt.subplots(figsize=(6, 3.4))
    drew = False
    for flagged in compared.flagged[:6]:
        try:
            series = net_growth_series(demography.records, flagged.area)
        except GeoClusterError:
            continue
        years = [t for t, _ in series.points]
        ax.plot(years, series.values(), marker=".",
                label=demography.entity_names.get(flagged.area, flagged.area))
        drew = True
    if not drew:
        plt.close(fig)
        return False
    ax.set_xlabel("year")
    ax.set_ylabel("net business growth")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return True


def _figure_sentiment(path: Path, compared: CompareResult) -> bool:
    if not compared.sentiment_ranking:
        return False
    sectors = [s for s, _ in compared.sentiment_ranking]
    peaks = [p for _, p in compared.sentiment_ranking]
    fig, ax = plt.subplots(figsize=(6, 0.32 * len(sectors) + 1.2))
    ax.barh(range(len(sectors)), peaks, color="#1f77b4")
    ax.set_yticks(range(len(sectors)))
    ax.set_yticklabels(sectors, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("peak share with trading paused")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return True


def _render_all_figures(out_dir: Path, ingest: IngestResult,
                        evaluated: EvaluateResult, compared: CompareResult,
                        written: list[Path] | None = None) -> list[Path]:
    figures_dir = out_dir / "figures"
    figures_dir.mkdir(parents=True, exist_ok=True)
    written = [] if written is None else written
    for name, selection in sorted(evaluated.datasets.items()):
        if _figure_elbow(figures_dir / f"elbow_{name}.png", name, selection):
            written.append(figures_dir / f"elbow_{name}.png")
        bundle = ingest.bundles[name]
        labeling = compared.labelings.get(bundle.dimension or "", {})
        frame_key = selection.frame_keys[selection.selected.descriptor]
        # frames are not cached on the selection; scatter needs the model only
        model = selection.selected.model
        if model is not None and model.centroids.shape[1] >= 2:
            frame = _frame_from_model(bundle, frame_key)
            if frame is not None and _figure_scatter(
                    figures_dir / f"scatter_{name}.png", name, frame, model, labeling):
                written.append(figures_dir / f"scatter_{name}.png")
    if _figure_map(figures_dir / "map.png", ingest, compared):
        written.append(figures_dir / "map.png")
    if _figure_net_growth(figures_dir / "net_growth.png", ingest, compared):
        written.append(figures_dir / "net_growth.png")
    if _figure_sentiment(figures_dir / "sentiment_exposure.png", compared):
        written.append(figures_dir / "sentiment_exposure.png")
    return written


def _frame_from_model(bundle, frame_key):
    """Rebuild the clustering input for plotting from the bundle."""
    from .pca import fit_pca, transform

    base = bundle.base_frame
    if base is None:
        return None
    if frame_key == "raw":
        return base
    if frame_key.startswith("PCA="):
        p = int(frame_key.split("=", 1)[1])
        try:
            return transform(fit_pca(base, p), base)
        except GeoClusterError:
            try:
                return transform(fit_pca(base, p, standardize=False), base)
            except GeoClusterError:
                return None
    return None


# ---------------------------------------------------------------------------
# emission

def emit_artifacts(config: PipelineConfig, ingest: IngestResult,
                   evaluated: EvaluateResult, compared: CompareResult,
                   report: RunReport, *, render_figures: bool = True) -> list[Path]:
    """Write every artifact; on failure remove whatever was written."""
    figures_wanted = render_figures
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    names = {}
    for bundle in ingest.bundles.values():
        names.update(bundle.entity_names)
    try:
        path = out / "run_report.json"
        path.write_text(report.to_json(), encoding="utf-8")
        written.append(path)

        path = out / "labels.csv"
        path.write_text(labels_csv(ingest, evaluated, compared), encoding="utf-8")
        written.append(path)

        path = out / "labels.geojson"
        payload = comparison_geojson(config, ingest, compared)
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
        written.append(path)

        path = out / "model_grid.md"
        path.write_text(model_grid_markdown(evaluated), encoding="utf-8")
        written.append(path)

        path = out / "rag_table.md"
        path.write_text(rag_markdown(compared, names) + sentiment_markdown(compared),
                        encoding="utf-8")
        written.append(path)

        path = out / "rag_table.csv"
        path.write_text(rag_csv(compared, names), encoding="utf-8")
        written.append(path)

        if figures_wanted:
            # figures append into the shared list so cleanup covers partials
            _render_all_figures(out, ingest, evaluated, compared, written)
    except Exception:
        clean_partial_artifacts(written)
        raise
    return written
