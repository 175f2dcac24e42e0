"""Four-stage pipeline orchestration with per-stage caches keyed by run id."""

from __future__ import annotations

import json
import logging
import shutil
import time
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from .clustering import ClusterModel, ClusterParams, agglomerative, dbscan, kmeans
from .compare import (
    ComparisonTable, IntensityLabel, detect_discrepancies, label_intensity,
    net_growth_series, rag_table, sentiment_exposure, trend_slope,
)
from .config import DatasetConfig, PipelineConfig, run_id_for
from .errors import ConfigError, DataError, GeoClusterError, UnmappedLocation
from .frame import ObservationFrame
from .geo import (
    GeoEntity, GeoRegistry, aggregate, load_aggregation,
    load_mappings, load_registry, normalize_name, resolve,
)
from .pca import fit_pca, transform
from .quality import CandidateRun, QualityReport, score_report, select_model

log = logging.getLogger("geocluster.pipeline")

DERIVED_FIELDS = ("survival_index", "death_ratio", "avg_births", "avg_deaths",
                  "avg_active", "avg_loan")


class _WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


class capture_warnings:
    """Collect engine warnings emitted while a stage runs."""

    def __enter__(self):
        self.handler = _WarningCollector()
        logging.getLogger("geocluster").addHandler(self.handler)
        return self.handler.messages

    def __exit__(self, *exc):
        logging.getLogger("geocluster").removeHandler(self.handler)
        return False


# ---------------------------------------------------------------------------
# stage outputs

@dataclass
class DatasetBundle:
    name: str
    kind: str
    dimension: str | None
    records: list
    base_frame: ObservationFrame | None
    intensity_frame: ObservationFrame | None
    intensity_feature: str | None
    entity_names: dict[str, str] = field(default_factory=dict)


@dataclass
class IngestResult:
    bundles: dict[str, DatasetBundle]
    registry: GeoRegistry
    warnings: list[str]


@dataclass
class DatasetCandidates:
    name: str
    frames: dict[str, ObservationFrame]  # frame key -> clustering input
    candidates: list[tuple[str, str, ClusterModel]]  # (descriptor, frame key, model)


@dataclass
class ClusterResult:
    datasets: dict[str, DatasetCandidates]
    warnings: list[str]


@dataclass
class DatasetSelection:
    name: str
    candidates: list[CandidateRun]
    frame_keys: dict[str, str]  # descriptor -> frame key
    selected: CandidateRun


@dataclass
class EvaluateResult:
    datasets: dict[str, DatasetSelection]
    warnings: list[str]


@dataclass
class FlaggedArea:
    area: str
    gap: int
    trend_slope: float | None


@dataclass
class CompareResult:
    labelings: dict[str, dict[str, IntensityLabel]]  # dimension -> entity -> label
    table: ComparisonTable | None
    flagged: list[FlaggedArea]
    sentiment_ranking: list[tuple[str, float]]
    threshold: int
    warnings: list[str]


@dataclass
class RunReport:
    run_id: str
    warnings: list[str]
    datasets: dict
    comparison: dict
    sentiment: list
    timings: dict[str, float] = field(default_factory=dict)  # logged, not persisted

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "warnings": sorted(self.warnings),
            "datasets": self.datasets,
            "comparison": self.comparison,
            "sentiment": self.sentiment,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# ingest stage


def _in_region(entity: GeoEntity, region: str | None) -> bool:
    if region is None:
        return True
    return normalize_name(entity.parent_region) == normalize_name(region)

def _registry_entity_for(record_code: str, record_name: str,
                         registry: GeoRegistry, mappings, strict: bool) -> GeoEntity | None:
    if record_code in registry.by_code:
        return registry.by_code[record_code]
    try:
        entity = resolve(record_name, registry, mappings)
    except UnmappedLocation:
        if strict:
            raise
        log.warning("excluding unmapped area %r (%s)", record_name, record_code)
        return None
    if entity.code not in registry.by_code:
        registry.add(entity)
    log.warning("area %r remapped to %r", record_name, entity.canonical_name)
    return entity


def _demography_bundle(ds: DatasetConfig, config: PipelineConfig,
                       registry: GeoRegistry, mappings) -> DatasetBundle:
    records = ds_mod.ingest_demography(
        ds.files, ds.schema, year_range=config.year_range)
    kept: list[ds_mod.DemographyRecord] = []
    names: dict[str, str] = {}
    for record in records:
        entity = _registry_entity_for(
            record.area_code, record.area_name, registry, mappings,
            config.geo.strict)
        if entity is None:
            continue
        if record.area_code != entity.code:
            record = ds_mod.DemographyRecord(
                entity.canonical_name, entity.code, record.year,
                record.births, record.deaths, record.active)
        if not _in_region(entity, config.geo.region):
            continue
        names[entity.code] = entity.canonical_name
        kept.append(record)
    if not kept:
        raise DataError(f"dataset {ds.name!r}: no records after geo filtering")
    years = ds.feature_years or config.window
    spec = [(f, y) for f in (ds.feature_fields or ["births", "deaths", "active"])
            for y in range(years[0], years[1] + 1)]
    base = ds_mod.build_frame(kept, spec).complete_rows()
    by_area: dict[str, list] = {}
    for record in kept:
        by_area.setdefault(record.area_code, []).append(record)
    derived = [
        ds_mod.derive_indices(rows, window=config.window)
        for _, rows in sorted(by_area.items())
    ]
    intensity = ds_mod.build_frame(derived, [(f, None) for f in DERIVED_FIELDS if f != "avg_loan"])
    return DatasetBundle(
        name=ds.name, kind="demography", dimension=ds.dimension,
        records=kept, base_frame=base, intensity_frame=intensity,
        intensity_feature=ds.intensity_feature or "avg_deaths",
        entity_names=names,
    )


def _loans_bundle(ds: DatasetConfig, config: PipelineConfig,
                  registry: GeoRegistry, mappings) -> DatasetBundle:
    if len(ds.files) != 1:
        raise ConfigError(f"dataset {ds.name!r}: loans expect exactly one file")
    records = ds_mod.ingest_loans(ds.files[0], ds.schema or None)
    kept = []
    names: dict[str, str] = {}
    for record in records:
        try:
            entity = resolve(record.constituency_name, registry, mappings)
        except UnmappedLocation:
            if config.geo.strict:
                raise
            log.warning("excluding unmapped constituency %r", record.constituency_name)
            continue
        if entity.code not in registry.by_code:
            registry.add(entity)
        if not _in_region(entity, config.geo.region):
            continue
        names[entity.code] = entity.canonical_name
        kept.append(ds_mod.LoanRecord(
            entity.canonical_name, entity.code, record.as_of_date,
            record.application_count, record.total_value))
    if not kept:
        raise DataError(f"dataset {ds.name!r}: no records after geo filtering")
    frame = ds_mod.build_frame(
        kept, [("application_count", None), ("total_value", None)])
    if ds.aggregation:
        agg_map = load_aggregation(ds.aggregation)
        frame = aggregate(frame, agg_map, ds.aggregation_strategy)
        names = {code: registry.by_code[code].canonical_name
                 for code in frame.entity_ids if code in registry.by_code}
    apps = frame.column("application_count")
    values = frame.column("total_value")
    with np.errstate(invalid="ignore", divide="ignore"):
        avg_loan = np.where(apps > 0, values / np.maximum(apps, 1), np.nan)
    intensity = frame.hstack(ObservationFrame(
        list(frame.entity_ids), ["avg_loan"], avg_loan.reshape(-1, 1)))
    return DatasetBundle(
        name=ds.name, kind="loans", dimension=ds.dimension,
        records=kept, base_frame=frame.complete_rows(), intensity_frame=intensity,
        intensity_feature=ds.intensity_feature or "application_count",
        entity_names=names,
    )


def _sectors_bundle(ds: DatasetConfig, config: PipelineConfig,
                    registry: GeoRegistry, mappings) -> DatasetBundle:
    if len(ds.files) != 1:
        raise ConfigError(f"dataset {ds.name!r}: sectors expect exactly one file")
    divisions = tuple(ds.divisions) if ds.divisions else ds_mod.DEFAULT_SIC_DIVISIONS
    profiles = ds_mod.ingest_sectors(ds.files[0], ds.schema or None,
                                     divisions=divisions)
    year = ds.year
    if year is None:
        raise ConfigError(f"dataset {ds.name!r}: sectors need a profile year")
    kept = []
    names: dict[str, str] = {}
    for profile in profiles:
        if profile.area_code not in registry.by_code:
            if config.geo.strict:
                raise UnmappedLocation(profile.area_code)
            log.warning("excluding unmapped area %r", profile.area_code)
            continue
        entity = registry.by_code[profile.area_code]
        if not _in_region(entity, config.geo.region):
            continue
        names[entity.code] = entity.canonical_name
        kept.append(profile)
    if not kept:
        raise DataError(f"dataset {ds.name!r}: no records after geo filtering")
    base = ds_mod.build_frame(
        kept, [(division, year) for division in divisions]).complete_rows()
    totals = np.nansum(base.values, axis=1).reshape(-1, 1)
    intensity = base.hstack(ObservationFrame(
        list(base.entity_ids), ["total_businesses"], totals))
    return DatasetBundle(
        name=ds.name, kind="sectors", dimension=ds.dimension,
        records=kept, base_frame=base, intensity_frame=intensity,
        intensity_feature=ds.intensity_feature or "total_businesses",
        entity_names=names,
    )


def _sentiment_bundle(ds: DatasetConfig) -> DatasetBundle:
    snaps = ds_mod.ingest_sentiment(ds.files, ds.schema or None)
    return DatasetBundle(
        name=ds.name, kind="sentiment", dimension=None, records=snaps,
        base_frame=None, intensity_frame=None, intensity_feature=None,
    )


def stage_ingest(config: PipelineConfig) -> IngestResult:
    """Ingest + geo resolution + derived indices for every configured dataset."""
    registry = load_registry(config.geo.registry)
    mappings = load_mappings(config.geo.mappings) if config.geo.mappings else []
    if config.geo.region:
        valid = {r for r in registry.regions()}
        if config.geo.region not in valid:
            raise ConfigError(
                f"unknown region {config.geo.region!r}; valid regions: {sorted(valid)}")
    bundles: dict[str, DatasetBundle] = {}
    with capture_warnings() as warnings:
        for name, ds in sorted(config.datasets.items()):
            if ds.kind == "demography":
                bundles[name] = _demography_bundle(ds, config, registry, mappings)
            elif ds.kind == "loans":
                bundles[name] = _loans_bundle(ds, config, registry, mappings)
            elif ds.kind == "sectors":
                bundles[name] = _sectors_bundle(ds, config, registry, mappings)
            elif ds.kind == "sentiment":
                bundles[name] = _sentiment_bundle(ds)
    return IngestResult(bundles=bundles, registry=registry, warnings=list(warnings))


# ---------------------------------------------------------------------------
# cluster stage

def _descriptor(algorithm: str, frame_key: str, k: int | None,
                settings) -> str:
    parts = []
    if algorithm != "kmeans":
        parts.append(algorithm)
    if frame_key != "raw":
        parts.append(frame_key)
    if algorithm == "dbscan":
        parts.append(f"eps={settings.eps:g}")
        parts.append(f"min_samples={settings.min_samples}")
    else:
        parts.append(f"k={k}")
    return ", ".join(parts)


def stage_cluster(config: PipelineConfig, ingest: IngestResult) -> ClusterResult:
    """Fit the configured algorithm grid per dataset over the reduce grid."""
    out: dict[str, DatasetCandidates] = {}
    with capture_warnings() as warnings:
        for name, ds in sorted(config.datasets.items()):
            bundle = ingest.bundles[name]
            if ds.cluster is None or bundle.base_frame is None:
                continue
            base = bundle.base_frame
            frames: dict[str, ObservationFrame] = {}
            if ds.reduce and ds.reduce.n_components:
                for p in ds.reduce.n_components:
                    projection = fit_pca(base, p, standardize=ds.reduce.standardize)
                    frames[f"PCA={p}"] = transform(projection, base)
            else:
                frames["raw"] = base
            candidates: list[tuple[str, str, ClusterModel]] = []
            settings = ds.cluster
            for frame_key in frames:
                frame = frames[frame_key]
                for algorithm in settings.algorithms:
                    if algorithm == "dbscan":
                        params = ClusterParams(
                            algorithm="dbscan", eps=settings.eps,
                            min_samples=settings.min_samples, seed=config.seed)
                        model = dbscan(frame, params)
                        candidates.append(
                            (_descriptor("dbscan", frame_key, None, settings),
                             frame_key, model))
                        continue
                    for k in range(settings.k_range[0], settings.k_range[1] + 1):
                        params = ClusterParams(
                            algorithm=algorithm, k=k, seed=config.seed,
                            restarts=settings.restarts, max_iter=settings.max_iter,
                            tol=settings.tol, linkage=settings.linkage)
                        fit = kmeans if algorithm == "kmeans" else agglomerative
                        try:
                            model = fit(frame, params)
                        except DataError as exc:
                            log.warning("candidate %s on %s skipped: %s",
                                        _descriptor(algorithm, frame_key, k, settings),
                                        name, exc)
                            continue
                        candidates.append(
                            (_descriptor(algorithm, frame_key, k, settings),
                             frame_key, model))
            if not candidates:
                raise DataError(f"dataset {name!r}: clustering produced no candidates")
            out[name] = DatasetCandidates(name=name, frames=frames,
                                          candidates=candidates)
    return ClusterResult(datasets=out, warnings=list(warnings))


# ---------------------------------------------------------------------------
# evaluate stage

def stage_evaluate(config: PipelineConfig, clusters: ClusterResult,
                   forced: dict[str, int] | None = None) -> EvaluateResult:
    """Score every candidate and apply the selection rule per dataset."""
    forced = forced or {}
    out: dict[str, DatasetSelection] = {}
    with capture_warnings() as warnings:
        for name, dc in sorted(clusters.datasets.items()):
            ds = config.datasets[name]
            runs: list[CandidateRun] = []
            frame_keys: dict[str, str] = {}
            for descriptor, frame_key, model in dc.candidates:
                try:
                    report = score_report(dc.frames[frame_key], model.labels)
                except DataError as exc:
                    log.warning("candidate %r on %s not scoreable: %s",
                                descriptor, name, exc)
                    continue
                runs.append(CandidateRun(descriptor, model, report))
                frame_keys[descriptor] = frame_key
            if not runs:
                raise DataError(f"dataset {name!r}: no scoreable candidates")
            forced_k = forced.get(name, ds.forced_k)
            selected = select_model(runs, forced_k=forced_k)
            out[name] = DatasetSelection(
                name=name, candidates=runs, frame_keys=frame_keys,
                selected=selected)
    return EvaluateResult(datasets=out, warnings=list(warnings))


# ---------------------------------------------------------------------------
# compare stage

def stage_compare(config: PipelineConfig, ingest: IngestResult,
                  evaluated: EvaluateResult,
                  threshold: int | None = None) -> CompareResult:
    """Intensity labels per dimension, RAG join, discrepancy flags with slopes."""
    threshold = config.threshold if threshold is None else threshold
    labelings: dict[str, dict[str, IntensityLabel]] = {}
    with capture_warnings() as warnings:
        for name, selection in sorted(evaluated.datasets.items()):
            bundle = ingest.bundles[name]
            if bundle.dimension is None or bundle.intensity_frame is None:
                continue
            labels = label_intensity(
                selection.selected.model, bundle.intensity_frame,
                bundle.intensity_feature)
            labelings[bundle.dimension] = labels
        table = rag_table(labelings) if labelings else None
        flagged: list[FlaggedArea] = []
        if table is not None and table.gaps:
            demography = next(
                (b for b in ingest.bundles.values() if b.kind == "demography"), None)
            for area, gap in detect_discrepancies(table, threshold):
                slope = None
                if demography is not None:
                    try:
                        slope = trend_slope(net_growth_series(demography.records, area))
                    except DataError:
                        log.warning("no trend available for flagged area %r", area)
                flagged.append(FlaggedArea(area=area, gap=gap, trend_slope=slope))
        sentiment = next(
            (b for b in ingest.bundles.values() if b.kind == "sentiment"), None)
        ranking = sentiment_exposure(sentiment.records) if sentiment else []
    return CompareResult(
        labelings=labelings, table=table, flagged=flagged,
        sentiment_ranking=ranking, threshold=threshold, warnings=list(warnings))


# ---------------------------------------------------------------------------
# run report + full pipeline

def build_report(run_id: str, config: PipelineConfig, ingest: IngestResult,
                 evaluated: EvaluateResult, compared: CompareResult,
                 timings: dict[str, float]) -> RunReport:
    datasets = {}
    for name, selection in sorted(evaluated.datasets.items()):
        bundle = ingest.bundles[name]
        datasets[name] = {
            "dimension": bundle.dimension,
            "entities": bundle.base_frame.n_entities if bundle.base_frame else 0,
            "features": bundle.base_frame.feature_names if bundle.base_frame else [],
            "candidates": [
                {
                    "descriptor": c.descriptor,
                    "silhouette": c.report.silhouette,
                    "davies_bouldin": c.report.davies_bouldin,
                    "n_clusters": c.report.n_clusters_scored,
                    "noise_excluded": c.report.noise_excluded,
                }
                for c in selection.candidates
            ],
            "selected": selection.selected.descriptor,
            "forced": selection.selected.forced,
        }
    comparison = {"threshold": compared.threshold}
    if compared.table is not None:
        comparison["table"] = compared.table.to_dict()
        comparison["flagged"] = [
            {"area": f.area, "gap": f.gap, "trend_slope": f.trend_slope}
            for f in compared.flagged
        ]
    warnings = sorted(set(
        ingest.warnings + evaluated.warnings + compared.warnings))
    return RunReport(
        run_id=run_id,
        warnings=warnings,
        datasets=datasets,
        comparison=comparison,
        sentiment=[[s, p] for s, p in compared.sentiment_ranking],
        timings=timings,
    )


def run_pipeline(config: PipelineConfig, *, threshold: int | None = None,
                 forced: dict[str, int] | None = None,
                 render_figures: bool = True,
                 write_cache: bool = True) -> RunReport:
    """Execute every stage and emit artifacts into the output directory.

    Identical config + inputs produce byte-identical artifacts; stage wall
    times are logged, never persisted.
    """
    from . import report as report_mod

    run_id = run_id_for(config)
    timings: dict[str, float] = {}
    stage_outputs = {}
    try:
        t0 = time.perf_counter()
        ingest = stage_ingest(config)
        timings["ingest"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        clusters = stage_cluster(config, ingest)
        timings["cluster"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        evaluated = stage_evaluate(config, clusters, forced=forced)
        timings["evaluate"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        compared = stage_compare(config, ingest, evaluated, threshold=threshold)
        timings["compare"] = time.perf_counter() - t0
        stage_outputs = {
            "ingest": ingest, "cluster": clusters,
            "evaluate": evaluated, "compare": compared,
        }
    except GeoClusterError as exc:
        stage = {0: "ingest", 1: "cluster", 2: "evaluate", 3: "compare"}[len(timings)]
        wrapper = ConfigError if isinstance(exc, ConfigError) else DataError
        raise wrapper(f"stage {stage}: {exc}") from exc

    report = build_report(run_id, config, ingest, evaluated, compared, timings)
    for stage, elapsed in timings.items():
        log.info("stage %s took %.3fs", stage, elapsed)

    if write_cache:
        cache = CacheStore(config)
        cache.save_ingest(ingest)
        cache.save_cluster(clusters)
        cache.save_evaluate(evaluated)
        cache.save_compare(compared)

    t0 = time.perf_counter()
    report_mod.emit_artifacts(
        config, ingest, evaluated, compared, report,
        render_figures=render_figures)
    timings["report"] = time.perf_counter() - t0
    log.info("stage report took %.3fs", timings["report"])
    return report


# ---------------------------------------------------------------------------
# stage caches (JSON under <output_dir>/cache/<run_id>/)

def _record_to_list(record):
    if isinstance(record, ds_mod.DemographyRecord):
        return [record.area_name, record.area_code, record.year,
                record.births, record.deaths, record.active]
    if isinstance(record, ds_mod.LoanRecord):
        return [record.constituency_name, record.constituency_code,
                record.as_of_date.isoformat(), record.application_count,
                record.total_value]
    if isinstance(record, ds_mod.SectorProfile):
        return [record.area_code, record.year, record.sector_counts]
    if isinstance(record, ds_mod.SentimentSnapshot):
        return [record.sector, record.period_start.isoformat(),
                record.period_end.isoformat(), record.pct_trading_paused]
    raise ConfigError(f"unserializable record {type(record).__name__}")


def _record_from_list(kind: str, row):
    if kind == "demography":
        return ds_mod.DemographyRecord(row[0], row[1], row[2], row[3], row[4], row[5])
    if kind == "loans":
        return ds_mod.LoanRecord(row[0], row[1], date.fromisoformat(row[2]),
                                 row[3], row[4])
    if kind == "sectors":
        return ds_mod.SectorProfile(row[0], row[1], dict(row[2]))
    if kind == "sentiment":
        return ds_mod.SentimentSnapshot(row[0], date.fromisoformat(row[1]),
                                        date.fromisoformat(row[2]), row[3])
    raise ConfigError(f"unknown record kind {kind!r}")


class CacheStore:
    """Per-stage JSON caches; lets each subcommand run against prior outputs."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.run_id = run_id_for(config)
        self.root = Path(config.output_dir) / "cache" / self.run_id

    def _path(self, stage: str) -> Path:
        return self.root / f"{stage}.json"

    def _write(self, stage: str, payload: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self._path(stage).write_text(
            json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")

    def _read(self, stage: str, needed_by: str) -> dict:
        path = self._path(stage)
        if not path.exists():
            raise ConfigError(
                f"no cached {stage} output for run {self.run_id}; "
                f"run `geocluster {stage}` before `geocluster {needed_by}`")
        return json.loads(path.read_text(encoding="utf-8"))

    # -- ingest

    def save_ingest(self, ingest: IngestResult) -> None:
        synthetic = [
            [e.code, e.canonical_name, e.kind, e.centroid[0], e.centroid[1],
             e.parent_region]
            for e in ingest.registry.by_code.values()
            if e.code.startswith("synthetic:")
        ]
        payload = {
            "warnings": ingest.warnings,
            "synthetic_entities": synthetic,
            "bundles": {
                name: {
                    "kind": b.kind,
                    "dimension": b.dimension,
                    "records": [_record_to_list(r) for r in b.records],
                    "base_frame": b.base_frame.to_dict() if b.base_frame else None,
                    "intensity_frame": (
                        b.intensity_frame.to_dict() if b.intensity_frame else None),
                    "intensity_feature": b.intensity_feature,
                    "entity_names": b.entity_names,
                }
                for name, b in sorted(ingest.bundles.items())
            },
        }
        self._write("ingest", payload)

    def load_ingest(self, needed_by: str = "cluster") -> IngestResult:
        payload = self._read("ingest", needed_by)
        registry = load_registry(self.config.geo.registry)
        for code, name, kind, lat, lon, region in payload["synthetic_entities"]:
            registry.add(GeoEntity(code, name, kind, (lat, lon), region))
        bundles = {}
        for name, raw in payload["bundles"].items():
            bundles[name] = DatasetBundle(
                name=name,
                kind=raw["kind"],
                dimension=raw["dimension"],
                records=[_record_from_list(raw["kind"], r) for r in raw["records"]],
                base_frame=(ObservationFrame.from_dict(raw["base_frame"])
                            if raw["base_frame"] else None),
                intensity_frame=(ObservationFrame.from_dict(raw["intensity_frame"])
                                 if raw["intensity_frame"] else None),
                intensity_feature=raw["intensity_feature"],
                entity_names=dict(raw["entity_names"]),
            )
        return IngestResult(bundles=bundles, registry=registry,
                            warnings=list(payload["warnings"]))

    # -- cluster

    def save_cluster(self, clusters: ClusterResult) -> None:
        payload = {
            "warnings": clusters.warnings,
            "datasets": {
                name: {
                    "frames": {k: f.to_dict() for k, f in dc.frames.items()},
                    "candidates": [
                        [descriptor, frame_key, model.to_dict()]
                        for descriptor, frame_key, model in dc.candidates
                    ],
                }
                for name, dc in sorted(clusters.datasets.items())
            },
        }
        self._write("cluster", payload)

    def load_cluster(self, needed_by: str = "evaluate") -> ClusterResult:
        payload = self._read("cluster", needed_by)
        datasets = {}
        for name, raw in payload["datasets"].items():
            datasets[name] = DatasetCandidates(
                name=name,
                frames={k: ObservationFrame.from_dict(f)
                        for k, f in raw["frames"].items()},
                candidates=[
                    (descriptor, frame_key, ClusterModel.from_dict(model))
                    for descriptor, frame_key, model in raw["candidates"]
                ],
            )
        return ClusterResult(datasets=datasets, warnings=list(payload["warnings"]))

    # -- evaluate

    def save_evaluate(self, evaluated: EvaluateResult) -> None:
        payload = {
            "warnings": evaluated.warnings,
            "datasets": {
                name: {
                    "frame_keys": sel.frame_keys,
                    "selected": sel.selected.descriptor,
                    "forced": sel.selected.forced,
                    "candidates": [
                        {
                            "descriptor": c.descriptor,
                            "model": c.model.to_dict() if c.model else None,
                            "report": c.report.to_dict(),
                        }
                        for c in sel.candidates
                    ],
                }
                for name, sel in sorted(evaluated.datasets.items())
            },
        }
        self._write("evaluate", payload)

    def load_evaluate(self, needed_by: str = "compare") -> EvaluateResult:
        payload = self._read("evaluate", needed_by)
        datasets = {}
        for name, raw in payload["datasets"].items():
            candidates = [
                CandidateRun(
                    descriptor=c["descriptor"],
                    model=ClusterModel.from_dict(c["model"]) if c["model"] else None,
                    report=QualityReport(**c["report"]),
                )
                for c in raw["candidates"]
            ]
            selected = next(c for c in candidates
                            if c.descriptor == raw["selected"])
            selected.forced = raw["forced"]
            datasets[name] = DatasetSelection(
                name=name, candidates=candidates,
                frame_keys=dict(raw["frame_keys"]), selected=selected)
        return EvaluateResult(datasets=datasets, warnings=list(payload["warnings"]))

    # -- compare

    def save_compare(self, compared: CompareResult) -> None:
        payload = {
            "warnings": compared.warnings,
            "threshold": compared.threshold,
            "labelings": {
                dim: {
                    entity: [l.ordinal, l.name, l.color]
                    for entity, l in sorted(labels.items())
                }
                for dim, labels in sorted(compared.labelings.items())
            },
            "flagged": [
                [f.area, f.gap, f.trend_slope] for f in compared.flagged
            ],
            "sentiment": [[s, p] for s, p in compared.sentiment_ranking],
        }
        self._write("compare", payload)

    def load_compare(self, needed_by: str = "report") -> CompareResult:
        payload = self._read("compare", needed_by)
        labelings = {
            dim: {
                entity: IntensityLabel(ordinal=v[0], name=v[1], color=v[2])
                for entity, v in labels.items()
            }
            for dim, labels in payload["labelings"].items()
        }
        table = rag_table(labelings) if labelings else None
        return CompareResult(
            labelings=labelings,
            table=table,
            flagged=[FlaggedArea(a, g, s) for a, g, s in payload["flagged"]],
            sentiment_ranking=[(s, p) for s, p in payload["sentiment"]],
            threshold=payload["threshold"],
            warnings=list(payload["warnings"]),
        )


def clean_partial_artifacts(paths: list[Path]) -> None:
    for path in paths:
        try:
            if path.is_dir():
                shutil.rmtree(path)
            elif path.exists():
                path.unlink()
        except OSError:
            log.warning("could not remove partial artifact %s", path)
