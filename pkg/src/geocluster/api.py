"""JSON-over-HTTP workbench service: steer parameters, rerun, compare, drill in."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .clustering import ClusterParams, agglomerative, dbscan, kmeans
from .compare import (
    detect_discrepancies, label_intensity, net_growth_series, rag_table,
    trend_slope,
)
from .config import PipelineConfig
from .errors import ConfigError, DataError, GeoClusterError
from .frame import summarize_distribution
from .pca import fit_pca, transform
from .pipeline import IngestResult, stage_ingest
from .quality import score_report
from .report import COLOR_HEX

log = logging.getLogger("geocluster.api")


class _NotFound(Exception):
    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


class RunRequest(BaseModel):
    dataset: str
    algorithm: str = "kmeans"
    k: int = Field(default=3, ge=1)
    eps: float = Field(default=1.0, gt=0)
    min_samples: int = Field(default=2, ge=1)
    linkage: str = "ward"
    n_components: int | None = Field(default=None, ge=1)
    standardize: bool = True
    intensity_feature: str | None = None
    seed: int | None = None

    def canonical(self) -> dict:
        return {
            "dataset": self.dataset,
            "algorithm": self.algorithm,
            "k": self.k,
            "eps": self.eps,
            "min_samples": self.min_samples,
            "linkage": self.linkage,
            "n_components": self.n_components,
            "standardize": self.standardize,
            "intensity_feature": self.intensity_feature,
            "seed": self.seed,
        }


class RunStore:
    """Completed runs are immutable; repeat submissions hit the cache."""

    def __init__(self, write_through: Path | None = None):
        self._runs: dict[str, dict] = {}
        self._lock = threading.Lock()
        self.write_through = write_through

    def get(self, run_id: str) -> dict | None:
        return self._runs.get(run_id)

    def put(self, run_id: str, payload: dict) -> dict:
        with self._lock:
            existing = self._runs.get(run_id)
            if existing is not None:
                return existing
            self._runs[run_id] = payload
            if self.write_through is not None:
                self.write_through.mkdir(parents=True, exist_ok=True)
                (self.write_through / f"{run_id}.json").write_text(
                    json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")
            return payload


def _frame_digest(frame) -> str:
    h = hashlib.sha256()
    h.update(",".join(frame.entity_ids).encode())
    h.update(",".join(frame.feature_names).encode())
    h.update(frame.values.tobytes())
    return h.hexdigest()


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def _dataset_years(bundle) -> list[int]:
    years = set()
    for record in bundle.records:
        year = getattr(record, "year", None)
        if year is not None:
            years.add(year)
    return sorted(years)


def build_app(config: PipelineConfig, *, ingest: IngestResult | None = None,
              write_through: bool = False,
              static_dir: Path | None = None) -> FastAPI:
    """Assemble the service around one loaded workspace."""
    workspace = ingest or stage_ingest(config)
    store = RunStore(
        write_through=(Path(config.output_dir) / "api-runs")
        if write_through else None)
    app = FastAPI(title="geocluster workbench", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])
    app.state.workspace = workspace
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def on_validation(request: Request, exc: RequestValidationError):
        fields = ", ".join(
            ".".join(str(p) for p in err["loc"] if p != "body")
            for err in exc.errors())
        return _error(400, "invalid_params", f"invalid fields: {fields}")

    @app.exception_handler(ConfigError)
    async def on_config_error(request: Request, exc: ConfigError):
        return _error(400, "invalid_params", str(exc))

    @app.exception_handler(DataError)
    async def on_data_error(request: Request, exc: DataError):
        return _error(422, "data_error", str(exc))

    @app.get("/datasets")
    def list_datasets():
        out = []
        for name, bundle in sorted(workspace.bundles.items()):
            out.append({
                "name": name,
                "kind": bundle.kind,
                "dimension": bundle.dimension,
                "entities": bundle.base_frame.n_entities if bundle.base_frame else 0,
                "features": bundle.base_frame.feature_names if bundle.base_frame else [],
                "years": _dataset_years(bundle),
                "intensity_feature": bundle.intensity_feature,
            })
        return out

    @app.get("/datasets/{name}/distribution")
    def dataset_distribution(name: str, feature: str):
        bundle = workspace.bundles.get(name)
        if bundle is None:
            raise _NotFound(f"unknown dataset {name!r}")
        for frame in (bundle.intensity_frame, bundle.base_frame):
            if frame is not None and feature in frame.feature_names:
                s = summarize_distribution(frame, feature)
                return {
                    "feature": s.feature, "n": s.n, "min": s.minimum,
                    "q1": s.q1, "median": s.median, "q3": s.q3,
                    "max": s.maximum, "iqr": s.iqr,
                    "outliers": [[e, v] for e, v in s.outliers],
                }
        raise ConfigError(f"unknown feature {feature!r} for dataset {name!r}")

    def _execute(request: RunRequest) -> dict:
        bundle = workspace.bundles.get(request.dataset)
        if bundle is None or bundle.base_frame is None:
            raise _NotFound(f"unknown dataset {request.dataset!r}")
        seed = config.seed if request.seed is None else request.seed
        frame = bundle.base_frame
        if request.n_components is not None:
            projection = fit_pca(frame, request.n_components,
                                 standardize=request.standardize)
            frame = transform(projection, frame)
        params = ClusterParams(
            algorithm=request.algorithm, k=request.k, eps=request.eps,
            min_samples=request.min_samples, linkage=request.linkage,
            seed=seed, restarts=10).validate()
        run_id = hashlib.sha256(json.dumps(
            {**request.canonical(), "seed": seed,
             "frame": _frame_digest(bundle.base_frame)},
            sort_keys=True).encode()).hexdigest()[:16]
        cached = store.get(run_id)
        if cached is not None:
            return cached
        fit = {"kmeans": kmeans, "dbscan": dbscan,
               "agglomerative": agglomerative}[request.algorithm]
        model = fit(frame, params)
        report = score_report(frame, model.labels)
        feature = request.intensity_feature or bundle.intensity_feature
        intensity = label_intensity(model, bundle.intensity_frame, feature)
        payload = {
            "run_id": run_id,
            "status": "done",
            "created": datetime.now(timezone.utc).isoformat(),
            "dataset": request.dataset,
            "dimension": bundle.dimension,
            "request": {**request.canonical(), "seed": seed},
            "labels": {e: int(l) for e, l in zip(model.entity_ids, model.labels)},
            "quality": report.to_dict(),
            "wcss": model.wcss,
            "centroids": model.centroids.tolist(),
            "intensity": {
                e: {"ordinal": l.ordinal, "name": l.name, "color": l.color}
                for e, l in sorted(intensity.items())
            },
            "entity_names": bundle.entity_names,
        }
        return store.put(run_id, payload)

    @app.post("/runs")
    def create_run(request: RunRequest):
        result = _execute(request)
        return {
            "run_id": result["run_id"],
            "status": result["status"],
            "created": result["created"],
            "result": f"/runs/{result['run_id']}",
        }

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        run = store.get(run_id)
        if run is None:
            raise _NotFound(f"unknown run {run_id!r}")
        return run

    @app.get("/runs/{run_id}/geojson")
    def run_geojson(run_id: str):
        run = store.get(run_id)
        if run is None:
            raise _NotFound(f"unknown run {run_id!r}")
        features = []
        for entity, cluster in sorted(run["labels"].items()):
            info = workspace.registry.by_code.get(entity)
            if info is None:
                continue
            lat, lon = info.centroid
            label = run["intensity"].get(entity)
            properties = {
                "code": entity,
                "name": run["entity_names"].get(entity, entity),
                "cluster": cluster,
            }
            if label is not None:
                properties["label"] = label["name"]
                properties["color"] = label["color"]
                properties["fill"] = COLOR_HEX[label["color"]]
            features.append({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": properties,
            })
        return {"type": "FeatureCollection", "features": features}

    @app.get("/compare")
    def compare(runs: str, threshold: int = 2):
        run_ids = [r for r in runs.split(",") if r]
        if len(run_ids) < 2:
            raise ConfigError("compare needs at least two runs")
        labelings = {}
        for run_id in run_ids:
            run = store.get(run_id)
            if run is None:
                raise _NotFound(f"unknown run {run_id!r}")
            dimension = run["dimension"]
            if dimension is None:
                raise ConfigError(f"run {run_id} has no comparison dimension")
            if dimension in labelings:
                raise ConfigError(f"two runs share the dimension {dimension!r}")
            from .compare import IntensityLabel
            labelings[dimension] = {
                e: IntensityLabel(v["ordinal"], v["name"], v["color"])
                for e, v in run["intensity"].items()
            }
        table = rag_table(labelings)
        flagged = detect_discrepancies(table, threshold)
        demography = next(
            (b for b in workspace.bundles.values() if b.kind == "demography"), None)
        flagged_rows = []
        for area, gap in flagged:
            slope = None
            if demography is not None:
                try:
                    slope = trend_slope(net_growth_series(demography.records, area))
                except GeoClusterError:
                    slope = None
            flagged_rows.append({"area": area, "gap": gap, "trend_slope": slope})
        return {
            "threshold": threshold,
            "table": table.to_dict(),
            "flagged": flagged_rows,
        }

    @app.get("/timeseries")
    def timeseries(kind: str, area: str | None = None, sector: str | None = None):
        if kind == "net_growth":
            if not area:
                raise ConfigError("net_growth needs an area")
            demography = next(
                (b for b in workspace.bundles.values() if b.kind == "demography"),
                None)
            if demography is None:
                raise _NotFound("no demography dataset loaded")
            series = net_growth_series(demography.records, area)
            return {"kind": kind, "series": {series.key: series.points}}
        if kind == "sector":
            if not area:
                raise ConfigError("sector timeseries needs an area")
            sectors = next(
                (b for b in workspace.bundles.values() if b.kind == "sectors"), None)
            if sectors is None:
                raise _NotFound("no sectors dataset loaded")
            profiles = [p for p in sectors.records if p.area_code == area]
            if not profiles:
                raise DataError(f"no sector profiles for area {area!r}")
            by_sector: dict[str, list] = {}
            for profile in sorted(profiles, key=lambda p: p.year):
                for name, count in profile.sector_counts.items():
                    if sector is not None and name != sector:
                        continue
                    by_sector.setdefault(name, []).append([profile.year, count])
            if sector is not None and not by_sector:
                raise DataError(f"unknown sector {sector!r}")
            return {"kind": kind, "area": area, "series": by_sector}
        if kind == "sentiment":
            snaps = next(
                (b for b in workspace.bundles.values() if b.kind == "sentiment"),
                None)
            if snaps is None:
                raise _NotFound("no sentiment dataset loaded")
            by_sector = {}
            for snap in snaps.records:
                if sector is not None and snap.sector != sector:
                    continue
                by_sector.setdefault(snap.sector, []).append(
                    [snap.period_start.isoformat(), snap.pct_trading_paused])
            if sector is not None and not by_sector:
                raise DataError(f"unknown sector {sector!r}")
            return {"kind": kind, "series": by_sector}
        raise ConfigError(f"unknown timeseries kind {kind!r}")

    @app.exception_handler(_NotFound)
    async def on_not_found(request: Request, exc: _NotFound):
        return _error(404, "not_found", exc.message)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
