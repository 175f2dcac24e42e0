"""Declarative pipeline configuration: one YAML document drives a full run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

DATASET_KINDS = ("demography", "loans", "sectors", "sentiment")
DIMENSIONS = ("loans", "deaths", "sectors")


@dataclass
class ReduceSettings:
    n_components: list[int]  # grid; empty means cluster the raw frame
    standardize: bool = True


@dataclass
class ClusterSettings:
    algorithms: list[str] = field(default_factory=lambda: ["kmeans"])
    k_range: tuple[int, int] = (2, 4)
    restarts: int = 10
    max_iter: int = 300
    tol: float = 1e-6
    eps: float = 1.0
    min_samples: int = 2
    linkage: str = "ward"


@dataclass
class DatasetConfig:
    name: str
    kind: str
    files: list[Path]
    schema: dict
    dimension: str | None = None
    feature_fields: list[str] = field(default_factory=list)
    feature_years: tuple[int, int] | None = None
    year: int | None = None  # sectors: the profile year to cluster
    intensity_feature: str | None = None
    reduce: ReduceSettings | None = None
    cluster: ClusterSettings | None = None
    forced_k: int | None = None
    aggregation: Path | None = None
    aggregation_strategy: str = "sum"
    divisions: list[str] | None = None  # sectors: SIC division set override


@dataclass
class GeoConfig:
    registry: Path
    mappings: Path | None = None
    strict: bool = True
    region: str | None = None


@dataclass
class PipelineConfig:
    seed: int
    output_dir: Path
    geo: GeoConfig
    datasets: dict[str, DatasetConfig]
    threshold: int = 2
    window: tuple[int, int] = (2014, 2019)
    year_range: tuple[int, int] = (2004, 2019)
    boundaries: Path | None = None
    boundary_key: str = "code"
    config_dir: Path = Path(".")

    def dataset_by_dimension(self, dimension: str) -> DatasetConfig | None:
        for ds in self.datasets.values():
            if ds.dimension == dimension:
                return ds
        return None


def _as_pair(value, what) -> tuple[int, int]:
    if (not isinstance(value, (list, tuple))) or len(value) != 2:
        raise ConfigError(f"{what} must be a [lo, hi] pair, got {value!r}")
    return int(value[0]), int(value[1])


def _resolve_path(raw, base: Path) -> Path:
    p = Path(raw)
    return p if p.is_absolute() else (base / p)


def _parse_reduce(raw) -> ReduceSettings | None:
    if raw is None:
        return None
    comps = raw.get("n_components", [])
    if isinstance(comps, int):
        comps = [comps]
    return ReduceSettings(
        n_components=[int(c) for c in comps],
        standardize=bool(raw.get("standardize", True)),
    )


def _parse_cluster(raw) -> ClusterSettings:
    raw = raw or {}
    settings = ClusterSettings(
        algorithms=list(raw.get("algorithms", ["kmeans"])),
        k_range=_as_pair(raw.get("k_range", [2, 4]), "k_range"),
        restarts=int(raw.get("restarts", 10)),
        max_iter=int(raw.get("max_iter", 300)),
        tol=float(raw.get("tol", 1e-6)),
        eps=float(raw.get("eps", 1.0)),
        min_samples=int(raw.get("min_samples", 2)),
        linkage=str(raw.get("linkage", "ward")),
    )
    for algorithm in settings.algorithms:
        if algorithm not in ("kmeans", "dbscan", "agglomerative"):
            raise ConfigError(f"unknown clustering algorithm {algorithm!r}")
    return settings


def load_config(path) -> PipelineConfig:
    """Parse and validate the pipeline YAML; all referenced paths must exist."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    base = path.parent
    if "seed" not in raw:
        raise ConfigError("config must set an explicit seed (no wall-clock defaults)")
    geo_raw = raw.get("geo") or {}
    if "registry" not in geo_raw:
        raise ConfigError("config must set geo.registry")
    geo = GeoConfig(
        registry=_resolve_path(geo_raw["registry"], base),
        mappings=_resolve_path(geo_raw["mappings"], base) if geo_raw.get("mappings") else None,
        strict=bool(geo_raw.get("strict", True)),
        region=geo_raw.get("region"),
    )
    datasets: dict[str, DatasetConfig] = {}
    for name, ds_raw in (raw.get("datasets") or {}).items():
        kind = ds_raw.get("kind")
        if kind not in DATASET_KINDS:
            raise ConfigError(f"dataset {name!r}: unknown kind {kind!r}")
        dimension = ds_raw.get("dimension")
        if dimension is not None and dimension not in DIMENSIONS:
            raise ConfigError(
                f"dataset {name!r}: dimension must be one of {DIMENSIONS}")
        files = [_resolve_path(f, base) for f in ds_raw.get("files", [])]
        if not files:
            raise ConfigError(f"dataset {name!r}: no input files")
        ds = DatasetConfig(
            name=name,
            kind=kind,
            files=files,
            schema=dict(ds_raw.get("schema") or {}),
            dimension=dimension,
            feature_fields=list(ds_raw.get("features", {}).get("fields", [])),
            feature_years=(
                _as_pair(ds_raw["features"]["years"], f"{name}.features.years")
                if ds_raw.get("features", {}).get("years") else None),
            year=ds_raw.get("year"),
            intensity_feature=ds_raw.get("intensity_feature"),
            reduce=_parse_reduce(ds_raw.get("reduce")),
            cluster=_parse_cluster(ds_raw.get("cluster")) if kind != "sentiment" else None,
            forced_k=ds_raw.get("forced_k"),
            aggregation=(
                _resolve_path(ds_raw["aggregation"], base)
                if ds_raw.get("aggregation") else None),
            aggregation_strategy=ds_raw.get("aggregation_strategy", "sum"),
            divisions=list(ds_raw["divisions"]) if ds_raw.get("divisions") else None,
        )
        datasets[name] = ds
    if not datasets:
        raise ConfigError("config declares no datasets")
    config = PipelineConfig(
        seed=int(raw["seed"]),
        output_dir=_resolve_path(raw.get("output_dir", "out"), base),
        geo=geo,
        datasets=datasets,
        threshold=int(raw.get("threshold", 2)),
        window=_as_pair(raw.get("window", [2014, 2019]), "window"),
        year_range=_as_pair(raw.get("year_range", [2004, 2019]), "year_range"),
        boundaries=_resolve_path(raw["boundaries"], base) if raw.get("boundaries") else None,
        boundary_key=raw.get("boundary_key", "code"),
        config_dir=base,
    )
    _check_paths(config)
    return config


def _check_paths(config: PipelineConfig) -> None:
    missing = []
    paths = [config.geo.registry]
    if config.geo.mappings:
        paths.append(config.geo.mappings)
    if config.boundaries:
        paths.append(config.boundaries)
    for ds in config.datasets.values():
        paths.extend(ds.files)
        if ds.aggregation:
            paths.append(ds.aggregation)
    for p in paths:
        if not Path(p).exists():
            missing.append(str(p))
    if missing:
        raise ConfigError(f"referenced paths do not exist: {missing}")


def _digest_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_id_for(config: PipelineConfig) -> str:
    """Content hash of the config plus digests of every input file.

    The output directory is excluded so the same inputs always share a run id.
    """
    payload = {
        "seed": config.seed,
        "threshold": config.threshold,
        "window": list(config.window),
        "year_range": list(config.year_range),
        "boundary_key": config.boundary_key,
        "boundaries": _digest_file(config.boundaries) if config.boundaries else None,
        "geo": {
            "registry": _digest_file(config.geo.registry),
            "mappings": _digest_file(config.geo.mappings) if config.geo.mappings else None,
            "strict": config.geo.strict,
            "region": config.geo.region,
        },
        "datasets": {
            name: {
                "kind": ds.kind,
                "files": [_digest_file(f) for f in ds.files],
                "schema": ds.schema,
                "dimension": ds.dimension,
                "feature_fields": ds.feature_fields,
                "feature_years": list(ds.feature_years) if ds.feature_years else None,
                "year": ds.year,
                "intensity_feature": ds.intensity_feature,
                "reduce": (
                    {"n_components": ds.reduce.n_components,
                     "standardize": ds.reduce.standardize}
                    if ds.reduce else None),
                "cluster": (
                    {"algorithms": ds.cluster.algorithms,
                     "k_range": list(ds.cluster.k_range),
                     "restarts": ds.cluster.restarts,
                     "max_iter": ds.cluster.max_iter,
                     "tol": ds.cluster.tol,
                     "eps": ds.cluster.eps,
                     "min_samples": ds.cluster.min_samples,
                     "linkage": ds.cluster.linkage}
                    if ds.cluster else None),
                "forced_k": ds.forced_k,
                "aggregation": _digest_file(ds.aggregation) if ds.aggregation else None,
                "aggregation_strategy": ds.aggregation_strategy,
                "divisions": ds.divisions,
            }
            for name, ds in sorted(config.datasets.items())
        },
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
