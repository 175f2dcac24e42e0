"""Analyst-steerable geospatial clustering engine for regional business statistics."""

from .frame import ObservationFrame, DistributionSummary, summarize_distribution
from .dataset import (
    DemographyRecord, LoanRecord, SectorProfile, SentimentSnapshot, DerivedIndices,
    ingest_demography, ingest_loans, ingest_sentiment, ingest_sectors,
    derive_indices, build_frame,
)
from .geo import (
    GeoEntity, NameMapping, AggregationMap, GeoRegistry,
    load_registry, load_mappings, load_aggregation,
    resolve, resolve_all, filter_region, aggregate,
)
from .pca import Projection, fit_pca, transform, inverse_transform
from .clustering import (
    ClusterParams, ClusterModel, ElbowResult,
    kmeans, dbscan, agglomerative, elbow,
)
from .quality import QualityReport, CandidateRun, silhouette, davies_bouldin, score_report, select_model
from .compare import (
    IntensityLabel, ComparisonTable, TimeSeries, Extrapolation,
    label_intensity, rag_table, detect_discrepancies,
    net_growth_series, trough_years, extrapolate_counterfactual, trend_slope,
    sector_concentration, sentiment_exposure,
)
from .errors import (
    GeoClusterError, ConfigError, SchemaError, DataError,
    IngestError, ValidationError, UnmappedLocation,
)

__version__ = "0.1.0"
