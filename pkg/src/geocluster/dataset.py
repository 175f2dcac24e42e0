"""Ingest, merge, clean and derive indices for the four source table families."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .errors import IngestError, SchemaError, ValidationError, ConfigError
from .frame import ObservationFrame

log = logging.getLogger("geocluster.dataset")

# Region/country aggregate rows dropped on ingest: the nine English regions,
# Scotland, Wales and Northern Ireland (the twelve UK regions) plus the
# country-level aggregates. Configurable per call.
DEFAULT_AGGREGATE_AREAS = (
    "North East",
    "North West",
    "Yorkshire and The Humber",
    "East Midlands",
    "West Midlands",
    "East of England",
    "London",
    "South East",
    "South West",
    "Wales",
    "Scotland",
    "Northern Ireland",
    "England",
    "Great Britain",
    "United Kingdom",
)

DEFAULT_YEAR_RANGE = (2004, 2019)

# Top-level SIC divisions used for sector profiles.
DEFAULT_SIC_DIVISIONS = (
    "Agriculture, Forestry and Fishing",
    "Production",
    "Construction",
    "Motor Trades",
    "Wholesale",
    "Retail",
    "Transport and Storage",
    "Accommodation and Food Services",
    "Information and Communication",
    "Financial and Insurance",
    "Property",
    "Professional, Scientific and Technical",
    "Business Administration and Support Services",
    "Public Administration and Defence",
    "Education",
    "Health",
    "Arts, Entertainment, Recreation and Other Services",
)

LOAN_UNSPECIFIED = "Constituency unspecified"


@dataclass(frozen=True)
class DemographyRecord:
    area_name: str
    area_code: str
    year: int
    births: int
    deaths: int
    active: int


@dataclass(frozen=True)
class LoanRecord:
    constituency_name: str
    constituency_code: str
    as_of_date: date
    application_count: int
    total_value: float


@dataclass(frozen=True)
class SectorProfile:
    area_code: str
    year: int
    sector_counts: dict  # division name -> count


@dataclass(frozen=True)
class SentimentSnapshot:
    sector: str
    period_start: date
    period_end: date
    pct_trading_paused: float


@dataclass(frozen=True)
class DerivedIndices:
    area_code: str
    survival_index: float | None
    death_ratio: float | None
    avg_births: float
    avg_deaths: float
    avg_active: float
    avg_loan: float | None


# ---------------------------------------------------------------------------
# low-level parsing

def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def _open_rows(path) -> tuple[list[str], list[list[str]]]:
    """Header + data rows of a delimited text file (comma or tab)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise IngestError(f"{path}: cannot read file ({exc})") from exc
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path}: not UTF-8 text ({exc})") from exc
    lines = text.splitlines()
    if not lines:
        return [], []
    delim = _sniff_delimiter(lines[0])
    reader = csv.reader(io.StringIO(text), delimiter=delim)
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        return [], []
    header = [h.strip() for h in rows[0]]
    return header, rows[1:]


def parse_count(raw: str, where: str) -> int:
    """Non-negative integer count, tolerating thousands separators."""
    cleaned = raw.strip().replace(",", "").replace(" ", "")
    if cleaned == "":
        raise IngestError(f"{where}: empty count")
    try:
        value = int(cleaned)
    except ValueError:
        raise IngestError(f"{where}: not an integer count: {raw!r}") from None
    if value < 0:
        raise ValidationError(f"{where}: negative count {raw!r}")
    return value


def parse_money(raw: str, where: str) -> float:
    """GBP amount, accepting forms like '£70,149,000', '4.1m', '1.2bn'."""
    cleaned = raw.strip().replace("£", "").replace(",", "").replace(" ", "")
    multiplier = 1.0
    low = cleaned.lower()
    if low.endswith("bn"):
        multiplier, cleaned = 1e9, cleaned[:-2]
    elif low.endswith("m"):
        multiplier, cleaned = 1e6, cleaned[:-1]
    elif low.endswith("k"):
        multiplier, cleaned = 1e3, cleaned[:-1]
    if cleaned == "":
        raise IngestError(f"{where}: empty amount")
    try:
        value = round(float(cleaned) * multiplier, 2)
    except ValueError:
        raise IngestError(f"{where}: not an amount: {raw!r}") from None
    if value < 0:
        raise ValidationError(f"{where}: negative amount {raw!r}")
    return value


def parse_fraction(raw: str, where: str) -> float:
    """Fraction in [0, 1], accepting '38%', '38' and '0.38'."""
    cleaned = raw.strip()
    pct = cleaned.endswith("%")
    if pct:
        cleaned = cleaned[:-1].strip()
    try:
        value = float(cleaned)
    except ValueError:
        raise IngestError(f"{where}: not a percentage: {raw!r}") from None
    if pct or value > 1.0:
        value /= 100.0
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{where}: percentage out of range: {raw!r}")
    return value


def _parse_date(raw: str, where: str) -> date:
    try:
        return date.fromisoformat(raw.strip())
    except ValueError:
        raise IngestError(f"{where}: not an ISO date: {raw!r}") from None


def _column_picker(header: list[str], schema: dict, path, required: list[str]):
    """Map canonical field -> column index, given a header->field schema."""
    field_to_col = {}
    lowered = [h.lower() for h in header]
    for header_name, field_name in schema.items():
        try:
            field_to_col[field_name] = lowered.index(header_name.strip().lower())
        except ValueError:
            raise SchemaError(
                f"{path}: mapped column {header_name!r} not in header {header}"
            ) from None
    missing = [f for f in required if f not in field_to_col]
    if missing:
        raise SchemaError(f"{path}: schema does not map required fields {missing}")
    return field_to_col


# ---------------------------------------------------------------------------
# ingest operations

def ingest_demography(
    files,
    schema: dict,
    *,
    year_range: tuple[int, int] = DEFAULT_YEAR_RANGE,
    aggregate_names=DEFAULT_AGGREGATE_AREAS,
) -> list[DemographyRecord]:
    """Merge demography vintages into one record set.

    Region/country aggregate rows (per ``aggregate_names``) are dropped.
    Duplicate (area_code, year) keys resolve last-file-wins with a warning.
    """
    aggregates = {n.strip().lower() for n in aggregate_names}
    required = ["area_name", "area_code", "year", "births", "deaths", "active"]
    merged: dict[tuple[str, int], DemographyRecord] = {}
    for path in files:
        header, rows = _open_rows(path)
        if not header:
            continue
        cols = _column_picker(header, schema, path, required)
        for lineno, row in enumerate(rows, start=2):
            where = f"{path}:{lineno}"
            if len(row) < len(header):
                raise IngestError(f"{where}: expected {len(header)} fields, got {len(row)}")
            name = row[cols["area_name"]].strip()
            if name.lower() in aggregates:
                continue
            code = row[cols["area_code"]].strip()
            year = parse_count(row[cols["year"]], where)
            if not year_range[0] <= year <= year_range[1]:
                raise ValidationError(
                    f"{where}: year {year} outside configured range {year_range}"
                )
            record = DemographyRecord(
                area_name=name,
                area_code=code,
                year=year,
                births=parse_count(row[cols["births"]], where),
                deaths=parse_count(row[cols["deaths"]], where),
                active=parse_count(row[cols["active"]], where),
            )
            key = (code, year)
            if key in merged and merged[key] != record:
                log.warning("duplicate key %s replaced by %s", key, where)
            merged[key] = record
    return list(merged.values())


DEFAULT_LOAN_SCHEMA = {
    "constituency_name": "constituency_name",
    "constituency_code": "constituency_code",
    "as_of_date": "as_of_date",
    "application_count": "application_count",
    "total_value": "total_value",
}


def ingest_loans(file, schema: dict | None = None) -> list[LoanRecord]:
    """Loan applications by constituency; 'Constituency unspecified' dropped."""
    schema = schema or DEFAULT_LOAN_SCHEMA
    required = ["constituency_name", "application_count", "total_value"]
    header, rows = _open_rows(file)
    if not header:
        return []
    cols = _column_picker(header, schema, file, required)
    records = []
    for lineno, row in enumerate(rows, start=2):
        where = f"{file}:{lineno}"
        name = row[cols["constituency_name"]].strip()
        if name == LOAN_UNSPECIFIED:
            continue
        count = parse_count(row[cols["application_count"]], where)
        value = parse_money(row[cols["total_value"]], where)
        if count == 0 and value != 0:
            raise ValidationError(f"{where}: zero applications with nonzero value")
        code = row[cols["constituency_code"]].strip() if "constituency_code" in cols else ""
        as_of = (
            _parse_date(row[cols["as_of_date"]], where)
            if "as_of_date" in cols and row[cols["as_of_date"]].strip()
            else date(2020, 12, 17)
        )
        records.append(LoanRecord(name, code, as_of, count, value))
    return records


DEFAULT_SENTIMENT_SCHEMA = {
    "sector": "sector",
    "period_start": "period_start",
    "period_end": "period_end",
    "pct_trading_paused": "pct_trading_paused",
}


def ingest_sentiment(files, schema: dict | None = None) -> list[SentimentSnapshot]:
    """Consolidate fortnightly sentiment reports into one chronological set."""
    schema = schema or DEFAULT_SENTIMENT_SCHEMA
    required = ["sector", "period_start", "period_end", "pct_trading_paused"]
    snapshots: list[SentimentSnapshot] = []
    for path in files:
        header, rows = _open_rows(path)
        if not header:
            continue
        cols = _column_picker(header, schema, path, required)
        for lineno, row in enumerate(rows, start=2):
            where = f"{path}:{lineno}"
            start = _parse_date(row[cols["period_start"]], where)
            end = _parse_date(row[cols["period_end"]], where)
            if start >= end:
                raise ValidationError(f"{where}: period start {start} not before end {end}")
            snapshots.append(SentimentSnapshot(
                sector=row[cols["sector"]].strip(),
                period_start=start,
                period_end=end,
                pct_trading_paused=parse_fraction(row[cols["pct_trading_paused"]], where),
            ))
    by_sector: dict[str, list[SentimentSnapshot]] = {}
    for snap in snapshots:
        by_sector.setdefault(snap.sector, []).append(snap)
    for sector, snaps in by_sector.items():
        snaps.sort(key=lambda s: (s.period_start, s.period_end))
        for a, b in zip(snaps, snaps[1:]):
            if b.period_start < a.period_end:
                raise ValidationError(
                    f"overlapping periods for sector {sector!r}: "
                    f"{a.period_start}..{a.period_end} and {b.period_start}..{b.period_end}"
                )
    snapshots.sort(key=lambda s: (s.period_start, s.period_end, s.sector))
    return snapshots


def ingest_sectors(
    file,
    schema: dict | None = None,
    *,
    divisions=DEFAULT_SIC_DIVISIONS,
) -> list[SectorProfile]:
    """Sector profiles: one row per (area, year), one column per SIC division."""
    header, rows = _open_rows(file)
    if not header:
        return []
    schema = schema or {"area_code": "area_code", "year": "year"}
    cols = _column_picker(header, schema, file, ["area_code", "year"])
    lowered = [h.lower() for h in header]
    div_cols = {}
    for division in divisions:
        try:
            div_cols[division] = lowered.index(division.lower())
        except ValueError:
            raise SchemaError(f"{file}: missing SIC division column {division!r}") from None
    profiles = []
    for lineno, row in enumerate(rows, start=2):
        where = f"{file}:{lineno}"
        counts = {d: parse_count(row[i], where) for d, i in div_cols.items()}
        profiles.append(SectorProfile(
            area_code=row[cols["area_code"]].strip(),
            year=parse_count(row[cols["year"]], where),
            sector_counts=counts,
        ))
    return profiles


# ---------------------------------------------------------------------------
# derived indices

def derive_indices(
    demography: list[DemographyRecord],
    loans: LoanRecord | None = None,
    *,
    window: tuple[int, int] | None = None,
) -> DerivedIndices:
    """Failure/survival ratios on summed counts plus per-year averages.

    Undefined ratios (zero denominator) are carried as None, never as
    infinities; avg_loan requires a loan record with applications > 0.
    """
    records = demography
    if window is not None:
        records = [r for r in records if window[0] <= r.year <= window[1]]
    if not records:
        raise ValidationError("no demography records in window")
    codes = {r.area_code for r in records}
    if len(codes) != 1:
        raise ValidationError(f"records span multiple areas: {sorted(codes)}")
    births = sum(r.births for r in records)
    deaths = sum(r.deaths for r in records)
    active = sum(r.active for r in records)
    n = len(records)
    survival = deaths / births if births > 0 else None
    death_ratio = deaths / active if active > 0 else None
    avg_loan = None
    if loans is not None and loans.application_count > 0:
        avg_loan = loans.total_value / loans.application_count
    return DerivedIndices(
        area_code=records[0].area_code,
        survival_index=survival,
        death_ratio=death_ratio,
        avg_births=births / n,
        avg_deaths=deaths / n,
        avg_active=active / n,
        avg_loan=avg_loan,
    )


# ---------------------------------------------------------------------------
# frame construction

def _entity_id(record) -> str:
    if isinstance(record, LoanRecord):
        return record.constituency_code or record.constituency_name
    return record.area_code


def _cell_value(record, field: str, year: int | None):
    if isinstance(record, DemographyRecord):
        if year is not None and record.year != year:
            return None
        if field not in ("births", "deaths", "active"):
            raise SchemaError(f"no numeric field {field!r} on demography records")
        return float(getattr(record, field))
    if isinstance(record, DerivedIndices):
        if field not in (
            "survival_index", "death_ratio", "avg_births", "avg_deaths",
            "avg_active", "avg_loan",
        ):
            raise SchemaError(f"no numeric field {field!r} on derived indices")
        value = getattr(record, field)
        return None if value is None else float(value)
    if isinstance(record, LoanRecord):
        if field not in ("application_count", "total_value"):
            raise SchemaError(f"no numeric field {field!r} on loan records")
        return float(getattr(record, field))
    if isinstance(record, SectorProfile):
        if year is not None and record.year != year:
            return None
        if field not in record.sector_counts:
            raise SchemaError(f"no SIC division {field!r} on sector profiles")
        return float(record.sector_counts[field])
    raise SchemaError(f"unsupported record type {type(record).__name__}")


def feature_name(field: str, year: int | None) -> str:
    return field if year is None else f"{field}_{year}"


def build_frame(records, feature_spec: list[tuple[str, int | None]]) -> ObservationFrame:
    """One row per entity, one column per (field, year) selector.

    Absent (entity, selector) combinations are flagged in the missing mask.
    """
    if not feature_spec:
        raise ConfigError("feature_spec must name at least one selector")
    entity_order: list[str] = []
    seen = set()
    for record in records:
        eid = _entity_id(record)
        if eid not in seen:
            seen.add(eid)
            entity_order.append(eid)
    names = [feature_name(f, y) for f, y in feature_spec]
    values = np.full((len(entity_order), len(feature_spec)), np.nan)
    index = {eid: i for i, eid in enumerate(entity_order)}
    for record in records:
        row = index[_entity_id(record)]
        for col, (field, year) in enumerate(feature_spec):
            cell = _cell_value(record, field, year)
            if cell is not None:
                values[row, col] = cell
    return ObservationFrame(entity_order, names, values)


# ---------------------------------------------------------------------------
# canonical re-emission

DEMOGRAPHY_COLUMNS = ("area_code", "area_name", "year", "births", "deaths", "active")


def write_demography_csv(records: list[DemographyRecord], path) -> None:
    """Re-emit records as delimited text in the fixed canonical column order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DEMOGRAPHY_COLUMNS)
        for r in sorted(records, key=lambda r: (r.area_code, r.year)):
            writer.writerow([r.area_code, r.area_name, r.year, r.births, r.deaths, r.active])
