"""Canonical geography registry, name corrections, region filter, aggregation."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, UnmappedLocation, ValidationError
from .frame import ObservationFrame

log = logging.getLogger("geocluster.geo")

KINDS = {"district", "county", "unitary", "borough", "constituency", "region"}


@dataclass(frozen=True)
class GeoEntity:
    code: str
    canonical_name: str
    kind: str
    centroid: tuple[float, float]  # (lat, lon)
    parent_region: str


@dataclass(frozen=True)
class NameMapping:
    original: str
    mapped_name: str | None = None
    coords: tuple[float, float] | None = None


@dataclass
class AggregationMap:
    source_kind: str
    target_kind: str
    assignments: dict[str, str]  # source code -> target code


def normalize_name(name: str) -> str:
    """Lookup key: casefolded, '&' -> 'and', whitespace collapsed."""
    s = name.replace("&", " and ")
    s = re.sub(r"\s+", " ", s).strip()
    return s.casefold()


class GeoRegistry:
    """Immutable-after-load lookup of geographic entities by code and name."""

    def __init__(self, entities: list[GeoEntity]):
        self.by_code: dict[str, GeoEntity] = {}
        self.by_name: dict[str, GeoEntity] = {}
        for entity in entities:
            self.add(entity)

    def add(self, entity: GeoEntity) -> None:
        if entity.kind not in KINDS:
            raise ValidationError(f"unknown geography kind {entity.kind!r}")
        lat, lon = entity.centroid
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ValidationError(
                f"{entity.code}: centroid ({lat}, {lon}) out of range"
            )
        if entity.code in self.by_code:
            raise ValidationError(f"duplicate registry code {entity.code!r}")
        self.by_code[entity.code] = entity
        self.by_name.setdefault(normalize_name(entity.canonical_name), entity)

    def entity(self, code: str) -> GeoEntity:
        try:
            return self.by_code[code]
        except KeyError:
            raise UnmappedLocation(code, f"code {code!r} not in registry") from None

    def regions(self) -> list[str]:
        return sorted({e.parent_region for e in self.by_code.values() if e.parent_region})

    def __len__(self) -> int:
        return len(self.by_code)


def load_registry(path) -> GeoRegistry:
    """Registry file: code, canonical_name, kind, lat, lon, parent_region."""
    entities = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        needed = {"code", "canonical_name", "kind", "lat", "lon", "parent_region"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise ConfigError(f"{path}: registry header must carry {sorted(needed)}")
        for row in reader:
            entities.append(GeoEntity(
                code=row["code"].strip(),
                canonical_name=row["canonical_name"].strip(),
                kind=row["kind"].strip(),
                centroid=(float(row["lat"]), float(row["lon"])),
                parent_region=row["parent_region"].strip(),
            ))
    return GeoRegistry(entities)


def load_mappings(path) -> list[NameMapping]:
    """Mapping file rows: (original, mapped_name) or (original, lat, lon).

    The two forms are distinguished by column count; '#' lines are comments.
    """
    mappings = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells or cells[0].startswith("#"):
                continue
            if len(cells) == 2:
                mappings.append(NameMapping(original=cells[0], mapped_name=cells[1]))
            elif len(cells) == 3:
                try:
                    lat, lon = float(cells[1]), float(cells[2])
                except ValueError:
                    raise ConfigError(
                        f"{path}:{lineno}: coordinate mapping needs numeric lat/lon"
                    ) from None
                mappings.append(NameMapping(original=cells[0], coords=(lat, lon)))
            else:
                raise ConfigError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(cells)}")
    originals = {normalize_name(m.original) for m in mappings}
    for m in mappings:
        if m.mapped_name is None:
            continue
        key = normalize_name(m.mapped_name)
        # self-maps ('X & Y' -> 'X and Y') are no-ops, not chains
        if key in originals and key != normalize_name(m.original):
            raise ValidationError(
                f"mapping chain: {m.original!r} -> {m.mapped_name!r} which is itself remapped"
            )
    return mappings


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.casefold()).strip("-")


def resolve(name: str, registry: GeoRegistry, mappings=()) -> GeoEntity:
    """Exact match wins; otherwise the mapping table is applied once.

    Coordinate-valued mappings yield a synthetic entity at those coordinates.
    """
    key = normalize_name(name)
    entity = registry.by_name.get(key)
    if entity is not None:
        return entity
    for mapping in mappings:
        if normalize_name(mapping.original) != key:
            continue
        if mapping.coords is not None:
            return GeoEntity(
                code=f"synthetic:{_slug(mapping.original)}",
                canonical_name=mapping.original,
                kind="constituency",
                centroid=mapping.coords,
                parent_region="",
            )
        target = registry.by_name.get(normalize_name(mapping.mapped_name))
        if target is None:
            raise UnmappedLocation(
                name, f"{name!r} maps to {mapping.mapped_name!r}, which is not in the registry"
            )
        return target
    raise UnmappedLocation(name)


def resolve_all(
    names, registry: GeoRegistry, mappings=(), *, strict: bool = True
) -> tuple[dict[str, GeoEntity], list[str]]:
    """Resolve many names; permissive mode excludes failures with a warning."""
    resolved: dict[str, GeoEntity] = {}
    excluded: list[str] = []
    for name in names:
        try:
            resolved[name] = resolve(name, registry, mappings)
        except UnmappedLocation:
            if strict:
                raise
            excluded.append(name)
            log.warning("excluding unmapped location %r", name)
    return resolved, excluded


def filter_region(frame: ObservationFrame, registry: GeoRegistry, region: str) -> ObservationFrame:
    """Rows whose entity's parent region equals ``region``, order preserved."""
    valid = registry.regions()
    if normalize_name(region) not in {normalize_name(r) for r in valid}:
        raise ConfigError(f"unknown region {region!r}; valid regions: {valid}")
    want = normalize_name(region)
    keep = []
    for eid in frame.entity_ids:
        entity = registry.entity(eid)
        if normalize_name(entity.parent_region) == want:
            keep.append(eid)
    if not keep:
        return ObservationFrame([], list(frame.feature_names),
                                np.empty((0, frame.n_features)),
                                np.empty((0, frame.n_features), dtype=bool))
    return frame.select_entities(keep)


def load_aggregation(path) -> AggregationMap:
    """Two-column delimited map whose header names declare the two kinds."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"{path}: empty aggregation map")
    header = [h.strip() for h in rows[0]]
    if len(header) != 2:
        raise ConfigError(f"{path}: aggregation map needs exactly two columns")
    source_kind, target_kind = header[0].lower(), header[1].lower()
    assignments: dict[str, str] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        src, dst = row[0].strip(), row[1].strip()
        if src in assignments:
            raise ValidationError(f"{path}:{lineno}: source {src!r} assigned twice")
        assignments[src] = dst
    return AggregationMap(source_kind, target_kind, assignments)


def aggregate(
    frame: ObservationFrame, agg: AggregationMap, strategy: str = "sum"
) -> ObservationFrame:
    """Consolidate rows onto their assigned targets by sum or unweighted mean."""
    if strategy not in ("sum", "mean"):
        raise ConfigError(f"unknown aggregation strategy {strategy!r}")
    members: dict[str, list[int]] = {}
    order: list[str] = []
    for i, eid in enumerate(frame.entity_ids):
        target = agg.assignments.get(eid)
        if target is None:
            raise DataError(f"entity {eid!r} absent from the aggregation map")
        if target not in members:
            members[target] = []
            order.append(target)
        members[target].append(i)
    values = np.full((len(order), frame.n_features), np.nan)
    for row, target in enumerate(order):
        block = frame.values[members[target], :]
        present = ~np.isnan(block)
        counts = present.sum(axis=0)
        sums = np.where(present, block, 0.0).sum(axis=0)
        if strategy == "mean":
            agg_vals = np.divide(sums, counts, out=np.full_like(sums, np.nan),
                                 where=counts > 0)
        else:
            agg_vals = sums
        values[row, :] = np.where(counts > 0, agg_vals, np.nan)
    return ObservationFrame(order, list(frame.feature_names), values)
