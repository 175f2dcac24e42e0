"""Deterministic synthetic London fixture: inputs + config for a full run.

The fixture carries 33 borough-level areas and 73 constituencies; the engine
never forces an area count anywhere, it accepts whatever the inputs carry
(real source snapshots disagree about such totals between releases).
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

# borough-level planted structure
HIGH_DEATHS = ("E09000033",)                            # Westminster
MEDIUM_DEATHS = ("E09000007", "E09000001", "E09000012")  # Camden, City, Hackney
HIGH_LOANS = ("E09000015", "E09000026", "E09000007", "E09000001", "E09000012")
LOW_LOANS = ("E09000033", "E09000021", "E09000027", "E09000029", "E09000024",
             "E09000006")
HIGH_SECTORS = ("E09000033",)
MEDIUM_SECTORS = ("E09000007", "E09000001", "E09000012", "E09000028",
                  "E09000030", "E09000009", "E09000003")

# net growth profile planted with troughs at 2009 (deepest) and 2017
NET_GROWTH = {
    2004: 120, 2005: 130, 2006: 140, 2007: 150, 2008: 60, 2009: -200,
    2010: 90, 2011: 110, 2012: 125, 2013: 140, 2014: 155, 2015: 165,
    2016: 120, 2017: -80, 2018: 100, 2019: 135,
}

SENTIMENT_SECTORS = {
    "Accommodation and Food Services": 0.80,
    "Arts, Entertainment, Recreation and Other Services": 0.75,
    "Construction": 0.70,
    "Production": 0.65,
    "Retail": 0.60,
    "Wholesale": 0.50,
    "Transport and Storage": 0.45,
    "Property": 0.40,
    "Education": 0.35,
    "Information and Communication": 0.30,
    "Health": 0.30,
    "Professional, Scientific and Technical": 0.25,
}

SECTOR_WEIGHTS = {
    "Professional, Scientific and Technical": 0.18,
    "Business Administration and Support Services": 0.12,
    "Construction": 0.11,
    "Information and Communication": 0.10,
    "Retail": 0.08,
    "Wholesale": 0.06,
    "Health": 0.06,
    "Accommodation and Food Services": 0.05,
    "Transport and Storage": 0.05,
    "Education": 0.04,
    "Property": 0.04,
    "Arts, Entertainment, Recreation and Other Services": 0.04,
    "Financial and Insurance": 0.03,
    "Motor Trades": 0.02,
    "Production": 0.01,
    "Public Administration and Defence": 0.005,
    "Agriculture, Forestry and Fishing": 0.005,
}


def geo_data_dir() -> Path:
    return Path(resources.files("geocluster") / "data")


def _boroughs() -> list[tuple[str, str]]:
    rows = []
    with open(geo_data_dir() / "registry.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["kind"] == "borough":
                rows.append((row["code"], row["canonical_name"]))
    return sorted(rows)


def _constituencies() -> list[tuple[str, str, str]]:
    """(code, name, borough_code) from registry + aggregation map."""
    assign = {}
    with open(geo_data_dir() / "constituency_boroughs.csv", newline="",
              encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for src, dst in reader:
            assign[src] = dst
    rows = []
    with open(geo_data_dir() / "registry.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["kind"] == "constituency":
                rows.append((row["code"], row["canonical_name"], assign[row["code"]]))
    return sorted(rows)


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _deaths_level(code: str) -> int:
    if code in HIGH_DEATHS:
        return 6400
    if code in MEDIUM_DEATHS:
        return 2900
    return 1500


def _loan_target(code: str) -> int:
    if code in HIGH_LOANS:
        return 13_000
    if code in LOW_LOANS:
        return 5_000
    return 8_500


def _sector_total(code: str) -> int:
    if code in HIGH_SECTORS:
        return 60_000
    if code in MEDIUM_SECTORS:
        return 25_000
    return 9_000


def write_demo_inputs(target: Path, seed: int = 7) -> Path:
    """Write the synthetic input files plus a ready-to-run config.yaml."""
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    boroughs = _boroughs()
    years = sorted(NET_GROWTH)

    # demography in three vintages, with aggregate rows and one duplicate key
    scale = {code: 1.0 + 0.06 * rng.standard_normal() for code, _ in boroughs}
    demo_rows = {}
    for code, name in boroughs:
        level = _deaths_level(code)
        size_factor = level / 1500
        for year in years:
            wiggle = 1.0 + 0.03 * rng.standard_normal()
            deaths = max(1, int(round(level * scale[code] * wiggle)))
            births = max(0, deaths + int(round(NET_GROWTH[year] * size_factor)))
            active = int(round(deaths * 11 * (1.0 + 0.02 * rng.standard_normal())))
            demo_rows[(code, year)] = [name, code, year, births, deaths, active]

    def vintage(path, year_lo, year_hi, with_aggregates=False, extra=()):
        rows = []
        for (code, year), row in sorted(demo_rows.items()):
            if year_lo <= year <= year_hi:
                rows.append(row)
        if with_aggregates:
            for year in range(year_lo, year_hi + 1):
                member = [demo_rows[(c, year)] for c, _ in boroughs]
                rows.append([
                    "London", "E12000007", year,
                    sum(r[3] for r in member), sum(r[4] for r in member),
                    sum(r[5] for r in member),
                ])
        rows.extend(extra)
        _write(path, ["name", "code", "year", "births", "deaths", "active"], rows)

    vintage(target / "demography_2004_2014.csv", 2004, 2014, with_aggregates=True)
    vintage(target / "demography_2015_2018.csv", 2015, 2018)
    dup = list(demo_rows[("E09000003", 2018)])
    dup[4] += 5  # conflicting re-statement of one year, resolved last-file-wins
    vintage(target / "demography_2019.csv", 2019, 2019, extra=[dup])

    # loans by constituency, one dirty "&" name and one unspecified row
    constituencies = _constituencies()
    loan_rows = [["Constituency unspecified", "", "2020-12-17", "1,024", "£33.1m"]]
    members: dict[str, int] = {}
    for _, _, borough in constituencies:
        members[borough] = members.get(borough, 0) + 1
    for code, name, borough in constituencies:
        apps = int(round(_loan_target(borough) / members[borough]
                         * (1.0 + 0.05 * rng.standard_normal())))
        value = int(round(apps * (32_400 + 600 * rng.standard_normal())))
        out_name = name
        if name == "Cities of London and Westminster":
            out_name = "Cities of London & Westminster"
        loan_rows.append([out_name, code, "2020-12-17", f"{apps:,}", f"£{value:,}"])
    _write(target / "loans.csv",
           ["constituency", "code", "as_of", "applications", "value"], loan_rows)

    # sector profiles per borough-year
    divisions = list(SECTOR_WEIGHTS)
    sector_rows = []
    for code, name in boroughs:
        total = _sector_total(code) * (1.0 + 0.05 * rng.standard_normal())
        for year in range(2014, 2020):
            drift = 1.0 + 0.02 * (year - 2016)
            row = [code, year]
            for division in divisions:
                weight = SECTOR_WEIGHTS[division]
                dip = 0.85 if (year == 2015 and division in (
                    "Accommodation and Food Services", "Retail")) else 1.0
                row.append(max(0, int(round(
                    total * weight * drift * dip
                    * (1.0 + 0.03 * rng.standard_normal())))))
            sector_rows.append(row)
    _write(target / "sectors.csv", ["area_code", "year"] + divisions, sector_rows)

    # sentiment: 17 fortnightly reports, April to November 2020
    sentiment_dir = target / "sentiment"
    sentiment_dir.mkdir(exist_ok=True)
    from datetime import date, timedelta
    start = date(2020, 4, 6)
    sentiment_files = []
    for i in range(17):
        period_start = start + timedelta(days=14 * i)
        period_end = period_start + timedelta(days=13)
        rows = []
        for sector, peak in SENTIMENT_SECTORS.items():
            # decays from an early lockdown peak
            level = peak * max(0.15, 1.0 - 0.06 * abs(i - 2))
            pct = f"{level * 100:.0f}%" if i % 2 == 0 else f"{level:.3f}"
            rows.append([sector, period_start.isoformat(),
                         period_end.isoformat(), pct])
        path = sentiment_dir / f"bics_{i + 1:02d}.csv"
        _write(path, ["sector", "period_start", "period_end",
                      "pct_trading_paused"], rows)
        sentiment_files.append(f"sentiment/{path.name}")

    data_dir = geo_data_dir()
    config = {
        "seed": seed,
        "output_dir": "out",
        "threshold": 2,
        "window": [2014, 2019],
        "year_range": [2004, 2019],
        "geo": {
            "registry": str(data_dir / "registry.csv"),
            "mappings": str(data_dir / "name_mappings.csv"),
            "strict": True,
            "region": "London",
        },
        "datasets": {
            "demography": {
                "kind": "demography",
                "dimension": "deaths",
                "files": ["demography_2004_2014.csv", "demography_2015_2018.csv",
                          "demography_2019.csv"],
                "schema": {"name": "area_name", "code": "area_code",
                           "year": "year", "births": "births",
                           "deaths": "deaths", "active": "active"},
                "features": {"fields": ["births", "deaths", "active"],
                             "years": [2014, 2019]},
                "intensity_feature": "avg_deaths",
                "reduce": {"n_components": [2, 3], "standardize": True},
                "cluster": {"algorithms": ["kmeans", "agglomerative", "dbscan"],
                            "k_range": [2, 4], "restarts": 10,
                            "eps": 1.0, "min_samples": 2},
                "forced_k": 3,
            },
            "loans": {
                "kind": "loans",
                "dimension": "loans",
                "files": ["loans.csv"],
                "schema": {"constituency": "constituency_name",
                           "code": "constituency_code",
                           "as_of": "as_of_date",
                           "applications": "application_count",
                           "value": "total_value"},
                "aggregation": str(data_dir / "constituency_boroughs.csv"),
                "intensity_feature": "application_count",
                "cluster": {"algorithms": ["kmeans"], "k_range": [2, 5],
                            "restarts": 10},
                "forced_k": 3,
            },
            "sectors": {
                "kind": "sectors",
                "dimension": "sectors",
                "files": ["sectors.csv"],
                "schema": {"area_code": "area_code", "year": "year"},
                "year": 2019,
                "divisions": divisions,
                "intensity_feature": "total_businesses",
                "reduce": {"n_components": [1, 2], "standardize": True},
                "cluster": {"algorithms": ["kmeans"], "k_range": [2, 4],
                            "restarts": 10},
                "forced_k": 3,
            },
            "sentiment": {
                "kind": "sentiment",
                "files": sentiment_files,
            },
        },
    }
    config_path = target / "config.yaml"
    config_path.write_text(yaml.safe_dump(config, sort_keys=True),
                           encoding="utf-8")
    return config_path
