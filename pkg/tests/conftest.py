import csv
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "geocluster" / "data"


@pytest.fixture(scope="session")
def geo_data_dir() -> Path:
    return DATA_DIR


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


DEMOGRAPHY_SCHEMA = {
    "name": "area_name",
    "code": "area_code",
    "year": "year",
    "births": "births",
    "deaths": "deaths",
    "active": "active",
}


def write_demography(path: Path, rows) -> Path:
    """rows: (name, code, year, births, deaths, active)"""
    return write_csv(path, ["name", "code", "year", "births", "deaths", "active"], rows)
