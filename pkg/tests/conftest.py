import json
from pathlib import Path

import pytest

from app.data.models import LabelTable, ParcelFootprint, SourceRecord
from app.generators.labels_gen import Tables, load_tables
from app.services.geometry import make_point, square
from app.services.spatial_index import build


@pytest.fixture(scope="session")
def tables() -> Tables:
    return load_tables()


@pytest.fixture(scope="session")
def taxonomy(tables):
    return tables.taxonomy


@pytest.fixture(scope="session")
def crosswalk(tables):
    return tables.crosswalk


@pytest.fixture(scope="session")
def authoritative(tables):
    return tables.authoritative


def parcel(parcel_id: str, min_x: float, min_y: float, max_x: float, max_y: float, cls=None) -> ParcelFootprint:
    return ParcelFootprint(parcel_id=parcel_id, geometry=square(min_x, min_y, max_x, max_y), authoritative_class=cls)


def poi(record_id: str, x: float, y: float, category: str, source: str = "google") -> SourceRecord:
    return SourceRecord(
        source=source, record_id=record_id, geometry=make_point(x, y), geometry_kind="point", tags=(("type", category),)
    )


def osm_area(record_id: str, min_x: float, min_y: float, max_x: float, max_y: float, *tags) -> SourceRecord:
    return SourceRecord(
        source="osm", record_id=record_id, geometry=square(min_x, min_y, max_x, max_y),
        geometry_kind="polygon", tags=tuple(tags) or (("amenity", "restaurant"),),
    )


def osm_node(record_id: str, x: float, y: float, *tags) -> SourceRecord:
    return SourceRecord(source="osm", record_id=record_id, geometry=make_point(x, y), geometry_kind="point", tags=tuple(tags))


def footprint_map(*footprints: ParcelFootprint) -> tuple[dict[str, ParcelFootprint], object]:
    by_id = {f.parcel_id: f for f in footprints}
    return by_id, build(footprints)


def label_table(source: str, labels: dict[str, set[int]]) -> LabelTable:
    table = LabelTable(source=source)
    for parcel_id, codes in labels.items():
        for code in codes:
            table.add(parcel_id, code, f"{source}:{parcel_id}:{code}")
    return table


def footprints_geojson(features: list[tuple[str, list[list[float]], str | None]]) -> str:
    """FeatureCollection of single-ring parcels: (id, ring, landuse)."""
    collection = {"type": "FeatureCollection", "features": []}
    for parcel_id, ring, landuse in features:
        properties = {"mapblklot": parcel_id}
        if landuse is not None:
            properties["landuse"] = landuse
        collection["features"].append({
            "type": "Feature",
            "properties": properties,
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    return json.dumps(collection)


def box_ring(min_x: float, min_y: float, max_x: float, max_y: float) -> list[list[float]]:
    return [[min_x, min_y], [max_x, min_y], [max_x, max_y], [min_x, max_y], [min_x, min_y]]


def write_run_config(directory: Path, footprints: str = "footprints.geojson", sources: dict | None = None, **run) -> Path:
    lines = ["[run]", f"footprints = {footprints}"]
    lines += [f"{key} = {value}" for key, value in run.items()]
    lines += ["", "[projection]", "mode = already_planar"]
    for name, (path, fmt) in (sources or {}).items():
        lines += ["", f"[source:{name}]", f"path = {path}", f"format = {fmt}"]
    path = directory / "run.ini"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
