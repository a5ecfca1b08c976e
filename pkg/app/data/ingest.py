"""
ingest.py

Readers for the external input formats. Each reader is a single streaming pass
that turns raw rows, features or elements into ParcelFootprint / SourceRecord
values, projecting lon/lat to local planar meters on the way.

Key features:
- read_footprints_geojson: FeatureCollection of Polygon / MultiPolygon parcels (parts become "id#0", "id#1", ...).
- read_records_geojson: POI or OSM records already converted to GeoJSON.
- read_poi_csv: `id,lat,lon,type` POI files.
- read_osm_xml: tagged nodes become point records, tagged closed ways become polygon records.
- read_label_table: loads a label export back into a LabelTable.
- project: already-planar passthrough or equirectangular projection around an origin.

Record-level problems are tallied in the returned ReadResult and logged; only
unreadable or structurally malformed inputs raise IngestError.

Dependencies:
- shapely (via app.services.geometry constructors)
- pydantic (app.data.models)
- app.config (defaults, logger setup)
"""

import csv
import json
import math
import xml.etree.ElementTree as ET
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Any, Iterator, Optional, Union

from app.data.models import (
    LabelTable,
    ParcelFootprint,
    ProjectionSpec,
    ReadResult,
    SourceRecord,
)
from app.services.geometry import Point, Polygon, make_point, make_polygon
from app.config import (
    DATASF_CLASSES,
    DEFAULT_CLASS_PROPERTY,
    DEFAULT_ID_PROPERTY,
    EARTH_RADIUS_M,
    POI_CSV_COLUMNS,
    setup_logger,
)

logger = setup_logger("ingest_data", indent=6)


class IngestError(ValueError):
    """Fatal input problem: unreadable file, malformed document, missing column. Maps to CLI exit code 2."""


@contextmanager
def open_input(path: Union[str, Path], binary: bool = False) -> Iterator[IO]:
    """Open an input file, raising IngestError that names the path when it cannot be read."""
    try:
        handle = open(path, "rb") if binary else open(path, "r", encoding="utf-8", newline="")
    except OSError as e:
        raise IngestError(f"Cannot read input file {path}: {e.strerror or e}") from e
    with handle:
        yield handle


def project(lat: float, lon: float, proj: ProjectionSpec) -> Point:
    """
    Project geographic degrees to planar meters.

    `already_planar` returns (lon, lat) unchanged; `equirectangular` uses a local
    tangent approximation around the origin with a 6,371 km sphere.
    """
    if proj.mode == "already_planar":
        return make_point(lon, lat)
    x = EARTH_RADIUS_M * math.radians(lon - proj.origin_lon) * math.cos(math.radians(proj.origin_lat))
    y = EARTH_RADIUS_M * math.radians(lat - proj.origin_lat)
    return make_point(x, y)


def _project_ring(ring: Any, proj: ProjectionSpec) -> list[tuple[float, float]]:
    coords = []
    for position in ring:
        lon, lat = float(position[0]), float(position[1])
        p = project(lat, lon, proj)
        coords.append((p.x, p.y))
    return coords


def _polygon_from_rings(rings: Any, proj: ProjectionSpec) -> Polygon:
    if not rings:
        raise ValueError("polygon without rings")
    exterior, *holes = rings
    return make_polygon(_project_ring(exterior, proj), [_project_ring(hole, proj) for hole in holes])


def _load_json(stream: IO) -> Any:
    raw = stream.read()
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise IngestError(f"GeoJSON is not valid UTF-8 at byte offset {e.start}") from e
    else:
        text = raw
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[:e.pos].encode("utf-8"))
        raise IngestError(f"Malformed JSON at byte offset {offset}: {e.msg}") from e


def _features(document: Any) -> list:
    if not isinstance(document, dict) or document.get("type") != "FeatureCollection":
        raise IngestError("GeoJSON input must be a FeatureCollection")
    features = document.get("features")
    if not isinstance(features, list):
        raise IngestError("GeoJSON FeatureCollection has no features array")
    return features


def _feature_id(feature: dict, id_property: str, allow_feature_id: bool = False) -> Optional[str]:
    """Id from the feature's properties; record GeoJSON may fall back to the top-level `id` member."""
    properties = feature.get("properties") or {}
    value = properties.get(id_property)
    if value is None and allow_feature_id:
        value = feature.get("id")
    if value is None or str(value).strip() == "":
        return None
    return str(value).strip()


def read_footprints_geojson(
        stream: IO,
        proj: ProjectionSpec,
        id_property: str = DEFAULT_ID_PROPERTY,
        class_property: str = DEFAULT_CLASS_PROPERTY
        ) -> ReadResult[ParcelFootprint]:
    """
    Read parcel footprints from a GeoJSON FeatureCollection.

    Args:
        stream: Text or binary stream holding the document.
        proj: Projection applied to every vertex.
        id_property: Feature property carrying the parcel id.
        class_property: Feature property carrying the authoritative class, if any.

    Returns:
        ReadResult with one footprint per polygon part. Features with a missing id
        or non-areal geometry are record-level errors; unknown authoritative class
        values are kept as absent and counted under warnings["unknown_authoritative_class"].

    Raises:
        IngestError: malformed JSON (with byte offset) or not a FeatureCollection.
    """
    result: ReadResult[ParcelFootprint] = ReadResult()
    features = _features(_load_json(stream))
    seen: set[str] = set()
    logger.info(f"Reading {len(features)} footprint features")

    for index, feature in enumerate(features):
        if not isinstance(feature, dict):
            result.error(f"feature {index}", "feature is not an object")
            continue
        parcel_id = _feature_id(feature, id_property)
        if parcel_id is None:
            result.error(f"feature {index}", f"missing parcel id property {id_property!r}")
            continue

        raw_class = (feature.get("properties") or {}).get(class_property)
        authoritative_class = None
        if raw_class is not None and str(raw_class).strip():
            if str(raw_class).strip() in DATASF_CLASSES:
                authoritative_class = str(raw_class).strip()
            else:
                result.warn("unknown_authoritative_class")
                logger.debug(f"Parcel {parcel_id}: unknown authoritative class {raw_class!r}")

        geometry = feature.get("geometry") or {}
        kind = geometry.get("type")
        try:
            if kind == "Polygon":
                parts = [(parcel_id, _polygon_from_rings(geometry.get("coordinates"), proj))]
            elif kind == "MultiPolygon":
                parts = [
                    (f"{parcel_id}#{i}", _polygon_from_rings(rings, proj))
                    for i, rings in enumerate(geometry.get("coordinates") or [])
                ]
                if not parts:
                    raise ValueError("empty MultiPolygon")
            else:
                result.error(f"feature {index}", f"non-areal geometry {kind!r} for parcel {parcel_id}")
                continue
        except (ValueError, TypeError, IndexError) as e:
            result.error(f"feature {index}", f"invalid geometry for parcel {parcel_id}: {e}")
            continue

        duplicate = next((pid for pid, _ in parts if pid in seen), None)
        if duplicate is not None:
            result.error(f"feature {index}", f"duplicate parcel id {duplicate!r}")
            continue
        for pid, polygon in parts:
            seen.add(pid)
            result.items.append(ParcelFootprint(parcel_id=pid, geometry=polygon, authoritative_class=authoritative_class))

    if result.warnings:
        logger.warning(f"Footprints with unknown authoritative class: {result.warnings.get('unknown_authoritative_class', 0)}")
    if result.errors:
        logger.warning(f"Rejected {len(result.errors)} footprint feature(s)")
    logger.info(f"Read {len(result.items)} footprints")
    return result


def read_records_geojson(stream: IO, source: str, proj: ProjectionSpec, id_property: str = "id") -> ReadResult[SourceRecord]:
    """Read source records from GeoJSON; every scalar property except the id becomes a tag."""
    result: ReadResult[SourceRecord] = ReadResult()
    seen: set[str] = set()

    for index, feature in enumerate(_features(_load_json(stream))):
        if not isinstance(feature, dict):
            result.error(f"feature {index}", "feature is not an object")
            continue
        record_id = _feature_id(feature, id_property, allow_feature_id=True)
        if record_id is None:
            result.error(f"feature {index}", f"missing record id property {id_property!r}")
            continue
        properties = feature.get("properties") or {}
        tags = tuple(
            (str(key), str(value))
            for key, value in properties.items()
            if key != id_property and isinstance(value, (str, int, float)) and not isinstance(value, bool) and str(value).strip()
        )
        if not tags:
            result.error(f"feature {index}", f"record {record_id} has no tags")
            continue

        geometry = feature.get("geometry") or {}
        kind = geometry.get("type")
        try:
            if kind == "Point":
                lon, lat = geometry["coordinates"][:2]
                parts = [(record_id, project(float(lat), float(lon), proj), "point")]
            elif kind == "Polygon":
                parts = [(record_id, _polygon_from_rings(geometry.get("coordinates"), proj), "polygon")]
            elif kind == "MultiPolygon":
                parts = [
                    (f"{record_id}#{i}", _polygon_from_rings(rings, proj), "polygon")
                    for i, rings in enumerate(geometry.get("coordinates") or [])
                ]
            else:
                result.error(f"feature {index}", f"unsupported geometry {kind!r}")
                continue
        except (ValueError, TypeError, IndexError, KeyError) as e:
            result.error(f"feature {index}", f"invalid geometry for record {record_id}: {e}")
            continue

        if any(rid in seen for rid, _, _ in parts):
            result.error(f"feature {index}", f"duplicate record id {record_id!r}")
            continue
        for rid, shape, geometry_kind in parts:
            seen.add(rid)
            result.items.append(SourceRecord(source=source, record_id=rid, geometry=shape, geometry_kind=geometry_kind, tags=tags))

    logger.info(f"Read {len(result.items)} {source} records from GeoJSON ({len(result.errors)} rejected)")
    return result


def read_poi_csv(stream: IO, source: str, proj: ProjectionSpec) -> ReadResult[SourceRecord]:
    """
    Read POI records from a UTF-8 CSV with header `id,lat,lon,type`.

    Rows with an empty id or type, a duplicate id, or non-numeric coordinates
    are skipped and reported as errors carrying their line number.

    Raises:
        IngestError: a required column is missing, or the stream is not UTF-8 / not CSV.
    """
    result: ReadResult[SourceRecord] = ReadResult()
    seen: set[str] = set()
    try:
        reader = csv.DictReader(stream)
        columns = reader.fieldnames or []
        for column in POI_CSV_COLUMNS:
            if column not in columns:
                raise IngestError(f"POI CSV for {source} is missing column {column!r}")

        for row in reader:
            line = reader.line_num
            record_id = (row.get("id") or "").strip()
            category = (row.get("type") or "").strip()
            if not record_id:
                result.error(f"line {line}", "empty id")
                continue
            if record_id in seen:
                result.error(f"line {line}", f"duplicate id {record_id!r}")
                continue
            try:
                lat, lon = float(row.get("lat") or ""), float(row.get("lon") or "")
                if not (math.isfinite(lat) and math.isfinite(lon)):
                    raise ValueError("non-finite coordinate")
            except ValueError:
                result.error(f"line {line}", f"non-numeric lat/lon ({row.get('lat')!r}, {row.get('lon')!r})")
                continue
            if not category:
                result.error(f"line {line}", "empty type")
                continue

            seen.add(record_id)
            result.items.append(SourceRecord(
                source=source,
                record_id=record_id,
                geometry=project(lat, lon, proj),
                geometry_kind="point",
                tags=(("type", category),),
            ))
    except UnicodeDecodeError as e:
        raise IngestError(f"POI CSV for {source} is not valid UTF-8: {e}") from e
    except csv.Error as e:
        raise IngestError(f"Malformed POI CSV for {source}: {e}") from e

    for error in result.errors:
        logger.debug(f"{source} {error.location}: {error.message}")
    if result.errors:
        logger.warning(f"Skipped {len(result.errors)} corrupt {source} row(s)")
    logger.info(f"Read {len(result.items)} {source} POI records")
    return result


def _tags_of(element: ET.Element) -> tuple[tuple[str, str], ...]:
    return tuple((tag.get("k", ""), tag.get("v", "")) for tag in element.findall("tag") if tag.get("k"))


def read_osm_xml(stream: IO, proj: ProjectionSpec, source: str = "osm") -> ReadResult[SourceRecord]:
    """
    Read OSM XML nodes and ways.

    Tagged nodes become point records ("node/<id>"); tagged closed ways with at
    least four refs become polygon records ("way/<id>") built from the referenced
    node coordinates in order. Untagged elements and unclosed ways are tallied in
    `skipped`; ways referencing missing nodes, and elements with bad coordinates,
    are record-level errors. Relations are ignored (tallied as skipped).

    Raises:
        IngestError: malformed XML, with the line and column of the problem.
    """
    result: ReadResult[SourceRecord] = ReadResult()
    coordinates: dict[str, tuple[float, float]] = {}
    ways: list[tuple[str, list[str], tuple[tuple[str, str], ...]]] = []

    try:
        for _, element in ET.iterparse(stream, events=("end",)):
            if element.tag == "node":
                node_id = element.get("id", "")
                tags = _tags_of(element)
                try:
                    p = project(float(element.get("lat", "")), float(element.get("lon", "")), proj)
                except ValueError:
                    result.error(f"node {node_id}", "missing or non-numeric lat/lon")
                    element.clear()
                    continue
                coordinates[node_id] = (p.x, p.y)
                if tags:
                    result.items.append(SourceRecord(
                        source=source, record_id=f"node/{node_id}", geometry=p, geometry_kind="point", tags=tags
                    ))
                else:
                    result.skip("untagged_node")
                element.clear()
            elif element.tag == "way":
                refs = [nd.get("ref", "") for nd in element.findall("nd")]
                ways.append((element.get("id", ""), refs, _tags_of(element)))
                element.clear()
            elif element.tag == "relation":
                result.skip("relation")
                element.clear()
    except ET.ParseError as e:
        line, column = e.position
        raise IngestError(f"Malformed OSM XML at line {line}, column {column}: {e}") from e

    for way_id, refs, tags in ways:
        if not tags:
            result.skip("untagged_way")
            continue
        if len(refs) < 4 or refs[0] != refs[-1]:
            result.skip("unclosed_way")
            logger.debug(f"Skipping unclosed way {way_id} ({len(refs)} refs)")
            continue
        missing = [ref for ref in refs if ref not in coordinates]
        if missing:
            result.error(f"way {way_id}", f"references missing node {missing[0]}")
            continue
        try:
            polygon = make_polygon([coordinates[ref] for ref in refs[:-1]])
        except ValueError as e:
            result.error(f"way {way_id}", f"invalid polygon: {e}")
            continue
        result.items.append(SourceRecord(
            source=source, record_id=f"way/{way_id}", geometry=polygon, geometry_kind="polygon", tags=tags
        ))

    if result.skipped:
        logger.info(f"OSM skips: {dict(sorted(result.skipped.items()))}")
    if result.errors:
        logger.warning(f"Rejected {len(result.errors)} OSM element(s)")
    logger.info(f"Read {len(result.items)} OSM records")
    return result


def read_label_table(stream: IO, source: str) -> LabelTable:
    """
    Load a `parcel_id,lbcs,record_ids` export back into a LabelTable.

    Validity statistics are not part of the export and stay zeroed.
    """
    table = LabelTable(source=source)
    reader = csv.DictReader(stream)
    for column in ("parcel_id", "lbcs", "record_ids"):
        if column not in (reader.fieldnames or []):
            raise IngestError(f"Label table for {source} is missing column {column!r}")
    for row in reader:
        try:
            code = int(row["lbcs"])
        except (TypeError, ValueError) as e:
            raise IngestError(f"Label table for {source}, line {reader.line_num}: bad code {row['lbcs']!r}") from e
        for record_id in (row["record_ids"] or "").split(";"):
            if record_id:
                table.add(row["parcel_id"], code, record_id)
    return table

