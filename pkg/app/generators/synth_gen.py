"""
synth_gen.py

This generator module builds deterministic synthetic cities with known ground
truth, and holds the brute-force labeling oracle the indexed pipeline is
checked against.

Key features:
- A rows x cols grid of square parcels separated by streets of width `gap`; parcel
  (r, c) has its lower-left corner at (c * (size + gap), r * (size + gap)) and id "r{r}c{c}".
- Every parcel gets one planted LBCS code drawn uniformly from the palette, plus
  the DataSF class that code maps to, if any.
- Every source emits one point record per parcel that is not dropped, at the
  parcel centre plus Gaussian jitter; with probability `confusion_rate` the record
  carries the tag of another palette code.
- Tags come from the first crosswalk row (file order) of the source for the code.
- Sources named in OSM XML format emit tagged nodes; the others emit POI CSV rows.
- All randomness comes from one numpy Generator seeded with `seed`, drawn in a
  fixed order, so identical params give byte-identical files.
- oracle_assign: the label-table contract implemented by exhaustive scan, no index.

Typical usage:
- `parcelfuse synth --config params.ini --out fixture/` writes a fixture with a run.ini
  that the other commands accept directly.

Dependencies:
- numpy (seeded random draws)
- pydantic (params and fixture models)
- app.services.geometry, app.services.taxonomy, app.services.metrics
- app.presentation.report (file writing)
- app.config (INI reading, logger setup)
"""

import configparser
import csv
import io
import json
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.data.models import LabelTable, LbcsCode, ParcelFootprint, SourceRecord
from app.services.assign import ContractViolation, table_source, unique_records
from app.services.geometry import bounding_box, contains, distance, intersects_interior, make_point, square
from app.services.metrics import authoritative_classes
from app.services.taxonomy import AuthoritativeCrosswalk, CrosswalkRow, CrosswalkTable, LbcsTaxonomy, align
from app.presentation.report import write_text
from app.config import DEFAULT_OUTPUT_DIR, DEFAULT_RADIUS, DISTANCE_TIE_TOLERANCE, ConfigError, read_ini, setup_logger

logger = setup_logger("synth_generator", indent=4)

COORDINATE_PLACES = 3


class SynthSource(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(min_length=1)
    jitter_sigma: float = Field(default=0.0, ge=0)
    drop_rate: float = Field(default=0.0, ge=0, le=1)
    confusion_rate: float = Field(default=0.0, ge=0, le=1)
    format: str = "poi_csv"

    @field_validator("format")
    @classmethod
    def _emittable(cls, value: str) -> str:
        if value not in ("poi_csv", "osm_xml"):
            raise ValueError(f"synthetic sources are emitted as poi_csv or osm_xml, got {value!r}")
        return value

    @property
    def file_name(self) -> str:
        return f"{self.name}.osm" if self.format == "osm_xml" else f"{self.name}.csv"


class SynthParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    parcel_size: float = Field(gt=0)
    gap: float = Field(gt=0)
    palette: list[LbcsCode] = Field(min_length=1)
    sources: list[SynthSource] = Field(default_factory=list)


class TruthRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    parcel_id: str
    lbcs: LbcsCode
    datasf: Optional[str] = None


class SynthFixture(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: SynthParams
    footprints: list[ParcelFootprint]
    truth: list[TruthRow]
    records: dict[str, list[SourceRecord]]


def load_synth_params(path: Path | str) -> SynthParams:
    """
    Parse a synth params INI file.

    Raises:
        ConfigError: unreadable file, missing [synth] section or invalid values.
    """
    path = Path(path)
    parser = read_ini(path)
    if not parser.has_section("synth"):
        raise ConfigError(f"{path}: missing [synth] section")
    synth = parser["synth"]

    values: dict = {key: synth[key].strip() for key in ("seed", "rows", "cols", "parcel_size", "gap") if key in synth}
    try:
        values["palette"] = [int(code) for code in synth.get("palette", "").split(",") if code.strip()]
    except ValueError as e:
        raise ConfigError(f"{path}: palette must list LBCS codes: {e}") from e

    sources = []
    for section in parser.sections():
        if section.startswith("source:"):
            entry = {key: value.strip() for key, value in parser[section].items()}
            sources.append({"name": section.split(":", 1)[1].strip(), **entry})
    values["sources"] = sources

    try:
        params = SynthParams(**values)
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid synth params: {e}") from e
    if len({source.name for source in params.sources}) != len(params.sources):
        raise ConfigError(f"{path}: duplicate source sections")
    logger.info(f"Loaded synth params {path}: {params.rows}x{params.cols} grid, {len(params.sources)} source(s)")
    return params


def _tag_rows(p: SynthParams, x: CrosswalkTable) -> dict[tuple[str, LbcsCode], CrosswalkRow]:
    """First point (or any-kind) crosswalk row per (source, palette code)."""
    chosen: dict[tuple[str, LbcsCode], CrosswalkRow] = {}
    for row in x.rows:
        if row.geometry_kind in ("point", "any"):
            chosen.setdefault((row.source, row.lbcs), row)
    for source in p.sources:
        for code in p.palette:
            if (source.name, code) not in chosen:
                raise ConfigError(f"source {source.name} has no crosswalk tag for palette code {code}")
    return chosen


def generate(p: SynthParams, t: LbcsTaxonomy, x: CrosswalkTable, a: AuthoritativeCrosswalk) -> SynthFixture:
    """
    Build the synthetic city described by `p`.

    Draw order: planted codes for all parcels, then per source (in params order)
    drop draws, jitter offsets, confusion draws and replacement picks.

    Raises:
        ConfigError: a palette code outside the taxonomy, or a source without a crosswalk tag for a palette code.
    """
    unknown = [code for code in p.palette if code not in t]
    if unknown:
        raise ConfigError(f"palette codes {unknown} are not in the taxonomy")
    tags = _tag_rows(p, x)
    rng = np.random.default_rng(p.seed)
    step = p.parcel_size + p.gap

    cells = [(r, c) for r in range(p.rows) for c in range(p.cols)]
    planted = rng.integers(0, len(p.palette), size=len(cells))

    footprints, truth, centres = [], [], []
    for (r, c), pick in zip(cells, planted):
        parcel_id = f"r{r}c{c}"
        x0, y0 = c * step, r * step
        code = p.palette[int(pick)]
        classes = sorted(authoritative_classes([code], a, t))
        datasf = classes[0] if classes else None
        footprints.append(ParcelFootprint(
            parcel_id=parcel_id,
            geometry=square(x0, y0, x0 + p.parcel_size, y0 + p.parcel_size),
            authoritative_class=datasf,
        ))
        truth.append(TruthRow(parcel_id=parcel_id, lbcs=code, datasf=datasf))
        centres.append((x0 + p.parcel_size / 2, y0 + p.parcel_size / 2))

    records: dict[str, list[SourceRecord]] = {}
    for source in p.sources:
        n = len(cells)
        dropped = rng.random(n) < source.drop_rate
        offsets = rng.normal(0.0, 1.0, size=(n, 2)) * source.jitter_sigma
        confused = rng.random(n) < source.confusion_rate
        others = rng.integers(0, max(len(p.palette) - 1, 1), size=n)

        emitted = []
        for i, (truth_row, (cx, cy)) in enumerate(zip(truth, centres)):
            if dropped[i]:
                continue
            code = truth_row.lbcs
            if confused[i] and len(p.palette) > 1:
                alternatives = [other for other in p.palette if other != code]
                code = alternatives[int(others[i]) % len(alternatives)]
            row = tags[(source.name, code)]
            px = round(float(cx + offsets[i, 0]), COORDINATE_PLACES)
            py = round(float(cy + offsets[i, 1]), COORDINATE_PLACES)
            if source.format == "osm_xml":
                record_id, tag = f"node/{len(emitted) + 1}", (row.key, row.value)
            else:
                record_id, tag = f"{source.name}-{truth_row.parcel_id}", ("type", row.value)
            emitted.append(SourceRecord(
                source=source.name, record_id=record_id, geometry=make_point(px, py),
                geometry_kind="point", tags=(tag,),
            ))
        records[source.name] = emitted
        logger.debug(f"{source.name}: {len(emitted)} records from {n} parcels")

    logger.info(f"Generated {len(footprints)} parcels and {sum(len(v) for v in records.values())} records")
    return SynthFixture(params=p, footprints=footprints, truth=truth, records=records)


def _coordinate(value: float) -> str:
    return f"{value:.{COORDINATE_PLACES}f}"


def render_footprints(footprints: Iterable[ParcelFootprint]) -> str:
    features = []
    for footprint in footprints:
        properties: dict = {"mapblklot": footprint.parcel_id}
        if footprint.authoritative_class is not None:
            properties["landuse"] = footprint.authoritative_class
        ring = [[round(px, COORDINATE_PLACES), round(py, COORDINATE_PLACES)] for px, py in footprint.geometry.exterior.coords]
        features.append({
            "type": "Feature",
            "properties": properties,
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=1) + "\n"


def render_truth(truth: Iterable[TruthRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["parcel_id", "lbcs", "datasf"])
    writer.writerows((row.parcel_id, row.lbcs, row.datasf or "") for row in truth)
    return buffer.getvalue()


def render_poi_csv(records: Iterable[SourceRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["id", "lat", "lon", "type"])
    for record in records:
        writer.writerow([record.record_id, _coordinate(record.geometry.y), _coordinate(record.geometry.x), record.tags[0][1]])
    return buffer.getvalue()


def render_osm_xml(records: Iterable[SourceRecord]) -> str:
    root = ET.Element("osm", version="0.6", generator="parcelfuse")
    for record in records:
        node = ET.SubElement(root, "node", id=record.record_id.split("/", 1)[1],
                             lat=_coordinate(record.geometry.y), lon=_coordinate(record.geometry.x))
        for key, value in record.tags:
            ET.SubElement(node, "tag", k=key, v=value)
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def render_run_config(p: SynthParams) -> str:
    parser = configparser.ConfigParser()
    parser["run"] = {"footprints": "footprints.geojson", "radius": f"{DEFAULT_RADIUS:g}", "output_dir": DEFAULT_OUTPUT_DIR}
    parser["projection"] = {"mode": "already_planar"}
    for source in p.sources:
        parser[f"source:{source.name}"] = {"path": source.file_name, "format": source.format}
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def write_fixture(fixture: SynthFixture, directory: Path) -> list[Path]:
    """Write footprints.geojson, truth.csv, one file per source and run.ini into `directory`."""
    written = [
        write_text(directory / "footprints.geojson", render_footprints(fixture.footprints)),
        write_text(directory / "truth.csv", render_truth(fixture.truth)),
    ]
    for source in fixture.params.sources:
        records = fixture.records[source.name]
        text = render_osm_xml(records) if source.format == "osm_xml" else render_poi_csv(records)
        written.append(write_text(directory / source.file_name, text))
    written.append(write_text(directory / "run.ini", render_run_config(fixture.params)))
    logger.info(f"Wrote synthetic fixture to {directory} ({len(written)} files)")
    return written


def oracle_assign(
        records: Iterable[SourceRecord],
        footprints: Iterable[ParcelFootprint],
        crosswalk: CrosswalkTable,
        taxonomy: LbcsTaxonomy,
        radius: float = DEFAULT_RADIUS,
        source: Optional[str] = None
        ) -> LabelTable:
    """
    Label table computed by scanning every footprint for every record.

    Raises:
        ContractViolation: records from more than one source, or a crosswalk code outside `taxonomy`.
    """
    records = unique_records(records)
    footprints = list(footprints)
    table = LabelTable(source=table_source(records, source))
    stats = table.stats

    for record in records:
        stats.total_records += 1
        codes = align(record, crosswalk)
        if not codes:
            stats.discarded_unaligned += 1
            continue
        unknown = codes - set(taxonomy)
        if unknown:
            raise ContractViolation(f"crosswalk codes {sorted(unknown)} are not in the taxonomy")
        stats.aligned_records += 1

        if record.geometry_kind == "point":
            parcels = set()
            inside = [f for f in footprints if contains(f.geometry, record.geometry)]
            if inside:
                best = min(inside, key=lambda f: (bounding_box(f.geometry).area, f.parcel_id))
                parcels.add(best.parcel_id)
            else:
                near = [
                    (distance(f.geometry, record.geometry), bounding_box(f.geometry).area, f.parcel_id)
                    for f in footprints
                ]
                near = [entry for entry in near if entry[0] <= radius]
                if near:
                    closest = min(entry[0] for entry in near)
                    parcels.add(min((area, pid) for d, area, pid in near if d <= closest + DISTANCE_TIE_TOLERANCE)[1])
        else:
            parcels = {f.parcel_id for f in footprints if intersects_interior(f.geometry, record.geometry)}

        if not parcels:
            stats.discarded_spatial += 1
            continue
        stats.valid_records += 1
        for parcel_id in parcels:
            for code in codes:
                table.add(parcel_id, code, record.record_id)
    return table


if __name__ == "__main__":
    from app.config import SYNTH_PARAMS_PATH
    from app.generators.labels_gen import load_tables

    tables = load_tables()
    fixture = generate(load_synth_params(SYNTH_PARAMS_PATH), tables.taxonomy, tables.crosswalk, tables.authoritative)
    for name, emitted in fixture.records.items():
        print(name, len(emitted), "records")
