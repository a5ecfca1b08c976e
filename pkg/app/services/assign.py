"""
assign.py

Spatial assignment of aligned source records to parcel footprints, and the
per-source label table built from it.

Key features:
- assign_point: containing footprint, else the nearest footprint within `radius` meters, else none.
- assign_polygon: every footprint whose interior overlaps the record's polygon with positive area.
- build_label_table: align -> assign -> label, with validity counters for every record.

Ties (a point on a shared boundary, or footprints equidistant within 1e-9 m) go to
the smallest bounding-box area, then the lexicographically smallest parcel id. Labels keep the
code's own level; roll-up to ancestors happens in app.services.metrics.

Dependencies:
- app.services.geometry, app.services.spatial_index (predicates and candidate lookup)
- app.services.taxonomy (align)
- app.data.models (LabelTable, ValidityStats)
"""

from typing import Iterable, Mapping, Optional

from app.data.models import LabelTable, LbcsCode, ParcelFootprint, SourceRecord
from app.services.geometry import bounding_box, contains, distance, intersects_interior
from app.services.spatial_index import FootprintIndex
from app.services.taxonomy import CrosswalkTable, LbcsTaxonomy, align
from app.config import DEFAULT_RADIUS, DISTANCE_TIE_TOLERANCE, setup_logger

logger = setup_logger("assign_service", indent=6)


class ContractViolation(ValueError):
    """A caller broke an operation's precondition (wrong geometry kind, mixed sources, no codes)."""


def _require(record: SourceRecord, kind: str, codes: set[LbcsCode]) -> None:
    if record.geometry_kind != kind:
        raise ContractViolation(f"record {record.record_id} is a {record.geometry_kind}, expected a {kind}")
    if not codes:
        raise ContractViolation(f"record {record.record_id} has no LBCS codes to assign")


def assign_point(
        record: SourceRecord,
        codes: set[LbcsCode],
        idx: FootprintIndex,
        footprints: Mapping[str, ParcelFootprint],
        radius: float = DEFAULT_RADIUS
        ) -> Optional[str]:
    """
    Parcel a point record labels, or None when no footprint lies within `radius`.

    Raises:
        ContractViolation: the record is not a point, or `codes` is empty.
        ValueError: negative radius.
    """
    _require(record, "point", codes)
    p = record.geometry

    containing = [pid for pid in idx.query_point(p, 0.0) if contains(footprints[pid].geometry, p)]
    if containing:
        return min(containing, key=lambda pid: (idx.box_of(pid).area, pid))

    nearby = []
    for pid in idx.query_point(p, radius):
        d = distance(footprints[pid].geometry, p)
        if d <= radius:
            nearby.append((d, idx.box_of(pid).area, pid))
    if not nearby:
        return None
    closest = min(d for d, _, _ in nearby)
    tied = [(area, pid) for d, area, pid in nearby if d <= closest + DISTANCE_TIE_TOLERANCE]
    return min(tied)[1]


def assign_polygon(
        record: SourceRecord,
        codes: set[LbcsCode],
        idx: FootprintIndex,
        footprints: Mapping[str, ParcelFootprint]
        ) -> set[str]:
    """
    Parcels whose interior overlaps the record's polygon. Edge or vertex contact alone does not count.

    Raises:
        ContractViolation: the record is not a polygon, or `codes` is empty.
    """
    _require(record, "polygon", codes)
    polygon = record.geometry
    return {
        pid for pid in idx.query_box(bounding_box(polygon))
        if intersects_interior(footprints[pid].geometry, polygon)
    }


def unique_records(records: Iterable[SourceRecord]) -> list[SourceRecord]:
    """Records with repeated record ids dropped, keeping the first occurrence."""
    seen: set[str] = set()
    unique = []
    for record in records:
        if record.record_id in seen:
            logger.debug(f"Dropping repeated record id {record.record_id}")
            continue
        seen.add(record.record_id)
        unique.append(record)
    return unique


def table_source(records: list[SourceRecord], source: Optional[str]) -> str:
    """The one source shared by `records` (and `source`, when given)."""
    names = {record.source for record in records}
    if source is not None:
        names.add(source)
    if len(names) > 1:
        raise ContractViolation(f"records from several sources in one label table: {', '.join(sorted(names))}")
    return names.pop() if names else ""


def build_label_table(
        records: Iterable[SourceRecord],
        x: CrosswalkTable,
        t: LbcsTaxonomy,
        idx: FootprintIndex,
        footprints: Mapping[str, ParcelFootprint],
        radius: float = DEFAULT_RADIUS,
        source: Optional[str] = None
        ) -> LabelTable:
    """
    Label parcels from one source's records.

    Each record is aligned through the crosswalk; unaligned records are tallied
    and dropped. Aligned records are assigned by their geometry kind; records that
    reach no parcel are tallied as spatial discards. Every code of a valid record
    is added to every parcel it reaches, with the record id as provenance.

    Args:
        records: Records of a single source.
        x: Crosswalk table.
        t: Taxonomy every aligned code must belong to.
        idx: Index built over `footprints`.
        footprints: Parcel id -> footprint.
        radius: Nearest-footprint fallback for point records, in meters.
        source: Name of the table's source; required when `records` may be empty.

    Raises:
        ContractViolation: records from more than one source, or a crosswalk code outside `t`.
    """
    records = unique_records(records)
    table = LabelTable(source=table_source(records, source))
    stats = table.stats
    logger.info(f"Labeling {len(records)} {table.source} records (radius {radius} m)")

    for record in records:
        stats.total_records += 1
        codes = align(record, x)
        if not codes:
            stats.discarded_unaligned += 1
            logger.debug(f"{record.record_id}: no crosswalk match for {list(record.tags)}")
            continue
        unknown = codes - set(t)
        if unknown:
            raise ContractViolation(f"crosswalk codes {sorted(unknown)} are not in the taxonomy")
        stats.aligned_records += 1

        if record.geometry_kind == "point":
            parcel = assign_point(record, codes, idx, footprints, radius)
            parcels = {parcel} if parcel is not None else set()
        else:
            parcels = assign_polygon(record, codes, idx, footprints)

        if not parcels:
            stats.discarded_spatial += 1
            logger.debug(f"{record.record_id}: no footprint reached")
            continue
        stats.valid_records += 1
        for parcel_id in parcels:
            for code in codes:
                table.add(parcel_id, code, record.record_id)

    logger.info(
        f"{table.source}: {stats.valid_records}/{stats.total_records} valid records, "
        f"{table.labeled_parcels} parcels labeled"
    )
    return table


if __name__ == "__main__":
    from app.services.geometry import make_point, square
    from app.services.spatial_index import build

    parcels = {pid: ParcelFootprint(parcel_id=pid, geometry=square(x, 0, x + 20, 20)) for pid, x in (("A", 0), ("B", 30))}
    index = build(parcels.values())
    poi = SourceRecord(source="google", record_id="1", geometry=make_point(24, 10), geometry_kind="point", tags=(("type", "cafe"),))
    print("nearest:", assign_point(poi, {2500}, index, parcels))
