"""
labels_gen.py

This generator module turns a run configuration into per-source label tables.
It loads the shipped or configured LBCS tables, reads the parcel footprints,
builds the spatial index once, then reads and labels every selected source.

Key features:
- Shipped-table problems surface as ConfigError; input problems as IngestError.
- Sources are read and labeled concurrently (one worker thread per source) over
  the shared, immutable footprints, index and tables; results come back in the
  order the sources were requested.
- Record-level reader errors are logged and excluded from labeling.
- load_label_exports reads tables back from an earlier `assign` run.

Typical usage:
- Called by every command of app.main that needs label tables.
- Can be run as a standalone script against a run.ini for a quick look.

Dependencies:
- app.data.ingest (readers), app.services.taxonomy, app.services.spatial_index, app.services.assign
- app.config (RunConfig, logger setup)
"""

import asyncio
from pathlib import Path
from typing import Sequence

from pydantic import BaseModel, ConfigDict

from app.data.ingest import (
    IngestError,
    open_input,
    read_footprints_geojson,
    read_label_table,
    read_osm_xml,
    read_poi_csv,
    read_records_geojson,
)
from app.data.models import LabelTable, ParcelFootprint, ProjectionSpec, ReadResult, SourceRecord
from app.services.assign import build_label_table
from app.services.spatial_index import FootprintIndex, build
from app.services.taxonomy import (
    AuthoritativeCrosswalk,
    CrosswalkTable,
    LbcsTaxonomy,
    TaxonomyError,
    load_authoritative_crosswalk,
    load_crosswalks,
    load_taxonomy,
)
from app.config import (
    AUTHORITATIVE_CROSSWALK_PATH,
    CROSSWALK_PATHS,
    TAXONOMY_PATH,
    ConfigError,
    RunConfig,
    SourceConfig,
    setup_logger,
)

logger = setup_logger("labels_generator", indent=4)


class Tables(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    taxonomy: LbcsTaxonomy
    crosswalk: CrosswalkTable
    authoritative: AuthoritativeCrosswalk


class Parcels(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    footprints: list[ParcelFootprint]
    by_id: dict[str, ParcelFootprint]
    index: FootprintIndex

    @property
    def has_authoritative_classes(self) -> bool:
        return any(footprint.authoritative_class is not None for footprint in self.footprints)


def projection_of(config: RunConfig) -> ProjectionSpec:
    return ProjectionSpec(mode=config.projection_mode, origin_lat=config.origin_lat, origin_lon=config.origin_lon)


def _open_table(path: Path):
    try:
        return open(path, "r", encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read table {path}: {e.strerror or e}") from e


def load_tables(
        taxonomy_path: Path = TAXONOMY_PATH,
        crosswalk_paths: Sequence[Path] = tuple(CROSSWALK_PATHS),
        authoritative_crosswalk_path: Path = AUTHORITATIVE_CROSSWALK_PATH
        ) -> Tables:
    """
    Load the taxonomy, crosswalks and authoritative crosswalk; the shipped tables by default.

    Raises:
        ConfigError: a table is missing, unreadable or invalid.
    """
    handles: list = []
    try:
        with _open_table(taxonomy_path) as f:
            taxonomy = load_taxonomy(f)
        for path in crosswalk_paths:
            handles.append(_open_table(path))
        crosswalk = load_crosswalks(handles, taxonomy)
        with _open_table(authoritative_crosswalk_path) as f:
            authoritative = load_authoritative_crosswalk(f, taxonomy)
    except TaxonomyError as e:
        raise ConfigError(f"Invalid LBCS table: {e}") from e
    finally:
        for handle in handles:
            handle.close()
    return Tables(taxonomy=taxonomy, crosswalk=crosswalk, authoritative=authoritative)


def load_config_tables(config: RunConfig) -> Tables:
    return load_tables(config.taxonomy_path, config.crosswalk_paths, config.authoritative_crosswalk_path)


def load_parcels(config: RunConfig) -> Parcels:
    """
    Read footprints and index them.

    Raises:
        IngestError: the footprints file is missing or malformed.
    """
    with open_input(config.footprints_path, binary=True) as f:
        result = read_footprints_geojson(f, projection_of(config), config.id_property, config.class_property)
    for error in result.errors:
        logger.debug(f"footprints {error.location}: {error.message}")
    footprints = result.items
    return Parcels(
        footprints=footprints,
        by_id={footprint.parcel_id: footprint for footprint in footprints},
        index=build(footprints),
    )


def read_source(source: SourceConfig, proj: ProjectionSpec) -> ReadResult[SourceRecord]:
    """Read one configured source in its declared format."""
    if source.format == "poi_csv":
        with open_input(source.path) as f:
            return read_poi_csv(f, source.name, proj)
    if source.format == "osm_xml":
        with open_input(source.path, binary=True) as f:
            return read_osm_xml(f, proj, source=source.name)
    with open_input(source.path, binary=True) as f:
        return read_records_geojson(f, source.name, proj)


def label_source(source: SourceConfig, config: RunConfig, tables: Tables, parcels: Parcels) -> LabelTable:
    result = read_source(source, projection_of(config))
    for error in result.errors:
        logger.debug(f"{source.name} {error.location}: {error.message}")
    return build_label_table(
        result.items,
        tables.crosswalk,
        tables.taxonomy,
        parcels.index,
        parcels.by_id,
        radius=config.radius,
        source=source.name,
    )


def load_label_exports(directory: Path, sources: list[SourceConfig], t: LbcsTaxonomy) -> list[LabelTable]:
    """
    Read `labels_<source>.csv` exports written by `assign` instead of labeling again.

    Raises:
        IngestError: an export is missing, malformed or holds a code outside `t`.
    """
    tables = []
    for source in sources:
        path = directory / f"labels_{source.name}.csv"
        with open_input(path) as f:
            table = read_label_table(f, source.name)
        unknown = {code for codes in table.labels.values() for code in codes} - set(t)
        if unknown:
            raise IngestError(f"{path}: codes {sorted(unknown)} are not in the taxonomy")
        tables.append(table)
    logger.info(f"Loaded {len(tables)} label export(s) from {directory}")
    return tables


async def generate_label_tables(
        config: RunConfig,
        sources: list[SourceConfig],
        tables: Tables,
        parcels: Parcels
        ) -> list[LabelTable]:
    """
    Label every source concurrently.

    Returns:
        Label tables in the order of `sources`.
    """
    logger.info(f"Generating label tables for {len(sources)} source(s)")
    labeled = await asyncio.gather(*(
        asyncio.to_thread(label_source, source, config, tables, parcels) for source in sources
    ))
    logger.info("Label tables generated")
    return list(labeled)


async def main():
    import sys
    from app.config import load_run_config

    config = load_run_config(sys.argv[1])
    tables = load_config_tables(config)
    parcels = load_parcels(config)
    for table in await generate_label_tables(config, config.sources, tables, parcels):
        print(table.source, table.stats.as_rows())


if __name__ == "__main__":
    asyncio.run(main())
