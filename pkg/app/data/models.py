"""
models.py

Defines the domain models shared across the application: parcel footprints,
source records, the projection settings, reader results and per-source label
tables with their validity statistics.

Key features:
- Pydantic models with validation at construction; geometry fields hold shapely objects.
- Footprints, records and projection settings are frozen (immutable).
- LabelTable accumulates labels with set semantics and records provenance.
- ReadResult carries parsed items together with record-level errors and skip tallies.

Dependencies:
- pydantic (models and validators)
- shapely (geometry types)
- app.config (DataSF class names)
"""

from typing import Generic, Literal, Optional, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from shapely.geometry import Point, Polygon

from app.config import DATASF_CLASSES

LbcsCode = int
GeometryKind = Literal["point", "polygon"]


class ParcelFootprint(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    parcel_id: str = Field(min_length=1)
    geometry: Polygon
    authoritative_class: Optional[str] = None

    @field_validator("authoritative_class")
    @classmethod
    def _known_class(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in DATASF_CLASSES:
            raise ValueError(f"unknown authoritative class {value!r}")
        return value


class SourceRecord(BaseModel):
    """One POI or OSM feature. `source` is google, bing, yellowpages, osm or any other name."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    source: str = Field(min_length=1)
    record_id: str = Field(min_length=1)
    geometry: Union[Point, Polygon]
    geometry_kind: GeometryKind
    tags: tuple[tuple[str, str], ...]

    @model_validator(mode="after")
    def _consistent(self) -> "SourceRecord":
        if not self.tags:
            raise ValueError(f"record {self.record_id!r} has no tags")
        expected = "point" if isinstance(self.geometry, Point) else "polygon"
        if self.geometry_kind != expected:
            raise ValueError(f"record {self.record_id!r} declares {self.geometry_kind} but holds a {expected}")
        return self


class ProjectionSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["already_planar", "equirectangular"] = "already_planar"
    origin_lat: float = Field(default=0.0, ge=-90, le=90)
    origin_lon: float = Field(default=0.0, ge=-180, le=180)


class RecordError(BaseModel):
    """A rejected input row / feature / element; `location` is a line number, feature index or element id."""
    model_config = ConfigDict(frozen=True)

    location: str
    message: str


T = TypeVar("T")


class ReadResult(BaseModel, Generic[T]):
    items: list[T] = Field(default_factory=list)
    errors: list[RecordError] = Field(default_factory=list)
    skipped: dict[str, int] = Field(default_factory=dict)
    warnings: dict[str, int] = Field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    def warn(self, reason: str) -> None:
        self.warnings[reason] = self.warnings.get(reason, 0) + 1

    def error(self, location: object, message: str) -> None:
        self.errors.append(RecordError(location=str(location), message=message))

    @property
    def rejected(self) -> int:
        """Skipped plus errored inputs."""
        return len(self.errors) + sum(self.skipped.values())


class ValidityStats(BaseModel):
    total_records: int = 0
    aligned_records: int = 0
    valid_records: int = 0
    discarded_unaligned: int = 0
    discarded_spatial: int = 0

    @property
    def is_consistent(self) -> bool:
        """Counters conserve records: total = aligned + unaligned and aligned = valid + spatial discards."""
        return (
            self.total_records == self.aligned_records + self.discarded_unaligned
            and self.aligned_records == self.valid_records + self.discarded_spatial
        )

    def as_rows(self) -> list[tuple[str, int]]:
        return [
            ("total_records", self.total_records),
            ("aligned_records", self.aligned_records),
            ("valid_records", self.valid_records),
            ("discarded_unaligned", self.discarded_unaligned),
            ("discarded_spatial", self.discarded_spatial),
        ]


class LabelTable(BaseModel):
    """Per-source mapping parcel id -> LBCS codes, with the record ids behind every (parcel, code) pair."""

    source: str
    labels: dict[str, set[LbcsCode]] = Field(default_factory=dict)
    provenance: dict[tuple[str, LbcsCode], set[str]] = Field(default_factory=dict)
    stats: ValidityStats = Field(default_factory=ValidityStats)

    def add(self, parcel_id: str, code: LbcsCode, record_id: str) -> None:
        self.labels.setdefault(parcel_id, set()).add(code)
        self.provenance.setdefault((parcel_id, code), set()).add(record_id)

    @property
    def labeled_parcels(self) -> int:
        return len(self.labels)
