"""
taxonomy.py

LBCS class hierarchy and the tables that translate raw source tags into LBCS
codes and LBCS codes into DataSF land-use classes. All three are plain CSV data
files shipped in app/resources/lbcs/ so they can be amended without code changes.

Key features:
- load_taxonomy: `code,name` rows, parents derived from code arithmetic (XYZ0 -> XY00 -> X000).
- load_crosswalk / load_crosswalks: `source,geometry_kind,key,value,lbcs` rows validated against the taxonomy.
- load_authoritative_crosswalk: `lbcs,datasf` rows.
- resolve: level and ancestors of a code.
- align: LBCS codes a source record maps to (union over its tags).
- to_authoritative: DataSF class of a code, if any.

Lines starting with '#' are comments. Every table is immutable once loaded, so
lookups are safe to share between concurrent workers.

Dependencies:
- pydantic (row models)
- app.data.models (SourceRecord)
- app.config (DataSF classes, logger setup)
"""

import csv
import re
from typing import IO, Iterator, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.data.models import LbcsCode, SourceRecord
from app.config import DATASF_CLASSES, setup_logger

logger = setup_logger("taxonomy_service", indent=6)

CODE_PATTERN = re.compile(r"^[1-9]\d{3}$")

CrosswalkKind = Literal["point", "polygon", "any"]


class TaxonomyError(ValueError):
    """Invalid or inconsistent taxonomy / crosswalk table, or an unknown LBCS code."""


def level_of(code: LbcsCode) -> int:
    if code % 1000 == 0:
        return 1
    if code % 100 == 0:
        return 2
    if code % 10 == 0:
        return 3
    raise TaxonomyError(f"{code} is not an LBCS class code")


def parent_code(code: LbcsCode) -> Optional[LbcsCode]:
    level = level_of(code)
    if level == 1:
        return None
    if level == 2:
        return code - code % 1000
    return code - code % 100


def normalize_value(value: str) -> str:
    """Trim, lowercase, equate underscores with spaces and collapse inner whitespace."""
    return " ".join(value.strip().lower().replace("_", " ").split())


class TaxonomyEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    code: LbcsCode
    name: str
    parent: Optional[LbcsCode] = None


class LbcsTaxonomy:
    """Codes in file order, with parent and child links."""

    def __init__(self, entries: list[TaxonomyEntry]):
        self._entries = {entry.code: entry for entry in entries}
        self._children: dict[LbcsCode, list[LbcsCode]] = {entry.code: [] for entry in entries}
        for entry in entries:
            if entry.parent is not None:
                self._children[entry.parent].append(entry.code)

    def __contains__(self, code: object) -> bool:
        return code in self._entries

    def __iter__(self) -> Iterator[LbcsCode]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def codes(self) -> list[LbcsCode]:
        return list(self._entries)

    def entry(self, code: LbcsCode) -> TaxonomyEntry:
        try:
            return self._entries[code]
        except KeyError:
            raise TaxonomyError(f"Unknown LBCS code {code}") from None

    def name(self, code: LbcsCode) -> str:
        return self.entry(code).name

    def parent(self, code: LbcsCode) -> Optional[LbcsCode]:
        return self.entry(code).parent

    def children(self, code: LbcsCode) -> list[LbcsCode]:
        self.entry(code)
        return list(self._children[code])

    def descendants(self, code: LbcsCode) -> list[LbcsCode]:
        """All codes below `code`, depth first, excluding the code itself."""
        found = []
        for child in self.children(code):
            found.append(child)
            found.extend(self.descendants(child))
        return found

    def level_counts(self) -> dict[int, int]:
        counts = {1: 0, 2: 0, 3: 0}
        for code in self._entries:
            counts[level_of(code)] += 1
        return counts


class CrosswalkRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: str = Field(min_length=1)
    geometry_kind: CrosswalkKind
    key: str = Field(min_length=1)
    value: str = Field(min_length=1)
    lbcs: LbcsCode


class CrosswalkTable:
    """Raw (source, geometry kind, key, value) -> LBCS code rows, indexed on the normalized value."""

    def __init__(self, rows: Optional[list[CrosswalkRow]] = None):
        self._rows: list[CrosswalkRow] = []
        self._lookup: dict[tuple[str, str, str, str], LbcsCode] = {}
        for row in rows or []:
            self.add(row)

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def rows(self) -> list[CrosswalkRow]:
        return list(self._rows)

    @staticmethod
    def _key(source: str, kind: str, key: str, value: str) -> tuple[str, str, str, str]:
        return (source.strip(), kind, key.strip(), normalize_value(value))

    def add(self, row: CrosswalkRow) -> None:
        key = self._key(row.source, row.geometry_kind, row.key, row.value)
        if key in self._lookup:
            raise TaxonomyError(
                f"Duplicate crosswalk row for source={row.source} kind={row.geometry_kind} "
                f"key={row.key} value={row.value!r}"
            )
        self._lookup[key] = row.lbcs
        self._rows.append(row)

    def lookup(self, source: str, kind: str, key: str, value: str) -> set[LbcsCode]:
        codes = set()
        for candidate in (kind, "any"):
            code = self._lookup.get(self._key(source, candidate, key, value))
            if code is not None:
                codes.add(code)
        return codes

    def sources(self) -> list[str]:
        return sorted({row.source for row in self._rows})


class AuthoritativeCrosswalk:
    """LBCS code -> DataSF class, in file order."""

    def __init__(self, mapping: dict[LbcsCode, str]):
        self.mapping = dict(mapping)

    def __len__(self) -> int:
        return len(self.mapping)

    def get(self, code: LbcsCode) -> Optional[str]:
        return self.mapping.get(code)

    @property
    def classes(self) -> list[str]:
        """DataSF classes in order of first appearance."""
        return list(dict.fromkeys(self.mapping.values()))


def _read_rows(stream: IO, columns: tuple[str, ...], what: str) -> list[tuple[int, dict[str, str]]]:
    """Rows of a commented CSV table, each paired with its line number in the file."""
    raw = stream.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    numbered = [
        (number, line)
        for number, line in enumerate(raw.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    reader = csv.DictReader([line for _, line in numbered])
    header = [name.strip() for name in reader.fieldnames or []]
    for column in columns:
        if column not in header:
            raise TaxonomyError(f"{what} table is missing column {column!r}")
    reader.fieldnames = header

    rows = []
    for row in reader:
        line = numbered[reader.line_num - 1][0]
        rows.append((line, {key: (value or "").strip() for key, value in row.items() if key is not None}))
    return rows


def _parse_code(raw: str, line: int, what: str) -> LbcsCode:
    if not CODE_PATTERN.match(raw) or int(raw) % 10 != 0:
        raise TaxonomyError(f"{what} line {line}: invalid LBCS code {raw!r}")
    return int(raw)


def load_taxonomy(stream: IO) -> LbcsTaxonomy:
    """
    Load the LBCS hierarchy from `code,name` rows.

    Raises:
        TaxonomyError: a code that is not four digits ending in 0 (message carries the line),
            a duplicate code, or a level-2/3 code whose derived parent is absent.
    """
    entries: list[TaxonomyEntry] = []
    seen: dict[LbcsCode, int] = {}
    for line, row in _read_rows(stream, ("code", "name"), "Taxonomy"):
        code = _parse_code(row["code"], line, "Taxonomy")
        if code in seen:
            raise TaxonomyError(f"Taxonomy line {line}: duplicate code {code} (first on line {seen[code]})")
        seen[code] = line
        entries.append(TaxonomyEntry(code=code, name=row["name"], parent=parent_code(code)))

    for entry in entries:
        if entry.parent is not None and entry.parent not in seen:
            raise TaxonomyError(f"Taxonomy line {seen[entry.code]}: code {entry.code} has missing parent {entry.parent}")

    taxonomy = LbcsTaxonomy(entries)
    logger.info(f"Loaded LBCS taxonomy: {len(taxonomy)} codes, levels {taxonomy.level_counts()}")
    return taxonomy


def load_crosswalk(stream: IO, t: LbcsTaxonomy, into: Optional[CrosswalkTable] = None) -> CrosswalkTable:
    """
    Load `source,geometry_kind,key,value,lbcs` rows, optionally appending to an existing table.

    Raises:
        TaxonomyError: unknown geometry kind, a code missing from the taxonomy,
            or a row whose normalized key duplicates an earlier one.
    """
    table = into if into is not None else CrosswalkTable()
    added = 0
    for line, row in _read_rows(stream, ("source", "geometry_kind", "key", "value", "lbcs"), "Crosswalk"):
        if row["geometry_kind"] not in ("point", "polygon", "any"):
            raise TaxonomyError(f"Crosswalk line {line}: unknown geometry kind {row['geometry_kind']!r}")
        code = _parse_code(row["lbcs"], line, "Crosswalk")
        if code not in t:
            raise TaxonomyError(f"Crosswalk line {line}: code {code} is not in the taxonomy")
        try:
            crosswalk_row = CrosswalkRow(
                source=row["source"], geometry_kind=row["geometry_kind"], key=row["key"], value=row["value"], lbcs=code
            )
        except ValueError as e:
            raise TaxonomyError(f"Crosswalk line {line}: {e}") from e
        try:
            table.add(crosswalk_row)
        except TaxonomyError as e:
            raise TaxonomyError(f"Crosswalk line {line}: {e}") from e
        added += 1

    logger.info(f"Loaded {added} crosswalk rows")
    return table


def load_crosswalks(streams: list[IO], t: LbcsTaxonomy) -> CrosswalkTable:
    """One table from several crosswalk files; keys must stay unique across files."""
    table = CrosswalkTable()
    for stream in streams:
        load_crosswalk(stream, t, into=table)
    logger.debug(f"Crosswalk sources: {', '.join(table.sources())}")
    return table


def load_authoritative_crosswalk(stream: IO, t: LbcsTaxonomy) -> AuthoritativeCrosswalk:
    """
    Load `lbcs,datasf` rows.

    Raises:
        TaxonomyError: a code outside the taxonomy, a duplicate code or an unknown DataSF class.
    """
    mapping: dict[LbcsCode, str] = {}
    for line, row in _read_rows(stream, ("lbcs", "datasf"), "Authoritative crosswalk"):
        code = _parse_code(row["lbcs"], line, "Authoritative crosswalk")
        if code not in t:
            raise TaxonomyError(f"Authoritative crosswalk line {line}: code {code} is not in the taxonomy")
        if code in mapping:
            raise TaxonomyError(f"Authoritative crosswalk line {line}: duplicate code {code}")
        if row["datasf"] not in DATASF_CLASSES:
            raise TaxonomyError(f"Authoritative crosswalk line {line}: unknown DataSF class {row['datasf']!r}")
        mapping[code] = row["datasf"]

    logger.info(f"Loaded authoritative crosswalk: {len(mapping)} codes -> {len(set(mapping.values()))} classes")
    return AuthoritativeCrosswalk(mapping)


def resolve(t: LbcsTaxonomy, code: LbcsCode) -> tuple[int, list[LbcsCode]]:
    """
    Level and ancestors of a code, ancestors ordered from the parent up to the root.

    Raises:
        TaxonomyError: the code is not in the taxonomy.
    """
    ancestors = []
    parent = t.parent(code)
    while parent is not None:
        ancestors.append(parent)
        parent = t.parent(parent)
    return level_of(code), ancestors


def align(record: SourceRecord, x: CrosswalkTable) -> set[LbcsCode]:
    """Union of the codes every tag of the record maps to; empty when none match."""
    codes: set[LbcsCode] = set()
    for key, value in record.tags:
        codes |= x.lookup(record.source, record.geometry_kind, key, value)
    return codes


def to_authoritative(code: LbcsCode, a: AuthoritativeCrosswalk) -> Optional[str]:
    return a.get(code)


if __name__ == "__main__":
    from app.config import AUTHORITATIVE_CROSSWALK_PATH, CROSSWALK_PATHS, TAXONOMY_PATH

    with open(TAXONOMY_PATH, encoding="utf-8") as f:
        taxonomy = load_taxonomy(f)
    with open(CROSSWALK_PATHS[0], encoding="utf-8") as f:
        crosswalk = load_crosswalk(f, taxonomy)
    with open(AUTHORITATIVE_CROSSWALK_PATH, encoding="utf-8") as f:
        authoritative = load_authoritative_crosswalk(f, taxonomy)

    print("resolve(2110):", resolve(taxonomy, 2110))
    print("google lodging:", crosswalk.lookup("google", "point", "type", "lodging"))
    print("6500 ->", to_authoritative(6500, authoritative))
