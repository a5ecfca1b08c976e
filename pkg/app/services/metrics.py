"""
metrics.py

Agreement and accuracy measures over label tables.

- parcels_with_class: parcels labeled with a code or any of its descendants.
- pairwise_agreement: intersection over union of two sources' parcel sets for a class.
- kway_intersection: parcels every source labels with a class.
- agreement_table: per-class counts, every pairwise cell and the k-way count, for a list of sources.
- evaluate: per DataSF class precision and recall of one source against the footprints' authoritative classes.

Undefined ratios (zero denominators) are None; renderers print them as blank cells.

Dependencies:
- pydantic (result models)
- app.services.taxonomy (hierarchy, authoritative crosswalk)
"""

from itertools import combinations
from typing import Iterable, Optional

from pydantic import BaseModel, ConfigDict

from app.data.models import LabelTable, LbcsCode, ParcelFootprint
from app.services.taxonomy import AuthoritativeCrosswalk, LbcsTaxonomy, level_of, to_authoritative
from app.config import setup_logger

logger = setup_logger("metrics_service", indent=6)


class AgreementCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    code: LbcsCode
    sources: tuple[str, str]
    count_a: int
    count_b: int
    intersection: int
    union: int
    percent: Optional[float] = None


class AgreementRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    code: LbcsCode
    counts: dict[str, int]
    cells: list[AgreementCell]
    kway: int


class EvaluationRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    datasf_class: str
    truth_count: int
    labeled: int
    correct: int
    precision: Optional[float] = None
    recall: Optional[float] = None


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator > 0 else None


def parcels_with_class(table: LabelTable, code: LbcsCode, t: LbcsTaxonomy) -> set[str]:
    """Parcels holding `code` or a descendant of it. Raises TaxonomyError for unknown codes."""
    wanted = {code, *t.descendants(code)}
    return {parcel_id for parcel_id, codes in table.labels.items() if codes & wanted}


def _cell(a: LabelTable, b: LabelTable, code: LbcsCode, set_a: set[str], set_b: set[str]) -> AgreementCell:
    intersection = len(set_a & set_b)
    union = len(set_a | set_b)
    return AgreementCell(
        code=code,
        sources=(a.source, b.source),
        count_a=len(set_a),
        count_b=len(set_b),
        intersection=intersection,
        union=union,
        percent=_ratio(intersection, union),
    )


def pairwise_agreement(a: LabelTable, b: LabelTable, code: LbcsCode, t: LbcsTaxonomy) -> AgreementCell:
    return _cell(a, b, code, parcels_with_class(a, code, t), parcels_with_class(b, code, t))


def kway_intersection(tables: list[LabelTable], code: LbcsCode, t: LbcsTaxonomy) -> int:
    if len(tables) < 2:
        raise ValueError(f"k-way intersection needs at least two tables, got {len(tables)}")
    common = parcels_with_class(tables[0], code, t)
    for table in tables[1:]:
        common &= parcels_with_class(table, code, t)
    return len(common)


def agreement_table(tables: list[LabelTable], classes: list[LbcsCode], t: LbcsTaxonomy) -> list[AgreementRow]:
    """One row per class: per-source counts, pairwise cells in combination order, k-way count."""
    if len(tables) < 2:
        raise ValueError(f"agreement needs at least two sources, got {len(tables)}")
    rows = []
    for code in classes:
        parcel_sets = [parcels_with_class(table, code, t) for table in tables]
        cells = [
            _cell(tables[i], tables[j], code, parcel_sets[i], parcel_sets[j])
            for i, j in combinations(range(len(tables)), 2)
        ]
        rows.append(AgreementRow(
            code=code,
            counts={table.source: len(parcels) for table, parcels in zip(tables, parcel_sets)},
            cells=cells,
            kway=kway_intersection(tables, code, t),
        ))
    logger.info(f"Agreement over {len(classes)} classes for {', '.join(table.source for table in tables)}")
    return rows


def authoritative_classes(codes: Iterable[LbcsCode], a: AuthoritativeCrosswalk, t: LbcsTaxonomy) -> set[str]:
    """
    DataSF classes a parcel's held codes map to.

    A level-3 code without its own mapping takes its level-2 parent's class.
    Level-1 codes are never spread down to mapped children.
    """
    classes = set()
    for code in codes:
        mapped = to_authoritative(code, a)
        if mapped is None and level_of(code) == 3:
            parent = t.parent(code)
            mapped = to_authoritative(parent, a) if parent is not None else None
        if mapped is not None:
            classes.add(mapped)
    return classes


def evaluate(
        table: LabelTable,
        truth: Iterable[ParcelFootprint],
        a: AuthoritativeCrosswalk,
        t: LbcsTaxonomy
        ) -> list[EvaluationRow]:
    """
    Precision and recall of one source per DataSF class in the crosswalk's range.

    A parcel counts as labeled D when any of its codes maps to D, and as correct
    when its authoritative class is also D. A parcel can be labeled with several
    classes and is judged for each independently.
    """
    truth_by_class: dict[str, set[str]] = {}
    for footprint in truth:
        if footprint.authoritative_class is not None:
            truth_by_class.setdefault(footprint.authoritative_class, set()).add(footprint.parcel_id)

    labeled_by_class: dict[str, set[str]] = {}
    for parcel_id, codes in table.labels.items():
        for datasf_class in authoritative_classes(codes, a, t):
            labeled_by_class.setdefault(datasf_class, set()).add(parcel_id)

    rows = []
    for datasf_class in a.classes:
        labeled = labeled_by_class.get(datasf_class, set())
        actual = truth_by_class.get(datasf_class, set())
        correct = len(labeled & actual)
        rows.append(EvaluationRow(
            datasf_class=datasf_class,
            truth_count=len(actual),
            labeled=len(labeled),
            correct=correct,
            precision=_ratio(correct, len(labeled)),
            recall=_ratio(correct, len(actual)),
        ))
    logger.info(f"Evaluated {table.source} over {len(rows)} authoritative classes")
    return rows
