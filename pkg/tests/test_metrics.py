import numpy as np
import pytest

from app.presentation.report import format_agreement_cell, format_percent, format_ratio
from app.services.metrics import (
    agreement_table,
    authoritative_classes,
    evaluate,
    kway_intersection,
    pairwise_agreement,
    parcels_with_class,
)
from app.services.taxonomy import TaxonomyError
from tests.conftest import label_table, parcel


def overlapping_tables(count_a: int, count_b: int, both: int, code: int = 1000):
    """Two tables whose parcel sets for `code` have the given sizes and overlap."""
    shared = [f"s{i}" for i in range(both)]
    only_a = [f"a{i}" for i in range(count_a - both)]
    only_b = [f"b{i}" for i in range(count_b - both)]
    a = label_table("google", {pid: {code} for pid in shared + only_a})
    b = label_table("bing", {pid: {code} for pid in shared + only_b})
    return a, b


def test_roll_up_to_ancestors(taxonomy):
    table = label_table("google", {"p1": {2110}})
    assert parcels_with_class(table, 2000, taxonomy) == {"p1"}
    assert parcels_with_class(table, 2100, taxonomy) == {"p1"}
    assert parcels_with_class(table, 2500, taxonomy) == set()


def test_roll_up_is_a_union(taxonomy):
    table = label_table("google", {"p1": {2100, 2500}, "p2": {2500}})
    assert parcels_with_class(table, 2000, taxonomy) == {"p1", "p2"}
    assert parcels_with_class(table, 2100, taxonomy) == {"p1"}


def test_unknown_class_is_an_error(taxonomy):
    with pytest.raises(TaxonomyError):
        parcels_with_class(label_table("google", {}), 9900, taxonomy)


def test_roll_up_matches_union_over_descendants(taxonomy):
    rng = np.random.default_rng(9)
    children = [2100, 2110, 2150, 2200, 2500, 2600]
    labels = {f"p{i}": set(rng.choice(children, size=rng.integers(1, 4), replace=False).tolist()) for i in range(200)}
    table = label_table("google", labels)

    rolled = parcels_with_class(table, 2000, taxonomy)
    expected = {pid for pid, codes in labels.items() if codes & {2000, *taxonomy.descendants(2000)}}
    assert rolled == expected
    assert sum(len(parcels_with_class(table, c, taxonomy)) for c in taxonomy.children(2000)) > len(rolled)
    for child in taxonomy.children(2000):
        assert parcels_with_class(table, child, taxonomy) <= rolled


@pytest.mark.parametrize(
    "count_a, count_b, both, rendered",
    [
        (586, 167, 113, "17.66%"),
        (10481, 8661, 6323, "49.33%"),
        (34871, 397, 16, "0.05%"),
        (586, 34871, 28, "0.08%"),
        (167, 34871, 7, "0.02%"),
        (9, 32, 3, "7.89%"),
        (397, 53, 7, "1.58%"),
    ],
)
def test_pairwise_agreement_reproduces_published_cells(taxonomy, count_a, count_b, both, rendered):
    a, b = overlapping_tables(count_a, count_b, both)
    cell = pairwise_agreement(a, b, 1000, taxonomy)
    assert (cell.count_a, cell.count_b, cell.intersection) == (count_a, count_b, both)
    assert cell.union == count_a + count_b - both
    assert format_percent(cell.intersection, cell.union) == rendered
    assert format_agreement_cell(cell.intersection, cell.union) == f"{both} ({rendered})"


def test_agreement_with_itself_is_complete(taxonomy):
    a = label_table("google", {"p1": {2500}, "p2": {2200}})
    cell = pairwise_agreement(a, a, 2000, taxonomy)
    assert cell.percent == 1.0
    assert format_percent(cell.intersection, cell.union) == "100.00%"


def test_agreement_is_symmetric(taxonomy):
    a, b = overlapping_tables(20, 30, 7)
    assert pairwise_agreement(a, b, 1000, taxonomy).percent == pairwise_agreement(b, a, 1000, taxonomy).percent


def test_empty_union_is_undefined(taxonomy):
    cell = pairwise_agreement(label_table("osm", {}), label_table("bing", {}), 2110, taxonomy)
    assert cell.percent is None
    assert format_agreement_cell(cell.intersection, cell.union) == ""


def test_kway_intersection(taxonomy):
    tables = [label_table(s, {"p1": {2500}, "p2": {2500}, "p3": {2200}}) for s in ("google", "bing", "yellowpages")]
    assert kway_intersection(tables, 2500, taxonomy) == 2
    assert kway_intersection(tables + [label_table("osm", {})], 2500, taxonomy) == 0
    with pytest.raises(ValueError):
        kway_intersection(tables[:1], 2500, taxonomy)


def test_agreement_table_rows(taxonomy):
    rng = np.random.default_rng(12)
    sources = ["google", "bing", "osm", "yellowpages"]
    tables = [
        label_table(source, {f"p{i}": {2500} for i in range(100) if rng.random() < 0.6})
        for source in sources
    ]
    rows = agreement_table(tables, [2000, 2500, 6100], taxonomy)
    assert [row.code for row in rows] == [2000, 2500, 6100]

    row = rows[1]
    assert [cell.sources for cell in row.cells] == [
        ("google", "bing"), ("google", "osm"), ("google", "yellowpages"),
        ("bing", "osm"), ("bing", "yellowpages"), ("osm", "yellowpages"),
    ]
    brute = set.intersection(*(set(t.labels) for t in tables))
    assert row.kway == len(brute)
    assert row.kway <= min(cell.intersection for cell in row.cells)
    assert rows[2].kway == 0
    assert all(cell.percent is None for cell in rows[2].cells)


def test_agreement_needs_two_sources(taxonomy):
    with pytest.raises(ValueError):
        agreement_table([label_table("google", {})], [1000], taxonomy)


@pytest.mark.parametrize(
    "codes, expected",
    [
        ({6500}, {"MED"}),
        ({2110}, {"RETAIL/ENT"}),
        ({2000}, set()),
        ({2500}, set()),
        ({6100, 6500}, {"CIE", "MED"}),
        ({1000}, set()),
    ],
)
def test_authoritative_classes(authoritative, taxonomy, codes, expected):
    assert authoritative_classes(codes, authoritative, taxonomy) == expected


@pytest.mark.parametrize(
    "correct, labeled, truth, precision, recall",
    [
        (38, 68, 3701, "0.56", "0.01"),
        (47, 53, 508, "0.89", "0.09"),
        (28309, 34818, 179028, "0.81", "0.16"),
        (1, 12, 359, "0.08", "0.00"),
    ],
)
def test_published_precision_and_recall_render(correct, labeled, truth, precision, recall):
    assert format_ratio(correct, labeled) == precision
    assert format_ratio(correct, truth) == recall


def test_evaluate_counts_one_class(authoritative, taxonomy):
    truth = [parcel(f"t{i}", 0, 0, 1, 1, "CIE") for i in range(3701)]
    labels = {f"t{i}": {6100} for i in range(38)}
    labels.update({f"x{i}": {6600} for i in range(30)})
    rows = {row.datasf_class: row for row in evaluate(label_table("bing", labels), truth, authoritative, taxonomy)}

    cie = rows["CIE"]
    assert (cie.correct, cie.labeled, cie.truth_count) == (38, 68, 3701)
    assert format_ratio(cie.correct, cie.labeled) == "0.56"
    assert format_ratio(cie.correct, cie.truth_count) == "0.01"
    assert rows["MED"].precision is None


def test_evaluate_empty_table(authoritative, taxonomy):
    truth = [parcel("p1", 0, 0, 1, 1, "CIE"), parcel("p2", 0, 0, 1, 1, "MED")]
    rows = evaluate(label_table("osm", {}), truth, authoritative, taxonomy)
    assert [row.datasf_class for row in rows] == authoritative.classes
    for row in rows:
        assert row.labeled == 0
        assert row.precision is None
    by_class = {row.datasf_class: row for row in rows}
    assert by_class["CIE"].recall == 0.0
    assert by_class["VISITOR"].recall is None


def test_multi_class_parcel_is_judged_per_class(authoritative, taxonomy):
    truth = [parcel("p1", 0, 0, 1, 1, "CIE")]
    rows = {r.datasf_class: r for r in evaluate(label_table("google", {"p1": {6100, 6500}}), truth, authoritative, taxonomy)}
    assert (rows["CIE"].correct, rows["CIE"].labeled) == (1, 1)
    assert (rows["MED"].correct, rows["MED"].labeled) == (0, 1)
    assert rows["MED"].precision == 0.0


def test_labels_equal_to_truth_score_perfectly(authoritative, taxonomy):
    code_for = {"CIE": 6100, "RETAIL/ENT": 2100, "VISITOR": 1300, "MED": 6500, "MIPS": 6200, "RESIDENT": 1100}
    truth = [parcel(f"p{i}", 0, 0, 1, 1, cls) for i, cls in enumerate(list(code_for) * 3)]
    table = label_table("google", {f.parcel_id: {code_for[f.authoritative_class]} for f in truth})
    for row in evaluate(table, truth, authoritative, taxonomy):
        assert row.precision == 1.0
        assert row.recall == 1.0
