import io

import pytest

from app.data.models import SourceRecord
from app.services.geometry import make_point, square
from app.services.taxonomy import (
    TaxonomyError,
    align,
    load_authoritative_crosswalk,
    load_crosswalk,
    load_taxonomy,
    normalize_value,
    resolve,
    to_authoritative,
)
from tests.conftest import osm_node, poi


def point(source: str, *tags) -> SourceRecord:
    return SourceRecord(source=source, record_id="r", geometry=make_point(0, 0), geometry_kind="point", tags=tuple(tags))


def area(source: str, *tags) -> SourceRecord:
    return SourceRecord(source=source, record_id="r", geometry=square(0, 0, 1, 1), geometry_kind="polygon", tags=tuple(tags))


def test_shipped_taxonomy_level_counts(taxonomy):
    assert taxonomy.level_counts() == {1: 5, 2: 22, 3: 6}
    assert [c for c in taxonomy.codes if c % 1000 == 0] == [1000, 2000, 4000, 5000, 6000]


def test_parents_are_derived_from_codes():
    t = load_taxonomy(io.StringIO("code,name\n1000,Residence\n1100,Household\n1300,Hotels\n"))
    assert t.parent(1100) == 1000
    assert t.parent(1300) == 1000
    assert t.parent(1000) is None
    assert t.children(1000) == [1100, 1300]


def test_missing_parent_is_fatal():
    with pytest.raises(TaxonomyError, match="missing parent 2100"):
        load_taxonomy(io.StringIO("code,name\n2000,Sales\n2110,Automobile sales\n"))


@pytest.mark.parametrize("raw", ["21A0", "211", "21100", "2111", "0100"])
def test_invalid_code_is_fatal_with_line(raw):
    with pytest.raises(TaxonomyError, match="line 3"):
        load_taxonomy(io.StringIO(f"# comment\ncode,name\n{raw},Bad\n"))


def test_duplicate_taxonomy_code_is_fatal():
    with pytest.raises(TaxonomyError, match="duplicate code 1000"):
        load_taxonomy(io.StringIO("code,name\n1000,a\n1000,b\n"))


@pytest.mark.parametrize(
    "code, level, ancestors",
    [(2110, 3, [2100, 2000]), (1000, 1, []), (6600, 2, [6000])],
)
def test_resolve(taxonomy, code, level, ancestors):
    assert resolve(taxonomy, code) == (level, ancestors)


def test_resolve_unknown_code_names_it(taxonomy):
    with pytest.raises(TaxonomyError, match="9900"):
        resolve(taxonomy, 9900)


def test_descendants(taxonomy):
    assert set(taxonomy.descendants(2100)) == {2110, 2120, 2130, 2140, 2150, 2160}
    assert 2110 in taxonomy.descendants(2000)
    assert taxonomy.descendants(2110) == []


def test_normalize_value():
    assert normalize_value("  Fast_Food ") == "fast food"
    assert normalize_value("night   club") == "night club"


@pytest.mark.parametrize(
    "record, expected",
    [
        (poi("g", 0, 0, "lodging"), {1300}),
        (osm_node("n", 0, 0, ("amenity", "library")), {4200}),
        (area("osm", ("building", "hotel"), ("amenity", "restaurant")), {1300, 2500}),
        (poi("y", 0, 0, "Night Club", source="yellowpages"), {2500}),
        (poi("y", 0, 0, "night_club", source="yellowpages"), {2500}),
        (poi("g", 0, 0, "heliport"), set()),
        (poi("b", 0, 0, "lodging", source="bing"), set()),
    ],
)
def test_align(crosswalk, record, expected):
    assert align(record, crosswalk) == expected


def test_align_respects_geometry_kind(crosswalk):
    assert align(point("osm", ("amenity", "pharmacy")), crosswalk) == set()
    assert align(area("osm", ("amenity", "pharmacy")), crosswalk) == {2100}


def test_align_is_monotone_in_tags(crosswalk):
    tags = [("amenity", "bank"), ("building", "school"), ("shop", "bakery"), ("landuse", "recreation")]
    previous: set[int] = set()
    for i in range(1, len(tags) + 1):
        codes = align(point("osm", *tags[:i]), crosswalk)
        assert previous <= codes
        previous = codes
    assert previous == {2200, 6100, 5000}


@pytest.mark.parametrize(
    "source, kind, key, value, code",
    [
        ("google", "point", "type", "lodging", 1300),
        ("google", "point", "type", "car_dealer", 2110),
        ("google", "point", "type", "pharmacy", 2160),
        ("google", "point", "type", "restaurant", 2500),
        ("google", "point", "type", "church", 6600),
        ("yellowpages", "point", "type", "funeral home", 6700),
        ("bing", "point", "type", "Hotel", 1300),
        ("bing", "point", "type", "Home Improvement & Hardware Store", 2120),
        ("bing", "point", "type", "Police Station", 6400),
        ("osm", "polygon", "building", "hotel", 1300),
        ("osm", "point", "amenity", "library", 4200),
        ("osm", "point", "landuse", "recreation", 5000),
        ("osm", "polygon", "landuse", "recreation", 5000),
        ("osm", "point", "building", "school", 6100),
        ("osm", "polygon", "amenity", "studio", 4200),
        ("osm", "point", "building", "commercial", 2000),
    ],
)
def test_shipped_crosswalk_rows(crosswalk, source, kind, key, value, code):
    assert crosswalk.lookup(source, kind, key, value) == {code}


def test_shipped_authoritative_map_is_exact(authoritative):
    assert authoritative.mapping == {
        6100: "CIE", 6600: "CIE",
        2100: "RETAIL/ENT", 5200: "RETAIL/ENT", 5300: "RETAIL/ENT",
        1300: "VISITOR",
        6500: "MED",
        6200: "MIPS", 6300: "MIPS",
        1100: "RESIDENT",
    }
    assert authoritative.classes == ["CIE", "RETAIL/ENT", "VISITOR", "MED", "MIPS", "RESIDENT"]


@pytest.mark.parametrize("code, expected", [(6500, "MED"), (2500, None), (1100, "RESIDENT"), (2000, None)])
def test_to_authoritative(authoritative, code, expected):
    assert to_authoritative(code, authoritative) == expected


def test_crosswalk_code_outside_taxonomy_is_fatal(taxonomy):
    with pytest.raises(TaxonomyError, match="9100"):
        load_crosswalk(io.StringIO("source,geometry_kind,key,value,lbcs\ngoogle,point,type,x,9100\n"), taxonomy)


def test_crosswalk_duplicate_normalized_key_is_fatal(taxonomy):
    text = "source,geometry_kind,key,value,lbcs\nosm,point,amenity,fast_food,2500\nosm,point,amenity,Fast Food,2500\n"
    with pytest.raises(TaxonomyError, match="line 3"):
        load_crosswalk(io.StringIO(text), taxonomy)


def test_any_kind_rows_match_points_and_polygons(taxonomy):
    x = load_crosswalk(io.StringIO("source,geometry_kind,key,value,lbcs\nosm,any,shop,bakery,2150\n"), taxonomy)
    assert align(point("osm", ("shop", "bakery")), x) == {2150}
    assert align(area("osm", ("shop", "bakery")), x) == {2150}


def test_authoritative_crosswalk_rejects_unknown_class(taxonomy):
    with pytest.raises(TaxonomyError, match="PARKS"):
        load_authoritative_crosswalk(io.StringIO("lbcs,datasf\n5300,PARKS\n"), taxonomy)
