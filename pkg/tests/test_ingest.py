import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA, CHECKIN_LINE, CHECKIN_TEXT, PURCHASES
from oracles import haversine_cosines
from rpclust.errors import EmptyGazetteer, MalformedRecord
from rpclust.ingest import (
    NO_ITEM,
    NO_PLACE,
    ExtractionRule,
    Gazetteer,
    PurchaseRecord,
    RawRecord,
    extract_item,
    extract_place,
    haversine_km,
    load_rules,
    parse_record,
    read_records,
    reverse_geocode,
    split_category,
    to_pairs,
)

TOKYO = Gazetteer.from_csv(DATA / "gazetteer_tokyo.csv")
PURCHASES_GZ = Gazetteer.from_csv(DATA / "gazetteer_purchases.csv")


def test_parse_checkin_record():
    rec = parse_record(CHECKIN_LINE)
    assert rec.timestamp == "Tue, 22 Dec 2012"
    assert rec.user_id == "twitter_User_ID"
    assert rec.text == CHECKIN_TEXT
    assert (rec.latitude, rec.longitude) == (35.628227, 139.738712)


def test_parse_other_layouts():
    five = parse_record(["t", "u", "text", "1.5", "-2"])
    assert (five.latitude, five.longitude) == (1.5, -2.0)
    js = parse_record('{"timestamp": "t", "user_id": "u", "text": "x", "coordinates": [1, 2]}')
    assert (js.latitude, js.longitude) == (1.0, 2.0)
    mapping = parse_record({"timestamp": "t", "user_id": "u", "text": "x", "latitude": 3, "longitude": 4})
    assert mapping.latitude == 3.0


@pytest.mark.parametrize(
    "line, field",
    [
        ('"Tue, 22 Dec 2012",uid,"I bought x"', "latitude"),
        ('"Tue",uid,"I bought x","[95, 10]"', "latitude"),
        ('"Tue",uid,"I bought x","[5, 190]"', "longitude"),
        ('"Tue",uid,"I bought x","[north, 10]"', "latitude"),
        ('"Tue",,"I bought x","[5, 10]"', "user_id"),
        ("{not json", "json"),
        ("only,two", "fields"),
    ],
)
def test_malformed(line, field):
    with pytest.raises(MalformedRecord) as info:
        parse_record(line)
    assert field in info.value.problems


def test_read_records_collects_errors(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text(CHECKIN_LINE + '\n"Tue",uid,"I bought x","[95, 10]"\n', encoding="utf-8")
    records, errors = read_records(path)
    assert len(records) == 1 and len(errors) == 1
    assert errors[0].line == 2
    jsonl, errs = read_records(DATA / "checkin_plus_placeless.jsonl")
    assert len(jsonl) == 2 and not errs


def test_extract_place():
    assert extract_place(CHECKIN_TEXT) == "Department store"
    assert extract_place("no venue here") is None
    assert extract_place("(@ Supermarket)") == "Supermarket"
    assert extract_place("Lunch (@ Cafe Blue w/ 3 others)") == "Cafe Blue"


def test_extract_item():
    assert extract_item(CHECKIN_TEXT) == "clothes"
    assert extract_item("I walked home") is None
    assert extract_item("I bought a hair dryer at the shop") == "hair dryer"
    assert extract_item("Finally got my new Desk!") == "Desk"
    # "buyer" is not the verb "buy"
    assert extract_item("the buyer left") is None


def test_custom_rules(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text("# comment\nordered -> ^\\s*(\\w+)  # capture runs on the text after the verb\n", encoding="utf-8")
    rules = load_rules(path)
    assert len(rules) == 1
    assert extract_item("I ordered pizza tonight", rules) == "pizza"
    assert extract_item("I bought pizza", rules) is None
    assert extract_item("ordered pizza tonight", (ExtractionRule.from_line("ordered"),)) == "pizza tonight"
    with pytest.raises(ValueError):
        extract_item("x", ())


def test_haversine_against_cosine_law():
    lat, lon = 35.628227, 139.738712
    for name, clat, clon in TOKYO.entries:
        assert haversine_km(lat, lon, clat, clon) == pytest.approx(haversine_cosines(lat, lon, clat, clon), rel=1e-9)
    # one degree of latitude on the mean sphere
    assert haversine_km(0, 0, 1, 0) == pytest.approx(6371.0088 * math.pi / 180, rel=1e-12)


def test_reverse_geocode_checkin():
    name, km = reverse_geocode(35.628227, 139.738712, TOKYO)
    # Shinagawa is about 2.3 km away, Shinjuku about 7.4 km
    assert name == "Shinagawa-ku"
    assert km == pytest.approx(haversine_cosines(35.628227, 139.738712, 35.6092, 139.7302), rel=1e-9)
    assert km < haversine_km(35.628227, 139.738712, 35.6938, 139.7036)


def test_reverse_geocode_exact_and_tie():
    assert reverse_geocode(35.6938, 139.7036, TOKYO) == ("Shinjuku-ku", 0.0)
    gz = Gazetteer((("b", 0.0, 1.0), ("a", 0.0, -1.0)))
    assert reverse_geocode(0.0, 0.0, gz)[0] == "a"
    with pytest.raises(EmptyGazetteer):
        reverse_geocode(0, 0, Gazetteer(()))


def test_gazetteer_validation():
    with pytest.raises(ValueError):
        Gazetteer((("a", 0.0, 0.0), ("a", 1.0, 1.0)))
    with pytest.raises(ValueError):
        Gazetteer((("a", 91.0, 0.0),))


coords = st.tuples(st.floats(-89, 89), st.floats(-179, 179))


@settings(max_examples=100)
@given(st.lists(coords, min_size=1, max_size=8, unique=True), coords, st.randoms(use_true_random=False))
def test_reverse_geocode_order_invariant(points, query, rnd):
    entries = [(f"c{i}", lat, lon) for i, (lat, lon) in enumerate(points)]
    shuffled = list(entries)
    rnd.shuffle(shuffled)
    assert reverse_geocode(*query, Gazetteer(tuple(entries))) == reverse_geocode(*query, Gazetteer(tuple(shuffled)))


def test_to_pairs_checkin():
    pairs, review = to_pairs([parse_record(CHECKIN_LINE)], TOKYO)
    assert pairs == [("clothes _ Department store", "Shinagawa-ku")]
    assert review == []


def test_to_pairs_purchase_fixture():
    records, errors = read_records(DATA / "purchase_records.csv")
    assert not errors and len(records) == 7
    pairs, review = to_pairs(records, PURCHASES_GZ)
    assert pairs == PURCHASES
    assert review == []


def test_review_queue_reasons():
    recs = [
        RawRecord("t", "u", "I bought a scarf today", 0, 0),
        RawRecord("t", "u", "Lunch (@ Cafe)", 0, 0),
        RawRecord("t", "u", "nothing at all", 0, 0),
    ]
    pairs, review = to_pairs(recs, TOKYO)
    assert pairs == []
    assert [r.reasons for r in review] == [(NO_PLACE,), (NO_ITEM,), (NO_ITEM, NO_PLACE)]
    assert [r.index for r in review] == [0, 1, 2]


texts = st.lists(st.sampled_from(list("abc @()w/!.") + ["bought ", "the ", " at "]), max_size=15).map("".join)


@settings(max_examples=100)
@given(st.lists(texts, max_size=10))
def test_to_pairs_conserves_records(ts):
    recs = [RawRecord("t", "u", t, 35.6, 139.7) for t in ts]
    pairs, review = to_pairs(recs, TOKYO)
    assert len(pairs) + len(review) == len(recs)
    assert to_pairs(recs, TOKYO) == (pairs, review)


def test_category_roundtrip():
    rec = PurchaseRecord("Cake", "Department store", "x")
    assert rec.category == "Cake _ Department store"
    assert split_category(rec.category) == ("Cake", "Department store")
    assert split_category("plain") == ("plain", "")
