"""Turn tweet-like purchase records into (category, city) pairs.

Venue names come from the ``@ venue`` check-in suffix, purchased items from
a small verb/object ruleset, and cities from a nearest-centroid lookup in a
user-supplied gazetteer. Records that cannot be fully extracted go to a
review queue instead of being dropped.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import EmptyGazetteer, MalformedRecord

EARTH_RADIUS_KM = 6371.0088
CATEGORY_SEP = " _ "

NO_PLACE = "NO_PLACE"
NO_ITEM = "NO_ITEM"


@dataclass(frozen=True)
class RawRecord:
    timestamp: str
    user_id: str
    text: str
    latitude: float
    longitude: float


@dataclass(frozen=True)
class PurchaseRecord:
    item: str
    place: str
    city: str
    source: RawRecord | None = None

    @property
    def category(self) -> str:
        return f"{self.item}{CATEGORY_SEP}{self.place}"


@dataclass(frozen=True)
class ReviewItem:
    index: int
    record: RawRecord
    reasons: tuple[str, ...]


# -- record parsing --------------------------------------------------------

_COORD_PAIR = re.compile(r"^\s*\[?\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\]?\s*$")
_FIELDS = ("timestamp", "user_id", "text", "latitude", "longitude")


def _coerce(fields: Mapping, line) -> RawRecord:
    problems = {}
    for name in ("timestamp", "user_id", "text"):
        value = fields.get(name)
        if value is None or not str(value).strip():
            problems[name] = "missing"
    lat, lon = fields.get("latitude"), fields.get("longitude")
    coords = fields.get("coordinates")
    if (lat is None or lon is None) and coords is not None:
        if isinstance(coords, str):
            match = _COORD_PAIR.match(coords)
            if match:
                lat, lon = match.groups()
        elif isinstance(coords, Sequence) and len(coords) == 2:
            lat, lon = coords
    parsed = {}
    for name, value in (("latitude", lat), ("longitude", lon)):
        if value is None or (isinstance(value, str) and not value.strip()):
            problems[name] = "missing"
            continue
        try:
            parsed[name] = float(value)
        except (TypeError, ValueError):
            problems[name] = f"not a number: {value!r}"
            continue
        if not math.isfinite(parsed[name]):
            problems[name] = f"not finite: {value!r}"
    if "latitude" in parsed and "latitude" not in problems and not -90 <= parsed["latitude"] <= 90:
        problems["latitude"] = f"out of range [-90, 90]: {parsed['latitude']}"
    if "longitude" in parsed and "longitude" not in problems and not -180 <= parsed["longitude"] <= 180:
        problems["longitude"] = f"out of range [-180, 180]: {parsed['longitude']}"
    if problems:
        raise MalformedRecord(problems, line)
    return RawRecord(
        timestamp=str(fields["timestamp"]).strip(),
        user_id=str(fields["user_id"]).strip(),
        text=str(fields["text"]).strip(),
        latitude=parsed["latitude"],
        longitude=parsed["longitude"],
    )


def parse_record(line: str | Mapping | Sequence) -> RawRecord:
    """Parse one record carrying timestamp, user id, text and coordinates.

    Accepts a JSON object, a mapping, or a CSV row. CSV rows hold either
    four fields with a ``[lat, lon]`` coordinate cell or five fields with
    latitude and longitude split.
    """
    if isinstance(line, Mapping):
        return _coerce(line, line)
    if isinstance(line, str):
        stripped = line.strip()
        if stripped.startswith("{"):
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise MalformedRecord({"json": str(exc)}, line) from None
            return _coerce(obj, line)
        cells = next(csv.reader([stripped]), [])
    else:
        cells = list(line)
    cells = [c.strip() if isinstance(c, str) else c for c in cells]
    if len(cells) == 4:
        fields = dict(zip(("timestamp", "user_id", "text", "coordinates"), cells))
    elif len(cells) == 5:
        fields = dict(zip(_FIELDS, cells))
    elif len(cells) == 3:
        fields = dict(zip(("timestamp", "user_id", "text"), cells))
    else:
        raise MalformedRecord({"fields": f"expected 4 or 5 fields, got {len(cells)}"}, line)
    return _coerce(fields, line)


def read_records(path) -> tuple[list[RawRecord], list[MalformedRecord]]:
    """Read a JSON-lines or CSV record file; malformed lines are returned, not raised."""
    records, errors = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    if any(l.strip() for l in lines) and next(l for l in lines if l.strip()).lstrip().startswith("{"):
        rows: Iterable = (l for l in lines if l.strip())
    else:
        rows = (r for r in csv.reader(lines) if r and any(c.strip() for c in r))
    for lineno, row in enumerate(rows, start=1):
        if not isinstance(row, str) and lineno == 1 and row[0].strip().lower() == "timestamp":
            continue
        try:
            records.append(parse_record(row))
        except MalformedRecord as exc:
            exc.line = lineno
            errors.append(exc)
    return records, errors


# -- extraction ------------------------------------------------------------

_VENUE = re.compile(r"@\s*([^@()]*)")
_VENUE_TAIL = re.compile(r"\s+w/.*$", re.IGNORECASE)
_DECORATION = "*_-.,:;!?\"'` \t"


def extract_place(text: str) -> str | None:
    """Venue named after ``@`` in a check-in, without ``w/ others`` or decoration."""
    for match in _VENUE.finditer(text):
        venue = _VENUE_TAIL.sub("", match.group(1))
        venue = venue.strip(_DECORATION)
        if venue:
            return venue
    return None


DETERMINERS = frozenset(
    "a an the some my our his her their this that these those new two three".split()
)
STOP_WORDS = frozenset(
    "by at from in for with on to and or but via during when while because".split()
)
_PUNCT = ".,!?;:()[]{}@\"'"


@dataclass(frozen=True)
class ExtractionRule:
    verb: re.Pattern
    capture: re.Pattern | None = None

    @classmethod
    def from_line(cls, line: str) -> "ExtractionRule":
        verb, sep, capture = line.partition("->")
        verb = verb.strip()
        if not verb:
            raise ValueError(f"rule has no verb pattern: {line!r}")
        cap = re.compile(capture.strip(), re.IGNORECASE) if sep and capture.strip() else None
        return cls(re.compile(rf"\b(?:{verb})\b", re.IGNORECASE), cap)

    def apply(self, text: str) -> str | None:
        for match in self.verb.finditer(text):
            rest = text[match.end():]
            if self.capture is not None:
                got = self.capture.search(rest)
                item = got.group(1) if got and got.groups() else (got.group(0) if got else None)
                item = item.strip(_DECORATION) if item else None
            else:
                item = object_phrase(rest)
            if item:
                return item
        return None


DEFAULT_RULES = (ExtractionRule.from_line("bought|purchased|got|buy|buying|purchase"),)


def load_rules(path) -> tuple[ExtractionRule, ...]:
    """Read one ``verb-pattern [-> capture-pattern]`` rule per line; ``#`` starts a comment."""
    rules = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rules.append(ExtractionRule.from_line(line))
    if not rules:
        raise ValueError(f"no rules in {path}")
    return tuple(rules)


def object_phrase(rest: str) -> str | None:
    """Words after a verb, minus leading determiners, up to a preposition or punctuation."""
    words = []
    for token in rest.split():
        if token[0] in "(@":
            break
        bare = token.strip(_PUNCT)
        if not words and bare.lower() in DETERMINERS:
            continue
        if bare.lower() in STOP_WORDS or not bare:
            break
        words.append(bare)
        if token.rstrip() != token.rstrip(_PUNCT):
            break
    return " ".join(words) or None


def extract_item(text: str, rules: Sequence[ExtractionRule] = DEFAULT_RULES) -> str | None:
    if not rules:
        raise ValueError("extraction ruleset is empty")
    for rule in rules:
        item = rule.apply(text)
        if item:
            return item
    return None


# -- reverse geocoding -----------------------------------------------------


@dataclass(frozen=True)
class Gazetteer:
    entries: tuple[tuple[str, float, float], ...]

    def __post_init__(self):
        names = [e[0] for e in self.entries]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate gazetteer names: {dupes}")
        for name, lat, lon in self.entries:
            if not name:
                raise ValueError("gazetteer entry with empty name")
            if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                raise ValueError(f"invalid coordinates for {name!r}: ({lat}, {lon})")

    def __len__(self):
        return len(self.entries)

    def lookup(self, name: str) -> tuple[float, float] | None:
        for n, lat, lon in self.entries:
            if n == name:
                return lat, lon
        return None

    @classmethod
    def from_csv(cls, path) -> "Gazetteer":
        entries = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or not any(c.strip() for c in row):
                    continue
                if not entries and row[0].strip().lower() in ("name", "city"):
                    continue
                if len(row) < 3:
                    raise ValueError(f"gazetteer row needs name, lat, lon: {row!r}")
                entries.append((row[0].strip(), float(row[1]), float(row[2])))
        return cls(tuple(entries))


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def reverse_geocode(lat: float, lon: float, gz: Gazetteer) -> tuple[str, float]:
    """Nearest gazetteer city and its great-circle distance in km.

    Equidistant cities resolve to the lexicographically smallest name.
    """
    if not len(gz):
        raise EmptyGazetteer("gazetteer has no entries")
    best = min((haversine_km(lat, lon, clat, clon), name) for name, clat, clon in gz.entries)
    return best[1], best[0]


# -- batch -----------------------------------------------------------------


def extract_purchases(
    records: Sequence[RawRecord], gz: Gazetteer, rules: Sequence[ExtractionRule] = DEFAULT_RULES
) -> tuple[list[PurchaseRecord], list[ReviewItem]]:
    purchases, review = [], []
    for index, rec in enumerate(records):
        place = extract_place(rec.text)
        item = extract_item(rec.text, rules)
        reasons = tuple(r for r, ok in ((NO_ITEM, item), (NO_PLACE, place)) if not ok)
        if reasons:
            review.append(ReviewItem(index, rec, reasons))
            continue
        city, _ = reverse_geocode(rec.latitude, rec.longitude, gz)
        purchases.append(PurchaseRecord(item, place, city, rec))
    return purchases, review


def to_pairs(
    records: Sequence[RawRecord], gz: Gazetteer, rules: Sequence[ExtractionRule] = DEFAULT_RULES
) -> tuple[list[tuple[str, str]], list[ReviewItem]]:
    purchases, review = extract_purchases(records, gz, rules)
    return [(p.category, p.city) for p in purchases], review


def split_category(category: str) -> tuple[str, str]:
    """Inverse of ``PurchaseRecord.category``; splits on the last separator."""
    item, sep, place = category.rpartition(CATEGORY_SEP)
    if not sep:
        return category, ""
    return item, place


def write_review_csv(path, review: Sequence[ReviewItem]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "reasons", "timestamp", "user_id", "text", "latitude", "longitude"])
        for item in review:
            r = item.record
            w.writerow([item.index, ";".join(item.reasons), r.timestamp, r.user_id, r.text, r.latitude, r.longitude])
