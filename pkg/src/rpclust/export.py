"""GeoJSON overlay of city communities for map viewers."""
from __future__ import annotations

import json
from typing import Iterable

from .cluster import COL
from .errors import UnknownCity
from .ingest import Gazetteer

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
    "#8c6d31", "#843c39", "#7b4173", "#3182bd", "#e6550d", "#31a354",
)


def community_color(community: int) -> str:
    return PALETTE[community % len(PALETTE)]


def partition_geojson(rows: Iterable[tuple[str, str, int]], gz: Gazetteer) -> dict:
    """One Point feature per COL-tagged row of a partition table."""
    features, missing = [], []
    for label, tag, community in rows:
        if tag != COL:
            continue
        where = gz.lookup(label)
        if where is None:
            missing.append(label)
            continue
        lat, lon = where
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [lon, lat]},
            "properties": {"city": label, "community": community, "color": community_color(community)},
        })
    if missing:
        raise UnknownCity(missing)
    return {"type": "FeatureCollection", "features": features}


def dumps_geojson(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"
