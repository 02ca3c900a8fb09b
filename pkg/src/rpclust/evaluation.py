"""Reference partitions, node-count sweeps and the mean-difference test."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc

from .cluster import ClusterConfig, Partition, dense_labels, responsiveness_pair_cluster
from .errors import DegenerateVariance, TooFewRecords
from .ingest import PurchaseRecord
from .modularity import Measure, graph_from_pairs, greedy_optimize

RN = "rn"
RPC = "rpc"
QH = "qh"
DEFAULT_METHODS = (RN, RPC, QH)


def rn_partition(records: Sequence[PurchaseRecord]) -> Partition:
    """Rule-based reference communities over purchase records.

    Rules apply in order, each only to records no earlier rule captured:
    same item and place, then same item, then same place. A rule captures
    a record only when another remaining record shares its key. Whatever
    is left becomes a singleton.
    """
    if not records:
        raise TooFewRecords("no records")
    community: dict[int, tuple] = {}
    remaining = list(range(len(records)))
    rules: list[Callable[[PurchaseRecord], object]] = [
        lambda r: (r.item, r.place),
        lambda r: r.item,
        lambda r: r.place,
    ]
    for rule_no, key_fn in enumerate(rules, start=1):
        buckets: dict[object, list[int]] = {}
        for idx in remaining:
            buckets.setdefault(key_fn(records[idx]), []).append(idx)
        leftover = []
        for key, members in buckets.items():
            if len(members) >= 2:
                for idx in members:
                    community[idx] = (rule_no, key)
            else:
                leftover.extend(members)
        remaining = sorted(leftover)
    for idx in remaining:
        community[idx] = (4, idx)
    return Partition(dense_labels(community[i] for i in range(len(records))))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: float
    variant: str


def mean_difference_test(a: Sequence[float], b: Sequence[float], variant: str = "welch") -> TTestResult:
    """Two-sided two-sample t-test on the difference of means.

    ``variant`` is ``"welch"`` (unequal variances) or ``"student"``
    (pooled variance).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each series needs at least two values")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if variant == "welch":
        qa, qb = va / na, vb / nb
        se2 = qa + qb
        df = se2 ** 2 / (qa ** 2 / (na - 1) + qb ** 2 / (nb - 1)) if se2 > 0 else float(na + nb - 2)
    elif variant == "student":
        df = float(na + nb - 2)
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = pooled * (1 / na + 1 / nb)
    else:
        raise ValueError(f"unknown t-test variant {variant!r}; use 'welch' or 'student'")
    diff = ma - mb
    if se2 == 0:
        if diff == 0:
            raise DegenerateVariance("both series are constant and equal")
        return TTestResult(math.copysign(math.inf, diff), 0.0, df, variant)
    t = diff / math.sqrt(se2)
    p = float(betainc(df / 2, 0.5, df / (df + t * t)))
    return TTestResult(float(t), min(1.0, max(0.0, p)), float(df), variant)


@dataclass
class EvalReport:
    node_counts: list[int]
    counts: dict[str, list[int]]
    t_statistic: float | None = None
    p_value: float | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "node_counts": self.node_counts,
            "counts": self.counts,
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_count", "method", "community_count"])
        for method, series in self.counts.items():
            for n, c in zip(self.node_counts, series):
                w.writerow([n, method, c])
        return buf.getvalue()

    def mean_abs_gap(self, method: str, reference: str = RN) -> float:
        ref = np.asarray(self.counts[reference], dtype=float)
        return float(np.abs(np.asarray(self.counts[method], dtype=float) - ref).mean())


def community_count(method: str, records: Sequence[PurchaseRecord], config: ClusterConfig = ClusterConfig()) -> int:
    if method == RN:
        return rn_partition(records).n_communities
    pairs = [(r.category, r.city) for r in records]
    if method == RPC:
        return responsiveness_pair_cluster(pairs, config).partition.n_communities
    measure = Measure.parse(method)
    return greedy_optimize(graph_from_pairs(pairs), measure).n_communities


def node_sweep(
    records: Sequence[PurchaseRecord],
    step: int = 100,
    methods: Sequence[str] = DEFAULT_METHODS,
    config: ClusterConfig = ClusterConfig(),
    compare: tuple[str, str] = (RPC, QH),
    variant: str = "welch",
) -> EvalReport:
    """Community counts on growing prefixes of ``records``.

    Prefixes of ``step``, ``2 * step``, ... records are taken in input
    order. The two methods named in ``compare`` are t-tested when the
    sweep has at least two points.
    """
    if step < 1:
        raise ValueError("step must be positive")
    if len(records) < step:
        raise TooFewRecords(f"{len(records)} records is fewer than one step of {step}")
    node_counts = list(range(step, len(records) + 1, step))
    counts = {m: [community_count(m, records[:n], config) for n in node_counts] for m in methods}
    report = EvalReport(
        node_counts,
        counts,
        metadata={
            "t_test": variant,
            "compare": list(compare),
            "linkage": config.method.value,
            "cut": repr(config.criterion),
            "dims": config.dims if config.dims is not None else "all",
            "greedy": "agglomerative, best single merge per step",
        },
    )
    a, b = compare
    if len(node_counts) >= 2 and a in counts and b in counts:
        try:
            res = mean_difference_test(counts[a], counts[b], variant)
            report.t_statistic, report.p_value = res.t, res.p
            report.metadata["df"] = res.df
        except DegenerateVariance:
            report.t_statistic, report.p_value = 0.0, 1.0
            report.metadata["note"] = "compared series constant and equal"
    return report


def synthetic_purchases(
    n_records: int = 700,
    seed: int = 0,
    n_items: int = 60,
    n_places: int = 15,
    n_cities: int = 300,
    n_regions: int = 100,
    locality: float = 0.9,
    zipf: float = 1.2,
) -> list[PurchaseRecord]:
    """Purchase records with regional taste and controlled duplication.

    Cities are split into regions. Each (item, place) category has a home
    region where it is bought with probability ``locality``; otherwise the
    city is uniform. Categories are drawn with Zipf-like weights, so
    popular ones repeat and rare ones keep appearing as the sample grows.
    The defaults give a sparse table (a few hundred municipalities for
    ~700 records), the regime of geotagged social posts.
    """
    rng = np.random.default_rng(seed)
    items = [f"item{i:03d}" for i in range(n_items)]
    places = [f"place{p:02d}" for p in range(n_places)]
    cities = [f"city{c:03d}" for c in range(n_cities)]
    city_region = np.arange(n_cities) % n_regions
    cats = [(i, p) for i in range(n_items) for p in range(n_places)]
    order = rng.permutation(len(cats))
    weights = 1.0 / np.arange(1, len(cats) + 1) ** zipf
    weights /= weights.sum()
    home = rng.integers(0, n_regions, len(cats))
    out = []
    for _ in range(n_records):
        c = order[rng.choice(len(cats), p=weights)]
        if rng.random() < locality:
            pool = np.flatnonzero(city_region == home[c])
        else:
            pool = np.arange(n_cities)
        city = cities[rng.choice(pool)]
        i, p = cats[c]
        out.append(PurchaseRecord(items[i], places[p], city))
    return out
