"""Agglomerative clustering of the joint row/column score cloud.

Cluster ids follow the usual convention: leaves are 0..n-1 and the cluster
created by merge t gets id n + t.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .correspondence import CaEmbedding, ca_embed
from .crosstab import build_crosstab
from .errors import BadK

ROW = "ROW"
COL = "COL"


class Linkage(str, Enum):
    NEAREST = "nearest"
    FURTHEST = "furthest"
    GROUP_AVERAGE = "group_average"
    WARD = "ward"

    @classmethod
    def parse(cls, value: "str | Linkage") -> "Linkage":
        if isinstance(value, Linkage):
            return value
        key = str(value).strip().lower().replace("-", "_")
        key = _LINKAGE_ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown linkage {value!r}; valid values: {valid}") from None


_LINKAGE_ALIASES = {
    "single": "nearest",
    "complete": "furthest",
    "average": "group_average",
    "upgma": "group_average",
}


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray = field(repr=False)
    part_tags: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or len(pts) != len(self.part_tags) or len(pts) != len(self.labels):
            raise ValueError("points, part_tags and labels must have matching lengths")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.values, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if (d < 0).any() or not np.allclose(d, d.T, rtol=0, atol=1e-12) or (np.diag(d) != 0).any():
            raise ValueError("distance matrix must be symmetric, non-negative, zero-diagonal")
        object.__setattr__(self, "values", d)

    def __len__(self):
        return len(self.values)


class Merge(NamedTuple):
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    merges: tuple[Merge, ...]
    n_leaves: int
    method: Linkage = Linkage.WARD
    labels: tuple[str, ...] = ()
    part_tags: tuple[str, ...] = ()

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges], dtype=float)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "n_leaves": self.n_leaves,
            "labels": list(self.labels),
            "part_tags": list(self.part_tags),
            "merges": [[m.left, m.right, m.height, m.size] for m in self.merges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Dendrogram":
        merges = tuple(Merge(int(a), int(b), float(h), int(s)) for a, b, h, s in data["merges"])
        return cls(
            merges=merges,
            n_leaves=int(data["n_leaves"]),
            method=Linkage.parse(data.get("method", "ward")),
            labels=tuple(data.get("labels", ())),
            part_tags=tuple(data.get("part_tags", ())),
        )

    def to_dot(self) -> str:
        return dendrogram_to_dot(self)


@dataclass(frozen=True)
class Partition:
    assignment: tuple[int, ...]
    labels: tuple[str, ...] = ()
    part_tags: tuple[str, ...] = ()

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment))

    def communities(self) -> list[list[int]]:
        groups: list[list[int]] = [[] for _ in range(self.n_communities)]
        for point, c in enumerate(self.assignment):
            groups[c].append(point)
        return groups

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "part_tag", "community"])
        for i, c in enumerate(self.assignment):
            label = self.labels[i] if self.labels else str(i)
            tag = self.part_tags[i] if self.part_tags else ""
            w.writerow([label, tag, c])
        return buf.getvalue()


def dense_labels(raw: Iterable) -> tuple[int, ...]:
    """Relabel arbitrary community keys to 0..c-1 in order of first appearance."""
    seen: dict = {}
    return tuple(seen.setdefault(x, len(seen)) for x in raw)


def joint_cloud(emb: CaEmbedding) -> PointCloud:
    points = np.vstack([emb.row_scores, emb.col_scores])
    tags = (ROW,) * len(emb.row_scores) + (COL,) * len(emb.col_scores)
    labels = tuple(emb.row_labels) + tuple(emb.col_labels)
    if len(labels) != len(points):
        labels = tuple(str(i) for i in range(len(points)))
    return PointCloud(points, tags, labels)


def pairwise_distances(cloud: PointCloud | np.ndarray) -> DistanceMatrix:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if len(pts) == 0:
        raise ValueError("point cloud is empty")
    diff = pts[:, None, :] - pts[None, :, :]
    return DistanceMatrix(np.sqrt((diff ** 2).sum(axis=-1)))


def linkage(dist: DistanceMatrix | np.ndarray, method: Linkage | str = Linkage.WARD) -> Dendrogram:
    """Agglomerate points using Lance-Williams updates.

    Ward works on half squared distances so that every merge height is the
    increase in within-cluster sum of squares. At equal inter-cluster
    distance the pair with the smallest cluster id (then second-smallest)
    merges first.
    """
    method = Linkage.parse(method)
    d = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, dtype=float)
    n = len(d)
    if n == 0:
        raise ValueError("no points to cluster")

    work = d ** 2 / 2.0 if method is Linkage.WARD else d.astype(float, copy=True)
    np.fill_diagonal(work, np.inf)
    slot_id = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    merges = []

    for step in range(n - 1):
        best = work.min()
        ii, jj = np.nonzero(work == best)
        keep = ii < jj
        ii, jj = ii[keep], jj[keep]
        a, b = slot_id[ii], slot_id[jj]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        pick = np.lexsort((hi, lo))[0]
        i, j = ii[pick], jj[pick]
        ni, nj = size[i], size[j]

        di, dj = work[i], work[j]
        if method is Linkage.NEAREST:
            new = np.minimum(di, dj)
        elif method is Linkage.FURTHEST:
            new = np.maximum(di, dj)
        elif method is Linkage.GROUP_AVERAGE:
            new = (ni * di + nj * dj) / (ni + nj)
        else:
            nk = size
            new = ((ni + nk) * di + (nj + nk) * dj - nk * best) / (ni + nj + nk)

        merges.append(Merge(int(lo[pick]), int(hi[pick]), float(best), int(ni + nj)))
        work[i, :] = new
        work[:, i] = new
        work[j, :] = np.inf
        work[:, j] = np.inf
        work[i, i] = np.inf
        slot_id[i] = n + step
        size[i] = ni + nj
        size[j] = 0

    return Dendrogram(tuple(merges), n, method)


@dataclass(frozen=True)
class KClusters:
    k: int


@dataclass(frozen=True)
class HeightCut:
    h: float


@dataclass(frozen=True)
class LargestGap:
    pass


CutCriterion = KClusters | HeightCut | LargestGap


def parse_criterion(text: str) -> CutCriterion:
    """Parse ``k=3``, ``height=0.5`` or ``gap`` into a cut criterion."""
    text = text.strip().lower()
    if text in ("gap", "largest_gap", "largest-gap"):
        return LargestGap()
    key, sep, value = text.partition("=")
    if sep:
        if key in ("k", "k_clusters", "clusters"):
            return KClusters(int(value))
        if key in ("h", "height"):
            return HeightCut(float(value))
    raise ValueError(f"unknown cut criterion {text!r}; use k=<int>, height=<float> or gap")


def _apply_merges(dendro: Dendrogram, chosen: Iterable[int]) -> tuple[int, ...]:
    n = dendro.n_leaves
    parent = list(range(2 * n - 1 if n else 0))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t in chosen:
        m = dendro.merges[t]
        new = n + t
        parent[find(m.left)] = new
        parent[find(m.right)] = new
    return dense_labels(find(leaf) for leaf in range(n))


def cut(dendro: Dendrogram, criterion: CutCriterion = LargestGap()) -> Partition:
    n = dendro.n_leaves
    n_merges = len(dendro.merges)
    if isinstance(criterion, KClusters):
        k = criterion.k
        if not 1 <= k <= n:
            raise BadK(f"k={k} outside [1, {n}]")
        chosen = range(n - k)
    elif isinstance(criterion, HeightCut):
        chosen = [t for t, m in enumerate(dendro.merges) if m.height <= criterion.h]
    elif isinstance(criterion, LargestGap):
        if n_merges <= 1:
            chosen = range(n_merges)
        else:
            gaps = np.diff(dendro.heights)
            chosen = range(int(np.argmax(gaps)) + 1)
    else:
        raise TypeError(f"unsupported cut criterion {criterion!r}")
    return Partition(_apply_merges(dendro, chosen), dendro.labels, dendro.part_tags)


@dataclass(frozen=True)
class ClusterConfig:
    dims: int | str | None = None
    method: Linkage = Linkage.WARD
    criterion: CutCriterion = LargestGap()


class ClusterResult(NamedTuple):
    dendrogram: Dendrogram
    partition: Partition
    embedding: CaEmbedding


def responsiveness_pair_cluster(
    pairs: Sequence[tuple[str, str]], config: ClusterConfig = ClusterConfig()
) -> ClusterResult:
    """Cluster both sides of a pair list in correspondence-analysis space."""
    ct = build_crosstab(pairs)
    emb = ca_embed(ct, config.dims)
    cloud = joint_cloud(emb)
    dendro = linkage(pairwise_distances(cloud), config.method)
    dendro = Dendrogram(dendro.merges, dendro.n_leaves, dendro.method, cloud.labels, cloud.part_tags)
    return ClusterResult(dendro, cut(dendro, config.criterion), emb)


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dendrogram_to_dot(dendro: Dendrogram) -> str:
    n = dendro.n_leaves
    lines = ["digraph dendrogram {", "  rankdir=BT;", "  node [fontsize=10];"]
    for leaf in range(n):
        label = dendro.labels[leaf] if dendro.labels else str(leaf)
        tag = dendro.part_tags[leaf] if dendro.part_tags else ""
        shape = "box" if tag == ROW else "ellipse"
        lines.append(f"  n{leaf} [label={_dot_quote(label)}, shape={shape}];")
    for t, m in enumerate(dendro.merges):
        node = n + t
        lines.append(f"  n{node} [label={_dot_quote(format(m.height, '.6g'))}, shape=point, xlabel={_dot_quote(format(m.height, '.6g'))}];")
        lines.append(f"  n{m.left} -> n{node};")
        lines.append(f"  n{m.right} -> n{node};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def read_partition_csv(path) -> list[tuple[str, str, int]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append((rec["label"], rec["part_tag"], int(rec["community"])))
    return rows
