"""Bipartite modularity baselines and a greedy agglomerative optimizer.

Three quality functions are provided:

* ``modularity_qb``: Barber's null-model modularity over the joint vertex
  set (row part first, column part after it).
* ``modularity_qm``: each row community is scored only against the column
  community it shares the most edges with.
* ``modularity_qh``: every (row community, column community) pair is scored,
  weighted by how strongly the pair corresponds. The weight is the edge
  fraction of the pair divided by the largest edge fraction of that row
  community, so the best-matching column community has weight 1.

Also here: the L1 "weakest pair" divisive partitioner over co-reference
ratio vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .cluster import COL, ROW, Partition, dense_labels
from .crosstab import check_link_restriction
from .errors import EmptyCommunity, EmptyInput, NotBipartite, UncoveredNode

QH_WEIGHT_CONVENTION = "a_ij = e_ij / max_k e_ik"

# Merges must improve the measure by more than this to be taken.
GREEDY_TOL = 1e-12


class Measure(str, Enum):
    QB = "qb"
    QM = "qm"
    QH = "qh"

    @classmethod
    def parse(cls, value) -> "Measure":
        if isinstance(value, Measure):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown measure {value!r}; valid values: {valid}") from None


@dataclass(frozen=True)
class BipartiteGraph:
    u_labels: tuple[str, ...]
    v_labels: tuple[str, ...]
    biadjacency: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.array(self.biadjacency, dtype=np.int64, copy=True)
        if b.shape != (len(self.u_labels), len(self.v_labels)):
            raise ValueError("biadjacency shape does not match labels")
        if (b < 0).any():
            raise ValueError("edge multiplicities must be non-negative")
        if b.sum() == 0:
            raise EmptyInput("graph has no edges")
        b.setflags(write=False)
        object.__setattr__(self, "biadjacency", b)

    @property
    def n_u(self) -> int:
        return len(self.u_labels)

    @property
    def n_v(self) -> int:
        return len(self.v_labels)

    @property
    def n_nodes(self) -> int:
        return self.n_u + self.n_v

    @property
    def m(self) -> int:
        return int(self.biadjacency.sum())

    @property
    def u_degrees(self) -> np.ndarray:
        return self.biadjacency.sum(axis=1)

    @property
    def v_degrees(self) -> np.ndarray:
        return self.biadjacency.sum(axis=0)

    @property
    def degrees(self) -> np.ndarray:
        return np.concatenate([self.u_degrees, self.v_degrees])

    @property
    def edges(self) -> list[tuple[int, int, int]]:
        """(u index, v index, multiplicity) for every linked pair."""
        uu, vv = np.nonzero(self.biadjacency)
        return [(int(u), int(v), int(self.biadjacency[u, v])) for u, v in zip(uu, vv)]

    def adjacency(self) -> np.ndarray:
        """Full (n_u + n_v) square adjacency with multiplicities."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int64)
        a[: self.n_u, self.n_u:] = self.biadjacency
        a[self.n_u:, : self.n_u] = self.biadjacency.T
        return a


def graph_from_pairs(pairs: Iterable[tuple[str, str]]) -> BipartiteGraph:
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("no pairs given")
    report = check_link_restriction(pairs)
    if report.violation:
        raise NotBipartite(report.offenders)
    us: dict[str, int] = {}
    vs: dict[str, int] = {}
    idx = [(us.setdefault(u, len(us)), vs.setdefault(v, len(vs))) for u, v in pairs]
    b = np.zeros((len(us), len(vs)), dtype=np.int64)
    arr = np.asarray(idx)
    np.add.at(b, (arr[:, 0], arr[:, 1]), 1)
    return BipartiteGraph(tuple(us), tuple(vs), b)


@dataclass(frozen=True)
class CommunityStructure:
    """Community ids over all nodes, row part first.

    When ``shared`` is false the row and column parts carry separate
    community sets and the ids are kept disjoint.
    """

    assignment: tuple[int, ...]
    n_u: int
    shared: bool = True
    measure: str = ""
    value: float = float("nan")
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def u_assignment(self) -> tuple[int, ...]:
        return self.assignment[: self.n_u]

    @property
    def v_assignment(self) -> tuple[int, ...]:
        return self.assignment[self.n_u:]

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment))

    def to_partition(self, g: BipartiteGraph) -> Partition:
        return Partition(
            dense_labels(self.assignment),
            g.u_labels + g.v_labels,
            (ROW,) * g.n_u + (COL,) * g.n_v,
        )

    def to_csv(self, g: BipartiteGraph) -> str:
        return self.to_partition(g).to_csv()


def two_sided(c_a: Sequence[int], c_b: Sequence[int], **kw) -> CommunityStructure:
    a = dense_labels(c_a)
    b = dense_labels(c_b)
    offset = len(set(a))
    return CommunityStructure(a + tuple(x + offset for x in b), len(a), shared=False, **kw)


def _check_cover(labels, n, what):
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise UncoveredNode(f"{what}: expected {n} community ids, got {labels.shape[0] if labels.ndim else 0}")
    return labels


def modularity_qb(g: BipartiteGraph, communities: Sequence[int] | CommunityStructure) -> float:
    """Barber bipartite modularity of a joint community assignment."""
    c = communities.assignment if isinstance(communities, CommunityStructure) else communities
    c = _check_cover(c, g.n_nodes, "joint assignment")
    cu, cv = c[: g.n_u], c[g.n_u:]
    m = g.m
    same = cu[:, None] == cv[None, :]
    resid = g.biadjacency - np.outer(g.u_degrees, g.v_degrees) / m
    # each cross pair appears twice in the symmetric double sum over 2m
    return float((resid * same).sum() / m)


def edge_fractions(g: BipartiteGraph, c_a: Sequence[int], c_b: Sequence[int]):
    """Fraction matrix e between row and column communities, and its marginals."""
    ca = np.asarray(dense_labels(_check_cover(c_a, g.n_u, "row communities").tolist()))
    cb = np.asarray(dense_labels(_check_cover(c_b, g.n_v, "column communities").tolist()))
    e = np.zeros((ca.max() + 1, cb.max() + 1))
    np.add.at(e, (ca[:, None], cb[None, :]), g.biadjacency)
    e /= g.m
    a_row, a_col = e.sum(axis=1), e.sum(axis=0)
    if (a_row == 0).any() or (a_col == 0).any():
        raise EmptyCommunity("a community has no incident edges")
    return e, a_row, a_col


def _qm_rows(e: np.ndarray, a_row: np.ndarray, a_col: np.ndarray) -> np.ndarray:
    j = np.argmax(e, axis=-1)  # first maximum, i.e. lowest index on ties
    best = np.take_along_axis(e, j[..., None], axis=-1)[..., 0]
    return best - a_row * a_col[j]


def _qh_rows(e: np.ndarray, a_row: np.ndarray, a_col: np.ndarray) -> np.ndarray:
    top = e.max(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(top > 0, e / top, 0.0)
    return (w * (e - a_row[..., None] * a_col)).sum(axis=-1)


_ROW_TERMS = {Measure.QM: _qm_rows, Measure.QH: _qh_rows}


def modularity_qm(g: BipartiteGraph, c_a: Sequence[int], c_b: Sequence[int]) -> float:
    e, a_row, a_col = edge_fractions(g, c_a, c_b)
    return float(_qm_rows(e, a_row, a_col).sum())


def modularity_qh(g: BipartiteGraph, c_a: Sequence[int], c_b: Sequence[int]) -> float:
    e, a_row, a_col = edge_fractions(g, c_a, c_b)
    return float(_qh_rows(e, a_row, a_col).sum())


def evaluate(g: BipartiteGraph, c: CommunityStructure, measure: Measure | str) -> float:
    measure = Measure.parse(measure)
    if measure is Measure.QB:
        return modularity_qb(g, c)
    fn = modularity_qm if measure is Measure.QM else modularity_qh
    return fn(g, c.u_assignment, c.v_assignment)


# -- greedy optimisation ---------------------------------------------------


def _best_pair(delta: np.ndarray):
    """Largest entry of the strict upper triangle, lowest (i, j) on ties."""
    n = len(delta)
    if n < 2:
        return None
    iu = np.triu_indices(n, 1)
    vals = delta[iu]
    k = int(np.argmax(vals))
    return float(vals[k]), int(iu[0][k]), int(iu[1][k])


def _greedy_qb(g: BipartiteGraph):
    m = g.m
    n = g.n_nodes
    # community x community: edge mass from row-part members to column-part members
    cross = np.zeros((n, n))
    cross[: g.n_u, g.n_u:] = g.biadjacency
    ku = np.concatenate([g.u_degrees, np.zeros(g.n_v)]).astype(float)
    kv = np.concatenate([np.zeros(g.n_u), g.v_degrees]).astype(float)
    members = [[i] for i in range(n)]
    while True:
        delta = (cross + cross.T - (np.outer(ku, kv) + np.outer(kv, ku)) / m) / m
        found = _best_pair(delta)
        if found is None or found[0] <= GREEDY_TOL:
            break
        _, i, j = found
        cross[i] += cross[j]
        cross[:, i] += cross[:, j]
        ku[i] += ku[j]
        kv[i] += kv[j]
        members[i].extend(members[j])
        cross = np.delete(np.delete(cross, j, 0), j, 1)
        ku, kv = np.delete(ku, j), np.delete(kv, j)
        del members[j]
    assign = np.empty(n, dtype=np.int64)
    for cid, group in enumerate(members):
        assign[group] = cid
    c = CommunityStructure(dense_labels(assign.tolist()), g.n_u, shared=True, measure=Measure.QB.value)
    return c


# rows of the (chunk, rows, cols) scratch tensors used for pairwise scoring
_CHUNK_CELLS = 4_000_000


def _row_merge_deltas(e: np.ndarray, a_row: np.ndarray, a_col: np.ndarray, rows_fn) -> np.ndarray:
    """Change in the measure for merging every pair of row communities."""
    r, c = e.shape
    base = rows_fn(e, a_row, a_col)
    out = np.empty((r, r))
    step = max(1, _CHUNK_CELLS // max(1, r * c))
    for lo in range(0, r, step):
        hi = min(r, lo + step)
        merged = e[lo:hi, None, :] + e[None, :, :]
        terms = rows_fn(merged, a_row[lo:hi, None] + a_row[None, :], a_col)
        out[lo:hi] = terms - base[lo:hi, None] - base[None, :]
    np.fill_diagonal(out, -np.inf)
    return out


def _qh_row_merge_gains(e, a_row, a_col) -> np.ndarray:
    """Exact QH gains for merging every pair of row communities.

    A row term is (sum_k e_k^2 - a_r sum_k e_k a_k) / max_k e_k; for a
    merged row the sums add up with a cross term 2 <e_r, e_s>, and the new
    maximum only exceeds max(M_r, M_s) on columns both rows touch.
    """
    top = e.max(axis=1)
    s2 = (e ** 2).sum(axis=1)
    sa = e @ a_col
    base = (s2 - a_row * sa) / top
    new_num = s2[:, None] + s2[None, :] + 2 * (e @ e.T) - (a_row[:, None] + a_row[None, :]) * (sa[:, None] + sa[None, :])
    new_top = np.maximum.outer(top, top)
    for k in np.flatnonzero((e > 0).sum(axis=0) >= 2):
        rows = np.flatnonzero(e[:, k])
        block = np.ix_(rows, rows)
        new_top[block] = np.maximum(new_top[block], e[rows, k][:, None] + e[rows, k][None, :])
    out = new_num / new_top - base[:, None] - base[None, :]
    np.fill_diagonal(out, -np.inf)
    return out


def _qh_col_merge_gains(e, a_row, a_col) -> np.ndarray:
    """Exact QH gains for merging every pair of column communities.

    Merging columns k and l adds 2 e_k e_l and e_k a_l + e_l a_k to the two
    sums of each row term, which is separable while the row maximum stays
    put. The maximum moves only where e_k + e_l exceeds it, which needs
    both cells non-zero; those few (row, k, l) triples are corrected one
    row at a time.
    """
    top = e.max(axis=1)
    s2 = (e ** 2).sum(axis=1)
    sa = e @ a_col
    num = s2 - a_row * sa
    inv = 1.0 / top
    u = e.T @ (a_row * inv)
    out = 2 * (e.T * inv) @ e - (np.outer(u, a_col) + np.outer(a_col, u))
    for r in np.flatnonzero((e > 0).sum(axis=1) >= 2):
        nz = np.flatnonzero(e[r])
        er = e[r, nz]
        pair = er[:, None] + er[None, :]
        hit = pair > top[r]
        np.fill_diagonal(hit, False)
        if not hit.any():
            continue
        x = 2 * er[:, None] * er[None, :] - a_row[r] * (er[:, None] * a_col[nz][None, :] + er[None, :] * a_col[nz][:, None])
        corr = np.where(hit, (num[r] + x) * (1.0 / np.where(hit, pair, 1.0) - inv[r]), 0.0)
        out[np.ix_(nz, nz)] += corr
    np.fill_diagonal(out, -np.inf)
    return out


def _qm_col_merge_gains(e, a_row, a_col) -> np.ndarray:
    """Exact QM gains for merging every pair of column communities.

    Only rows with a non-zero cell in column k or l can change their best
    match, so contributions are gathered from non-zero cells. The best
    column outside {k, l} is read from each row's top three.
    """
    r_count, c = e.shape
    best = np.argmax(e, axis=1)
    cur = e[np.arange(r_count), best] - a_row * a_col[best]
    order = np.argsort(-e, axis=1, kind="stable")[:, :3]
    acc = np.zeros((c, c))
    rr, kk = np.nonzero(e)
    cols = np.arange(c)
    for r, k in zip(rr, kk):
        er = e[r]
        s = er[k] + er
        t = order[r]
        idx = np.full(c, -1)
        for cand in t[::-1]:
            idx = np.where((cand != k) & (cand != cols), cand, idx)
        x = np.where(idx >= 0, er[np.maximum(idx, 0)], -np.inf)
        low = np.minimum(k, cols)
        take_merged = (s > x) | ((s == x) & (low < idx))
        new = np.where(take_merged, s - a_row[r] * (a_col[k] + a_col), x - a_row[r] * a_col[np.maximum(idx, 0)])
        contrib = new - cur[r]
        mask = (er == 0) | (cols > k)
        mask[k] = False
        acc[k] += np.where(mask, contrib, 0.0)
    out = acc + acc.T
    np.fill_diagonal(out, -np.inf)
    return out


def _col_merge_deltas_generic(e, a_row, a_col, rows_fn) -> np.ndarray:
    c = e.shape[1]
    total = rows_fn(e, a_row, a_col).sum()
    out = np.full((c, c), -np.inf)
    for i in range(c - 1):
        for j in range(i + 1, c):
            keep = np.ones(c, dtype=bool)
            keep[j] = False
            merged = e[:, keep].copy()
            merged[:, i] += e[:, j]
            ac = a_col[keep].copy()
            ac[i] += a_col[j]
            out[i, j] = out[j, i] = rows_fn(merged, a_row, ac).sum() - total
    return out


_FAST_GAINS = {
    Measure.QH: (_qh_row_merge_gains, _qh_col_merge_gains),
    Measure.QM: (None, _qm_col_merge_gains),
}


def _greedy_sided(g: BipartiteGraph, measure: Measure):
    rows_fn = _ROW_TERMS[measure]
    row_gains, col_gains = _FAST_GAINS[measure]
    # edge counts between current row and column communities; kept integral
    # so that argmax ties stay exact ties after merges
    counts = g.biadjacency.copy()
    u_members = [[i] for i in range(g.n_u)]
    v_members = [[j] for j in range(g.n_v)]
    while True:
        e = counts / g.m
        a_row, a_col = counts.sum(axis=1) / g.m, counts.sum(axis=0) / g.m
        if row_gains is not None:
            row_delta = row_gains(e, a_row, a_col)
        else:
            row_delta = _row_merge_deltas(e, a_row, a_col, rows_fn)
        col_delta = col_gains(e, a_row, a_col)
        best = None
        for side, delta in ((0, row_delta), (1, col_delta)):
            found = _best_pair(delta)
            if found is not None and (best is None or found[0] > best[0]):
                best = (found[0], side, found[1], found[2])
        if best is None or best[0] <= GREEDY_TOL:
            break
        _, side, i, j = best
        if side == 0:
            counts[i] += counts[j]
            counts = np.delete(counts, j, 0)
            u_members[i].extend(u_members[j])
            del u_members[j]
        else:
            counts[:, i] += counts[:, j]
            counts = np.delete(counts, j, 1)
            v_members[i].extend(v_members[j])
            del v_members[j]
    ua = np.empty(g.n_u, dtype=np.int64)
    for cid, group in enumerate(u_members):
        ua[group] = cid
    va = np.empty(g.n_v, dtype=np.int64)
    for cid, group in enumerate(v_members):
        va[group] = cid
    return two_sided(ua.tolist(), va.tolist(), measure=measure.value)


def greedy_optimize(g: BipartiteGraph, measure: Measure | str = Measure.QB) -> CommunityStructure:
    """Agglomerate communities from singletons while the measure improves.

    Each step takes the single merge with the largest gain. For QB any two
    communities may merge; for QM and QH row and column communities are
    merged separately. Ties go to the lowest community indices, row side
    before column side.
    """
    measure = Measure.parse(measure)
    c = _greedy_qb(g) if measure is Measure.QB else _greedy_sided(g, measure)
    value = evaluate(g, c, measure)
    meta = {"measure": measure.value}
    if measure is Measure.QH:
        meta["qh_weight"] = QH_WEIGHT_CONVENTION
    return CommunityStructure(c.assignment, c.n_u, c.shared, measure.value, value, meta)


# -- weakest pair ----------------------------------------------------------


def co_reference_ratios(g: BipartiteGraph) -> np.ndarray:
    """r_ij = share of row node j's neighbours that row node i also links to."""
    adj = (g.biadjacency > 0).astype(float)
    common = adj @ adj.T
    return common / adj.sum(axis=1)[None, :]


@dataclass(frozen=True)
class WeakestPairResult:
    dissimilarity: np.ndarray = field(repr=False)
    ibrp: tuple[float, ...]
    partition: Partition


def l1_dissimilarity(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.abs(r[:, None, :] - r[None, :, :]).sum(axis=-1)


def within_ibrp(d: np.ndarray, assignment: Sequence[int]) -> float:
    """Mean dissimilarity over distinct pairs that share a fragment.

    Pooling the fragment sums over n^2 would fall with every split down to
    singletons, so the mean over within-fragment pairs is used instead; it
    stops falling once the fragments are internally homogeneous. With no
    within-fragment pair left there is nothing to judge, so the score is
    infinite and such a split is never taken.
    """
    a = np.asarray(assignment)
    same = a[:, None] == a[None, :]
    np.fill_diagonal(same, False)
    n_pairs = same.sum()
    return float((d * same).sum() / n_pairs) if n_pairs else float("inf")


_IBRP_TOL = 1e-12


def weakest_pair(r: np.ndarray, max_parts: int | None = None) -> WeakestPairResult:
    """Split at the most dissimilar pair until the within-fragment IBRP stops falling.

    Each step picks the fragment holding the globally weakest (most
    dissimilar) pair, seeds two halves with that pair and sends every other
    member to the closer seed, the first seed on ties.
    """
    r = np.asarray(r, dtype=float)
    n = len(r)
    d = l1_dissimilarity(r)
    assign = np.zeros(n, dtype=np.int64)
    history = [within_ibrp(d, assign)]
    limit = n if max_parts is None else max_parts
    while assign.max() + 1 < limit:
        same = assign[:, None] == assign[None, :]
        masked = np.where(same, d, -np.inf)
        np.fill_diagonal(masked, -np.inf)
        top = masked.max() if n > 1 else -np.inf
        if not top > 0:
            break
        ii, jj = np.nonzero(masked == top)
        k = np.lexsort((jj, ii))[0]
        i, j = int(ii[k]), int(jj[k])
        frag = np.flatnonzero(assign == assign[i])
        trial = assign.copy()
        new_id = assign.max() + 1
        to_j = frag[d[frag, j] < d[frag, i]]
        trial[to_j] = new_id
        score = within_ibrp(d, trial)
        if not score < history[-1] - _IBRP_TOL:
            break
        assign = trial
        history.append(score)
    return WeakestPairResult(d, tuple(history), Partition(dense_labels(assign.tolist())))
