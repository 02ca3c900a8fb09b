"""Contingency tables built from (purchase category, region) pairs.

The table keeps integer counts; probabilities and profiles are derived on
demand in double precision.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, ZeroMarginal

# First-row cell names recognised as a header in pair CSV files.
_HEADER_NAMES = {
    "row", "col", "column", "category", "item_place", "purchase", "item", "place",
    "city", "region", "row_label", "col_label", "u", "v", "source", "target",
}


@dataclass(frozen=True)
class CrossTab:
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(
                f"counts shape {counts.shape} does not match labels "
                f"({len(self.row_labels)}, {len(self.col_labels)})"
            )
        if counts.size == 0:
            raise EmptyInput("contingency table has no cells")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        if len(set(self.row_labels)) != len(self.row_labels):
            raise ValueError("row labels must be distinct")
        if len(set(self.col_labels)) != len(self.col_labels):
            raise ValueError("column labels must be distinct")
        zero_rows = [self.row_labels[i] for i in np.flatnonzero(counts.sum(axis=1) == 0)]
        zero_cols = [self.col_labels[j] for j in np.flatnonzero(counts.sum(axis=0) == 0)]
        if zero_rows or zero_cols:
            raise ZeroMarginal(
                f"zero-marginal categories: rows={zero_rows!r} cols={zero_cols!r}"
            )
        counts.setflags(write=False)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        object.__setattr__(self, "counts", counts)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @cached_property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @cached_property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @cached_property
    def grand_total(self) -> int:
        return int(self.counts.sum())

    @cached_property
    def probabilities(self) -> np.ndarray:
        return self.counts / float(self.grand_total)

    @property
    def row_masses(self) -> np.ndarray:
        """Row marginals p_i+."""
        return self.probabilities.sum(axis=1)

    @property
    def col_masses(self) -> np.ndarray:
        """Column marginals p_+j."""
        return self.probabilities.sum(axis=0)

    def to_dict(self) -> dict:
        return {
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "counts": self.counts.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "CrossTab":
        return cls(tuple(data["row_labels"]), tuple(data["col_labels"]), np.asarray(data["counts"]))

    @classmethod
    def from_json(cls, text: str) -> "CrossTab":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ProfileSet:
    row_profiles: np.ndarray
    col_profiles: np.ndarray


@dataclass(frozen=True)
class RestrictionReport:
    violation: bool
    offenders: tuple[str, ...] = ()


def build_crosstab(pairs: Iterable[tuple[str, str]]) -> CrossTab:
    """Count (row, column) label pairs into a table.

    Labels are ordered by first appearance so repeated runs produce the
    same layout.
    """
    rows: dict[str, int] = {}
    cols: dict[str, int] = {}
    cells: list[tuple[int, int]] = []
    for pair in pairs:
        r, c = pair
        if not isinstance(r, str) or not isinstance(c, str) or not r or not c:
            raise ValueError(f"pair labels must be non-empty strings, got {pair!r}")
        i = rows.setdefault(r, len(rows))
        j = cols.setdefault(c, len(cols))
        cells.append((i, j))
    if not cells:
        raise EmptyInput("no pairs given")
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    idx = np.asarray(cells)
    np.add.at(counts, (idx[:, 0], idx[:, 1]), 1)
    return CrossTab(tuple(rows), tuple(cols), counts)


def profiles(ct: CrossTab) -> ProfileSet:
    p = ct.probabilities
    return ProfileSet(
        row_profiles=p / ct.row_masses[:, None],
        col_profiles=p / ct.col_masses[None, :],
    )


def check_link_restriction(pairs: Iterable[tuple[str, str]]) -> RestrictionReport:
    """Report labels that occur on both sides of a pair list.

    A two-mode (bipartite) data set never links a label to itself across
    columns; any label found in both columns breaks that restriction.
    """
    left: dict[str, None] = {}
    right: set[str] = set()
    for r, c in pairs:
        left.setdefault(r, None)
        right.add(c)
    offenders = tuple(label for label in left if label in right)
    return RestrictionReport(violation=bool(offenders), offenders=offenders)


def read_pairs_csv(path) -> list[tuple[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_pairs_csv(fh)


def parse_pairs_csv(lines: Iterable[str]) -> list[tuple[str, str]]:
    pairs = []
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise ValueError(f"line {lineno}: expected two columns, got {row!r}")
        a, b = row[0].strip(), row[1].strip()
        if not pairs and lineno == 1 and a.lower() in _HEADER_NAMES and b.lower() in _HEADER_NAMES:
            continue
        pairs.append((a, b))
    return pairs


def write_pairs_csv(path, pairs: Sequence[tuple[str, str]], header=("category", "city")) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        w.writerows(pairs)
