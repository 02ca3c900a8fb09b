"""Correspondence analysis of a CrossTab.

Row and column categories both receive principal coordinates (a symmetric
map), so distances between a purchase category and a region are defined
in the same space.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .crosstab import CrossTab
from .errors import DimensionTooLarge

# Relative and absolute floors below which a singular value is an empty axis.
SV_RTOL = 1e-10
SV_ATOL = 1e-12


@dataclass(frozen=True)
class CaEmbedding:
    singular_values: np.ndarray
    row_scores: np.ndarray = field(repr=False)
    col_scores: np.ndarray = field(repr=False)
    total_inertia: float
    row_labels: tuple[str, ...] = ()
    col_labels: tuple[str, ...] = ()
    row_masses: np.ndarray | None = field(default=None, repr=False)
    col_masses: np.ndarray | None = field(default=None, repr=False)

    @property
    def dims(self) -> int:
        return len(self.singular_values)

    @property
    def inertia(self) -> np.ndarray:
        """Principal inertias (squared singular values) of the retained axes."""
        return self.singular_values ** 2

    def to_dict(self) -> dict:
        return {
            "singular_values": self.singular_values.tolist(),
            "total_inertia": self.total_inertia,
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "row_scores": self.row_scores.tolist(),
            "col_scores": self.col_scores.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"


def standardized_matrix(ct: CrossTab) -> np.ndarray:
    """Row-standardized matrix X with x_ij = p_ij / (p_i+ sqrt(p_+j)) - sqrt(p_+j)."""
    p = ct.probabilities
    r = ct.row_masses[:, None]
    sc = np.sqrt(ct.col_masses)[None, :]
    return p / (r * sc) - sc


def standardized_matrix_columns(ct: CrossTab) -> np.ndarray:
    """Column-side analogue, returned n x m: entry (j, i) is p_ij / (p_+j sqrt(p_i+)) - sqrt(p_i+)."""
    p = ct.probabilities
    c = ct.col_masses[None, :]
    sr = np.sqrt(ct.row_masses)[:, None]
    return (p / (c * sr) - sr).T


def residual_matrix(ct: CrossTab) -> np.ndarray:
    """Standardized residuals (p_ij - p_i+ p_+j) / sqrt(p_i+ p_+j)."""
    p = ct.probabilities
    expected = np.outer(ct.row_masses, ct.col_masses)
    return (p - expected) / np.sqrt(expected)


def total_inertia(ct: CrossTab) -> float:
    p = ct.probabilities
    expected = np.outer(ct.row_masses, ct.col_masses)
    return float(((p - expected) ** 2 / expected).sum())


def max_dims(ct: CrossTab) -> int:
    return min(ct.shape) - 1


def ca_embed(ct: CrossTab, dims: int | str | None = None) -> CaEmbedding:
    """Embed rows and columns of ``ct`` by correspondence analysis.

    Parameters
    ----------
    ct : CrossTab
    dims : int, "all" or None
        Number of axes to keep. ``None`` and ``"all"`` keep every
        non-trivial axis, ``min(m, n) - 1``.

    Returns
    -------
    CaEmbedding
        Row principal coordinates ``u_ik * s_k / sqrt(p_i+)`` and column
        principal coordinates ``v_jk * s_k / sqrt(p_+j)``, axes in
        descending order of singular value. Each axis is oriented so the
        largest-magnitude entry of its left singular vector is positive.
    """
    limit = max_dims(ct)
    if dims is None or dims == "all":
        k = limit
    else:
        k = int(dims)
        if k < 1:
            raise ValueError(f"dims must be positive, got {dims!r}")
        if k > limit:
            raise DimensionTooLarge(f"dims={k} exceeds min(m, n) - 1 = {limit}")

    r = ct.row_masses
    c = ct.col_masses
    s = residual_matrix(ct)
    u, sv, vt = np.linalg.svd(s, full_matrices=False)
    u, sv, v = u[:, :k], sv[:k].copy(), vt[:k].T.copy()
    u = u.copy()

    for axis in range(k):
        lead = np.argmax(np.abs(u[:, axis]))
        if u[lead, axis] < 0:
            u[:, axis] *= -1
            v[:, axis] *= -1

    if k:
        tol = max(SV_RTOL * sv[0], SV_ATOL)
        sv[sv < tol] = 0.0

    row_scores = u * sv / np.sqrt(r)[:, None]
    col_scores = v * sv / np.sqrt(c)[:, None]
    return CaEmbedding(
        singular_values=sv,
        row_scores=row_scores,
        col_scores=col_scores,
        total_inertia=total_inertia(ct),
        row_labels=ct.row_labels,
        col_labels=ct.col_labels,
        row_masses=r,
        col_masses=c,
    )


def reconstruct(emb: CaEmbedding) -> np.ndarray:
    """Rebuild p_ij from an embedding that retains every non-zero axis."""
    r, c = emb.row_masses, emb.col_masses
    keep = emb.singular_values > 0
    inner = (emb.row_scores[:, keep] / emb.singular_values[keep]) @ emb.col_scores[:, keep].T
    return np.outer(r, c) * (1.0 + inner)
