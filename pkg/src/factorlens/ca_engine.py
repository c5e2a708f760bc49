"""Correspondence analysis of the active block of a :class:`DataTable`.

The decomposition is the SVD of the standardized residuals

    S = D_r^{-1/2} (P - r c^T) D_c^{-1/2}

with principal coordinates F = D_r^{-1/2} U Sigma (rows) and
G = D_c^{-1/2} V Sigma (columns), so that Euclidean distances between rows
of F equal chi-squared distances between row profiles.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .data_table import ACTIVE, SUPPLEMENTARY, DataTable

Side = Literal["row", "column"]

# singular values below this (relative to sigma_1, or absolutely) are zeroed
SIGMA_RTOL = 1e-12
_CTR_TIE = 1e-12
_CENTROID_EPS = 1e-24


@dataclass(frozen=True, eq=False)
class CaResult:
    """Outcome of :func:`analyze`.

    All ``min(I-1, J-1)`` nontrivial axes are kept. Axes whose singular value
    was truncated to zero carry zero coordinates, zero contributions and
    zero squared correlations.
    """

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    row_masses: np.ndarray
    col_masses: np.ndarray
    singular_values: np.ndarray
    row_coords: np.ndarray
    col_coords: np.ndarray
    row_contributions: np.ndarray
    col_contributions: np.ndarray
    row_cos2: np.ndarray
    col_cos2: np.ndarray
    row_dist2: np.ndarray
    col_dist2: np.ndarray
    axis_signs: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.singular_values**2

    @property
    def total_inertia(self) -> float:
        return math.fsum(self.eigenvalues)

    @property
    def n_axes(self) -> int:
        return len(self.singular_values)

    @property
    def n_factors(self) -> int:
        """Number of axes with positive inertia."""
        return int(np.count_nonzero(self.singular_values > 0))

    def _side(self, side: Side):
        if side == "row":
            return self.row_labels, self.row_coords, self.row_contributions, self.row_cos2
        if side == "column":
            return self.col_labels, self.col_coords, self.col_contributions, self.col_cos2
        raise ValueError(f"side must be 'row' or 'column', not {side!r}")

    def to_dict(self) -> dict:
        def rows(a):
            return [[float(x) for x in r] for r in a]

        return {
            "rowLabels": list(self.row_labels),
            "colLabels": list(self.col_labels),
            "masses": {
                "rows": [float(x) for x in self.row_masses],
                "columns": [float(x) for x in self.col_masses],
            },
            "sigma": [float(x) for x in self.singular_values],
            "lambda": [float(x) for x in self.eigenvalues],
            "totalInertia": self.total_inertia,
            "inertiaPercent": [inertia_percent(self, k) for k in range(1, self.n_axes + 1)],
            "rowCoords": rows(self.row_coords),
            "colCoords": rows(self.col_coords),
            "ctr": {"rows": rows(self.row_contributions), "columns": rows(self.col_contributions)},
            "cos2": {"rows": rows(self.row_cos2), "columns": rows(self.col_cos2)},
            "signs": [int(s) for s in self.axis_signs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


@dataclass(frozen=True)
class SupplementaryPoint:
    label: str
    kind: Side
    coords: np.ndarray
    cos2: np.ndarray

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "coords": [float(x) for x in self.coords],
            "cos2": [float(x) for x in self.cos2],
        }


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def _cos2(coords: np.ndarray, dist2: np.ndarray) -> np.ndarray:
    out = np.zeros_like(coords)
    ok = dist2 > _CENTROID_EPS
    out[ok] = coords[ok] ** 2 / dist2[ok, None]
    return out


def _contributions(masses: np.ndarray, coords: np.ndarray, eig: np.ndarray) -> np.ndarray:
    out = np.zeros_like(coords)
    pos = eig > 0
    out[:, pos] = masses[:, None] * coords[:, pos] ** 2 / eig[pos]
    return out


def analyze(t: DataTable) -> CaResult:
    """Correspondence analysis of the active rows x active columns of ``t``.

    Axis signs are canonical: on every axis the active column with the
    largest contribution gets a positive coordinate (ties go to the lowest
    column index).
    """
    X = t.active_block
    P = X / t.grand_total
    r = P.sum(axis=1)
    c = P.sum(axis=0)
    sr, sc = np.sqrt(r), np.sqrt(c)
    S = (P - np.outer(r, c)) / np.outer(sr, sc)

    U, sigma, Vt = np.linalg.svd(S, full_matrices=False)
    K = min(X.shape) - 1
    U, sigma, V = U[:, :K], sigma[:K].copy(), Vt[:K].T
    if K and (sigma[0] < SIGMA_RTOL):
        sigma[:] = 0.0
    else:
        sigma[sigma < SIGMA_RTOL * sigma[0]] = 0.0

    F = U / sr[:, None] * sigma
    G = V / sc[:, None] * sigma
    eig = sigma**2

    col_ctr = _contributions(c, G, eig)
    signs = np.ones(K)
    for k in range(K):
        if eig[k] == 0:
            continue
        top = col_ctr[:, k].max()
        j = int(np.flatnonzero(col_ctr[:, k] >= top - _CTR_TIE)[0])
        if G[j, k] < 0:
            signs[k] = -1.0
    F *= signs
    G *= signs
    row_ctr = _contributions(r, F, eig)

    # squared chi-squared distances of profiles to their centroid, from the data
    row_d2 = (((P / r[:, None] - c) ** 2) / c).sum(axis=1)
    col_d2 = (((P / c - r[:, None]) ** 2) / r[:, None]).sum(axis=0)

    res = CaResult(
        row_labels=t.active_row_labels,
        col_labels=t.active_col_labels,
        row_masses=r,
        col_masses=c,
        singular_values=sigma,
        row_coords=F,
        col_coords=G,
        row_contributions=row_ctr,
        col_contributions=col_ctr,
        row_cos2=_cos2(F, row_d2),
        col_cos2=_cos2(G, col_d2),
        row_dist2=row_d2,
        col_dist2=col_d2,
        axis_signs=signs,
    )
    _freeze(r, c, sigma, F, G, row_ctr, col_ctr, res.row_cos2, res.col_cos2, row_d2, col_d2, signs)
    return res


def _check_axis(res: CaResult, k: int) -> int:
    if not 1 <= k <= res.n_axes:
        raise IndexError(f"axis {k} out of range [1, {res.n_axes}]")
    return k - 1


def inertia_percent(res: CaResult, k: int) -> float:
    """Share of total inertia carried by axis ``k`` (1-based), in percent."""
    kk = _check_axis(res, k)
    total = res.total_inertia
    if total == 0:
        return 0.0
    return 100.0 * float(res.eigenvalues[kk]) / total


def contributions(res: CaResult, side: Side, k: int) -> list[tuple[str, float]]:
    """Contributions to axis ``k``, largest first (ties by label)."""
    labels, _, ctr, _ = res._side(side)
    kk = _check_axis(res, k)
    if res.eigenvalues[kk] == 0:
        raise ValueError(f"axis {k} has zero inertia")
    pairs = [(lab, float(v)) for lab, v in zip(labels, ctr[:, kk])]
    return sorted(pairs, key=lambda p: (-p[1], p[0]))


def cos2(res: CaResult, side: Side, entity: str) -> np.ndarray:
    """Squared correlations of a row or column with every axis."""
    labels, _, _, c2 = res._side(side)
    try:
        i = labels.index(entity)
    except ValueError:
        raise KeyError(f"unknown {side} {entity!r}") from None
    return c2[i].copy()


def project_supplementary(
    res: CaResult, t: DataTable, label: str, kind: Side | None = None
) -> SupplementaryPoint:
    """Place a supplementary column (or row) in the existing solution.

    A supplementary column with profile ``p`` over the active rows lands at
    ``(1/sigma_k) * sum_i p_i F_ik``; rows use the dual formula with ``G``.
    Axes with zero inertia get coordinate 0.
    """
    if kind is None:
        if label in t.attribute_labels:
            kind = "column"
        elif label in t.short_labels:
            kind = "row"
        else:
            raise KeyError(f"unknown label {label!r}")

    if kind == "column":
        j = t.attribute_index(label)
        if t.attribute_roles[j] != SUPPLEMENTARY:
            raise ValueError(f"column {label!r} is not supplementary")
        vec = t.values[t.active_rows, j]
        basis, centroid, what = res.row_coords, res.row_masses, "column"
    elif kind == "row":
        i = t.entity_index(label)
        if t.entity_roles[i] != SUPPLEMENTARY:
            raise ValueError(f"row {label!r} is not supplementary")
        vec = t.values[i, t.active_cols]
        basis, centroid, what = res.col_coords, res.col_masses, "row"
    else:
        raise ValueError(f"kind must be 'row' or 'column', not {kind!r}")

    if np.isnan(vec).all():
        raise ValueError(f"{what} {label!r} is entirely missing")
    if np.isnan(vec).any():
        raise ValueError(f"projection skipped for {what} {label!r}: missing values")
    total = math.fsum(vec)
    if not total > 0:
        raise ValueError(f"cannot project {what} {label!r}: nonpositive total {total!r}")

    p = vec / total
    sigma = res.singular_values
    coords = np.zeros(res.n_axes)
    pos = sigma > 0
    coords[pos] = (p @ basis[:, pos]) / sigma[pos]
    d2 = float((((p - centroid) ** 2) / centroid).sum())
    c2 = coords**2 / d2 if d2 > _CENTROID_EPS else np.zeros_like(coords)
    return SupplementaryPoint(label=label, kind=kind, coords=coords, cos2=c2)


def project_all_supplementary(res: CaResult, t: DataTable) -> tuple[list[SupplementaryPoint], list[str]]:
    """Project every supplementary column and row that can be projected.

    Returns the points and a list of diagnostics for the ones refused.
    """
    points, skipped = [], []
    items = [(a, "column") for a in t.supplementary_col_labels]
    items += [(e, "row") for e in t.supplementary_row_labels]
    for label, kind in items:
        try:
            points.append(project_supplementary(res, t, label, kind))
        except ValueError as exc:
            skipped.append(str(exc))
    return points, skipped


def chi2_row_distance(t: DataTable, i1: str | int, i2: str | int) -> float:
    """Chi-squared distance between the profiles of two active rows."""
    idx = []
    for e in (i1, i2):
        i = t.entity_index(e) if isinstance(e, str) else int(e)
        if not 0 <= i < t.shape[0]:
            raise IndexError(f"entity index {i} out of range")
        if t.entity_roles[i] != ACTIVE:
            raise ValueError(f"row {t.entity_labels[i][0]!r} is not active")
        idx.append(i)
    block = t.values[:, t.active_cols]
    c = block[t.active_rows].sum(axis=0)
    c = c / c.sum()
    a, b = (block[i] / block[i].sum() for i in idx)
    return math.sqrt(float((((a - b) ** 2) / c).sum()))
