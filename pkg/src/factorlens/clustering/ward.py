"""Ward minimum-variance agglomeration and dendrogram cutting.

Node numbering follows the usual convention: leaves are ``0..n-1`` and the
cluster formed by merge ``t`` is node ``n + t``. Merge heights are the Ward
cost itself, i.e. the increase in within-group sum of squares, so the sum
of all heights equals the total sum of squares about the centroid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TIE_TOL = 1e-12


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    merges: tuple[Merge, ...]
    leaf_labels: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.leaf_labels)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def to_linkage(self) -> np.ndarray:
        """scipy-style ``(n-1, 4)`` linkage matrix (heights are Ward costs)."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float)

    def tree(self) -> dict:
        """Nested merge tree rooted at the last merge."""
        n = self.n
        nodes: list[dict] = [{"id": i, "label": lab, "size": 1} for i, lab in enumerate(self.leaf_labels)]
        for t, m in enumerate(self.merges):
            nodes.append({
                "id": n + t,
                "height": m.height,
                "size": m.size,
                "children": [nodes[m.left], nodes[m.right]],
            })
        return nodes[-1]

    def to_dict(self) -> dict:
        return {
            "leafLabels": list(self.leaf_labels),
            "merges": [[m.left, m.right, m.height, m.size] for m in self.merges],
            "tree": self.tree(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"


@dataclass(frozen=True)
class Partition:
    """Group index (1..k) of every entity."""

    labels: tuple[int, ...]
    k: int
    entity_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.entity_labels):
            raise ValueError("one group label per entity required")
        if set(self.labels) != set(range(1, self.k + 1)):
            raise ValueError("every group 1..k must be nonempty")

    def to_csv(self) -> str:
        lines = ["label,cluster"]
        lines += [f"{_csv_field(e)},{g}" for e, g in zip(self.entity_labels, self.labels)]
        return "\n".join(lines) + "\n"


def _csv_field(s: str) -> str:
    if any(ch in s for ch in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def _check_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("points must be an n x d matrix")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 points")
    if not np.isfinite(X).all():
        raise ValueError("non-finite coordinates")
    return X


def ward_cluster(points, labels: Sequence[str] | None = None) -> Dendrogram:
    """Equi-weighted Ward agglomeration with Lance-Williams updates.

    Costs equal within ``1e-12`` are broken by the lexicographically
    smallest ``(smaller node id, larger node id)`` pair.
    """
    X = _check_points(points)
    n = X.shape[0]
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
    if len(labels) != n:
        raise ValueError("one label per point required")

    # merge cost between singletons: (1*1/2) * ||x_i - x_j||^2
    D = 0.5 * ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(D, np.inf)

    size = np.ones(n)
    node = np.arange(n)
    alive = np.ones(n, dtype=bool)
    merges = []
    for t in range(n - 1):
        sub = np.where(alive[:, None] & alive[None, :], D, np.inf)
        best = sub.min()
        cand_i, cand_j = np.nonzero(np.triu(sub <= best + TIE_TOL, 1))
        pairs = sorted(
            (min(node[a], node[b]), max(node[a], node[b]), a, b) for a, b in zip(cand_i, cand_j)
        )
        lo_id, hi_id, a, b = pairs[0]
        height = float(D[a, b])
        na, nb = size[a], size[b]
        merges.append(Merge(int(lo_id), int(hi_id), height, int(na + nb)))

        # Lance-Williams: new cluster stored in slot a, slot b retired
        nk = size
        D[a, :] = ((na + nk) * D[a, :] + (nb + nk) * D[b, :] - nk * height) / (na + nb + nk)
        D[:, a] = D[a, :]
        D[a, a] = np.inf
        alive[b] = False
        D[b, :] = np.inf
        D[:, b] = np.inf
        size[a] = na + nb
        node[a] = n + t
    return Dendrogram(merges=tuple(merges), leaf_labels=labels)


def cut(d: Dendrogram, k: int) -> Partition:
    """Partition obtained by undoing the ``k - 1`` last (highest) merges.

    Groups are numbered in order of their first leaf.
    """
    n = d.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, m in enumerate(d.merges[: n - k]):
        parent[find(m.left)] = n + t
        parent[find(m.right)] = n + t
    group_of: dict[int, int] = {}
    out = []
    for i in range(n):
        root = find(i)
        if root not in group_of:
            group_of[root] = len(group_of) + 1
        out.append(group_of[root])
    return Partition(labels=tuple(out), k=k, entity_labels=d.leaf_labels)
