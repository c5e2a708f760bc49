"""Spherical equal-volume (EII) Gaussian mixtures fitted by EM, and BIC
model selection over the number of components.

Every component shares one covariance ``lambda * I``. BIC follows the
larger-is-better convention ``2 * loglik - m * log(n)`` with
``m = (K - 1) + K * d + 1`` free parameters.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .ward import Partition, cut, ward_cluster

LAMBDA_FLOOR = 1e-12


class DegenerateFitError(RuntimeError):
    """No usable mixture fit (every candidate collapsed)."""


@dataclass(frozen=True, eq=False)
class GmmFit:
    K: int
    weights: np.ndarray
    means: np.ndarray
    lam: float
    responsibilities: np.ndarray
    loglik_trace: tuple[float, ...]
    bic: float
    n_params: int
    n_iter: int
    converged: bool
    degenerate: bool = False
    note: str = ""

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1] if self.loglik_trace else -math.inf

    @property
    def labels(self) -> np.ndarray:
        """Hard assignment, 1-based."""
        return self.responsibilities.argmax(axis=1) + 1

    def partition(self, entity_labels) -> Partition:
        """Hard assignment renumbered by first appearance, as a :class:`Partition`."""
        remap: dict[int, int] = {}
        out = []
        for g in self.labels:
            remap.setdefault(int(g), len(remap) + 1)
            out.append(remap[int(g)])
        return Partition(labels=tuple(out), k=len(remap), entity_labels=tuple(entity_labels))

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "weights": [float(x) for x in self.weights],
            "means": [[float(x) for x in r] for r in self.means],
            "lambda": float(self.lam),
            "loglik": float(self.loglik),
            "loglikTrace": [float(x) for x in self.loglik_trace],
            "bic": float(self.bic),
            "nParams": self.n_params,
            "nIter": self.n_iter,
            "converged": self.converged,
            "degenerate": self.degenerate,
            "note": self.note,
            "responsibilities": [[float(x) for x in r] for r in self.responsibilities],
        }

    def to_json(self) -> str:
        # -inf loglik of a degenerate fit is written as null
        d = self.to_dict()
        for key in ("loglik", "bic"):
            if not math.isfinite(d[key]):
                d[key] = None
        return json.dumps(d, indent=1, allow_nan=False) + "\n"


def n_free_params(K: int, d: int) -> int:
    return (K - 1) + K * d + 1


def bic_value(loglik: float, m: int, n: int) -> float:
    return 2.0 * loglik - m * math.log(n)


def _m_step(X: np.ndarray, z: np.ndarray):
    n, d = X.shape
    nk = z.sum(axis=0)
    weights = nk / n
    means = (z.T @ X) / nk[:, None]
    sq = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    lam = float((z * sq).sum() / (n * d))
    return weights, means, lam


def _e_step(X: np.ndarray, weights, means, lam):
    n, d = X.shape
    sq = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    log_joint = np.log(weights)[None, :] - 0.5 * d * math.log(2.0 * math.pi * lam) - sq / (2.0 * lam)
    log_px = logsumexp(log_joint, axis=1)
    z = np.exp(log_joint - log_px[:, None])
    z /= z.sum(axis=1, keepdims=True)
    return z, float(math.fsum(log_px))


def _as_indicator(init, n: int, K: int) -> np.ndarray:
    labels = np.asarray(init.labels if isinstance(init, Partition) else init)
    if labels.shape != (n,):
        raise ValueError("initial partition must label every point")
    if set(labels.tolist()) != set(range(1, K + 1)):
        raise ValueError(f"initial partition must have {K} nonempty groups 1..{K}")
    z = np.zeros((n, K))
    z[np.arange(n), labels - 1] = 1.0
    return z


def fit_eii(points, K: int, init, tol: float = 1e-8, max_iter: int = 500) -> GmmFit:
    """EM for the EII mixture, started from a hard partition.

    ``init`` is a :class:`Partition` (or a sequence of 1-based group labels)
    with ``K`` nonempty groups. Iterations stop once the log-likelihood gain
    drops below ``tol``. A variance below ``1e-12`` times the mean squared
    norm of the centred data, or an emptied component, marks the fit
    degenerate.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("points must be an n x d matrix")
    n, d = X.shape
    if not 1 <= K < n:
        raise ValueError(f"need n > K >= 1 (n={n}, K={K})")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not np.isfinite(X).all():
        raise ValueError("non-finite coordinates")
    z = _as_indicator(init, n, K)
    floor = LAMBDA_FLOOR * float(((X - X.mean(axis=0)) ** 2).sum(axis=1).mean())
    m = n_free_params(K, d)

    trace: list[float] = []
    weights = means = None
    lam = math.nan
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        weights, means, lam = _m_step(X, z)
        if not (weights > 0).all() or not lam > floor:
            why = "empty component" if not (weights > 0).all() else "variance collapsed below floor"
            return GmmFit(K, weights, means, lam, z, tuple(trace), -math.inf, m, it,
                          False, degenerate=True, note=why)
        z, ll = _e_step(X, weights, means, lam)
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break
    loglik = trace[-1]
    return GmmFit(K, weights, means, lam, z, tuple(trace), bic_value(loglik, m, n), m, it, converged)


@dataclass(frozen=True)
class ModelSelection:
    best: GmmFit
    fits: tuple[GmmFit, ...]
    bic_curve: tuple[tuple[int, float], ...]

    def curve_dict(self) -> list[dict]:
        return [
            {"K": f.K, "bic": (f.bic if math.isfinite(f.bic) else None), "degenerate": f.degenerate}
            for f in self.fits
        ]


def select_model(points, k_range, tol: float = 1e-8, max_iter: int = 500) -> ModelSelection:
    """Fit EII mixtures for every K in ``k_range`` and keep the largest BIC.

    Each fit starts from the Ward partition cut at the same K. Degenerate
    fits are recorded on the curve (BIC ``-inf``) but never selected; ties
    go to the smaller K.
    """
    X = np.asarray(points, dtype=np.float64)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k range")
    n = X.shape[0]
    if ks[0] < 1 or ks[-1] > n - 1:
        raise ValueError(f"k range must lie within [1, {n - 1}]")
    tree = ward_cluster(X)
    fits = tuple(fit_eii(X, K, cut(tree, K), tol=tol, max_iter=max_iter) for K in ks)
    usable = [f for f in fits if not f.degenerate]
    if not usable:
        raise DegenerateFitError("every mixture fit was degenerate")
    best = max(usable, key=lambda f: (f.bic, -f.K))
    curve = tuple((f.K, f.bic) for f in fits)
    return ModelSelection(best=best, fits=fits, bic_curve=curve)
