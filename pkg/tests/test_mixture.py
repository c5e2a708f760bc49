import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorlens.clustering import (
    DegenerateFitError,
    bic_value,
    cut,
    fit_eii,
    n_free_params,
    select_model,
    ward_cluster,
)

from .oracles import eii_loglik


def blobs(seed, centres, n_each, spread=1.0):
    rng = np.random.default_rng(seed)
    centres = np.asarray(centres, dtype=float)
    X = np.vstack([c + spread * rng.normal(size=(n_each, centres.shape[1])) for c in centres])
    return X, np.repeat(np.arange(1, len(centres) + 1), n_each)


def test_single_component_closed_form():
    X = np.random.default_rng(0).normal(size=(60, 3)) * [1, 2, 3]
    fit = fit_eii(X, 1, [1] * 60)
    mu = X.mean(axis=0)
    lam = ((X - mu) ** 2).sum() / (60 * 3)
    np.testing.assert_allclose(fit.means[0], mu, atol=1e-10)
    assert fit.lam == pytest.approx(lam, abs=1e-10)
    assert fit.weights[0] == 1.0
    # -n d / 2 * (log(2 pi lam) + 1) is the maximised single-Gaussian loglik
    assert fit.loglik == pytest.approx(-60 * 3 / 2 * (math.log(2 * math.pi * lam) + 1), abs=1e-9)


def test_bic_arithmetic():
    assert bic_value(-100.0, 5, 50) == pytest.approx(-219.56, abs=5e-3)
    assert bic_value(-100.0, 5, 50) == -200 - 5 * math.log(50)


def test_param_count():
    assert n_free_params(1, 2) == 3
    assert n_free_params(3, 7) == 2 + 21 + 1


def test_sharp_responsibilities_for_separated_blobs():
    X, truth = blobs(1, [[0, 0], [40, 0]], 30)
    fit = fit_eii(X, 2, truth)
    assert fit.responsibilities.max(axis=1).min() > 0.999
    # direct density ratio for the least certain point
    i = int(fit.responsibilities.max(axis=1).argmin())
    sq = ((X[i] - fit.means) ** 2).sum(axis=1)
    dens = fit.weights * np.exp(-sq / (2 * fit.lam))
    assert fit.responsibilities[i] == pytest.approx(dens / dens.sum(), abs=1e-12)


def test_loglik_matches_direct_density():
    X, truth = blobs(2, [[0, 0, 0], [3, 0, 0], [0, 3, 0]], 20)
    fit = fit_eii(X, 3, truth)
    assert fit.loglik == pytest.approx(eii_loglik(X, fit.weights, fit.means, fit.lam), abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_em_contract(seed, K):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 2)) + rng.integers(0, 3, size=(40, 1)) * 2.5
    fit = fit_eii(X, K, cut(ward_cluster(X), K))
    tr = np.array(fit.loglik_trace)
    assert np.all(np.diff(tr) >= -1e-9)
    np.testing.assert_allclose(fit.responsibilities.sum(axis=1), 1, atol=1e-12)
    if not fit.degenerate:
        assert fit.weights.sum() == pytest.approx(1, abs=1e-12)
        assert np.all(fit.weights > 0) and fit.lam > 0
        assert fit.n_params == (K - 1) + K * 2 + 1
        assert fit.bic == 2.0 * fit.loglik - fit.n_params * math.log(40)


def test_errors():
    X = np.random.default_rng(0).normal(size=(5, 2))
    with pytest.raises(ValueError):
        fit_eii(X, 5, [1, 2, 3, 4, 5])
    with pytest.raises(ValueError):
        fit_eii(X, 2, [1, 1, 1, 1, 1])
    with pytest.raises(ValueError):
        fit_eii(X, 2, [1, 2, 1, 2, 1], tol=0)
    with pytest.raises(ValueError):
        select_model(X, [])
    with pytest.raises(ValueError):
        select_model(X, range(1, 6))


def test_collapse_flagged_degenerate():
    X = np.ones((6, 2))
    fit = fit_eii(X, 1, [1] * 6)
    assert fit.degenerate
    with pytest.raises(DegenerateFitError):
        select_model(X, [1, 2])


def test_single_blob_selects_one():
    X, _ = blobs(3, [[0, 0, 0]], 80)
    sel = select_model(X, range(1, 5))
    assert sel.best.K == 1
    # oracle: recompute every BIC straight from the fitted likelihoods
    for f in sel.fits:
        ll = eii_loglik(X, f.weights, f.means, f.lam)
        assert f.bic == pytest.approx(2 * ll - n_free_params(f.K, 3) * math.log(80), abs=1e-6)
    assert max(sel.bic_curve, key=lambda kv: kv[1])[0] == 1


def test_two_blobs_select_two():
    X, _ = blobs(4, [[0, 0], [10, 0]], 40)
    sel = select_model(X, range(1, 5))
    assert sel.best.K == 2
    assert [k for k, _ in sel.bic_curve] == [1, 2, 3, 4]


def test_single_k_range():
    X, _ = blobs(5, [[0, 0]], 20)
    sel = select_model(X, [1])
    assert sel.best.K == 1 and len(sel.fits) == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rigid_motion_invariance(seed):
    rng = np.random.default_rng(seed)
    X, _ = blobs(seed, [[0, 0, 0], [6, 0, 0]], 25)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    Y = X @ Q + rng.normal(size=3) * 3
    a, b = select_model(X, range(1, 4)), select_model(Y, range(1, 4))
    assert a.best.K == b.best.K
    for fa, fb in zip(a.fits, b.fits):
        assert fa.loglik == pytest.approx(fb.loglik, abs=1e-8)


def test_determinism_and_json():
    X, _ = blobs(6, [[0, 0], [5, 5]], 30)
    a, b = select_model(X, range(1, 4)), select_model(X, range(1, 4))
    assert a.best.to_json() == b.best.to_json()
    doc = json.loads(a.best.to_json())
    assert doc["K"] == a.best.K and doc["bic"] == a.best.bic
