import numpy as np
import pytest

from specrf.estimator import (
    DivergenceError,
    assemble_empirical_operators,
    fit_iterative,
    fit_spectral,
    load_model,
    mse,
    predict,
    save_model,
)
from specrf.features import feature_matrix, sample_feature_map
from specrf.filters import make_filter
from specrf.oracles import FeatureMapKernel, krr_gram_fit, krr_predict


def _toy(seed=0, n=120, d=2, M=24):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(n)
    fmap = sample_feature_map("gaussian_rff", d, M, {}, seed + 1)
    return fmap, X, y


def test_empirical_operators_shapes_and_scaling():
    fmap, X, y = _toy()
    sigma, sy = assemble_empirical_operators(fmap, X, y)
    Z = feature_matrix(fmap, X)
    np.testing.assert_allclose(sigma, Z.T @ Z / len(y), atol=1e-13)
    np.testing.assert_allclose(sy, Z.T @ y / len(y), atol=1e-13)
    # the trace equals the mean squared embedding norm, capped by kappa^2
    assert np.trace(sigma) <= fmap.kappa_sq + 1e-12


def test_ridge_primal_equals_dual():
    fmap, X, y = _toy(seed=3)
    lam = 0.05
    model = fit_spectral(fmap, X, y, make_filter("tikhonov"), lam=lam)
    alpha = krr_gram_fit(FeatureMapKernel(fmap), X, y, lam)
    X_test = np.random.default_rng(9).standard_normal((50, 2))
    dual = krr_predict(FeatureMapKernel(fmap), X, alpha, X_test)
    np.testing.assert_allclose(predict(model, X_test), dual, atol=1e-9)


@pytest.mark.parametrize("kind,kwargs", [
    ("landweber", {"alpha": 0.8}),
    ("heavyball", {"alpha": 0.2, "beta": 0.7}),
])
def test_spectral_and_iterative_paths_agree(kind, kwargs):
    fmap, X, y = _toy(seed=5)
    filt = make_filter(kind, **kwargs)
    T = 40
    a = fit_spectral(fmap, X, y, filt, iterations=T)
    b = fit_iterative(fmap, X, y, filt, T)
    scale = max(np.max(np.abs(a.theta)), 1e-30)
    assert np.max(np.abs(a.theta - b.theta)) / scale < 1e-8
    assert a.lam == b.lam


def test_fit_invariant_under_row_permutation():
    fmap, X, y = _toy(seed=6)
    perm = np.random.default_rng(0).permutation(len(y))
    a = fit_spectral(fmap, X, y, make_filter("tikhonov"), lam=0.1)
    b = fit_spectral(fmap, X[perm], y[perm], make_filter("tikhonov"), lam=0.1)
    np.testing.assert_allclose(a.theta, b.theta, atol=1e-10)


def test_gradient_descent_loss_monotone():
    fmap, X, y = _toy(seed=7)
    model = fit_iterative(fmap, X, y, make_filter("landweber", alpha=0.9), 200, record_loss=True)
    assert model.losses is not None and len(model.losses) == 201
    assert np.all(np.diff(model.losses) <= 1e-12)


def test_snapshots_track_requested_iterations():
    fmap, X, y = _toy(seed=8)
    model = fit_iterative(
        fmap, X, y, make_filter("landweber", alpha=0.5), 16, snapshots=(1, 4, 16)
    )
    assert set(model.snapshots) == {1, 4, 16}
    np.testing.assert_array_equal(model.snapshots[16], model.theta)
    # earlier snapshots are genuinely different iterates
    assert not np.allclose(model.snapshots[1], model.theta)


def test_unstable_step_size_detected_before_iterating():
    # the designer map below has operator norm well above 1/alpha
    fmap = sample_feature_map(
        "designer_finite_rank", 1, 64, {"eigenvalues": np.full(64, 5.0)}, 0
    )
    X = np.random.default_rng(0).uniform(0, 1, (100, 1))
    y = np.ones(100)
    with pytest.raises(DivergenceError, match="unstable"):
        fit_iterative(fmap, X, y, make_filter("landweber", alpha=1.0), 10)


def test_fit_spectral_argument_validation():
    fmap, X, y = _toy()
    tik = make_filter("tikhonov")
    with pytest.raises(ValueError, match="lam or iterations"):
        fit_spectral(fmap, X, y, tik)
    with pytest.raises(ValueError, match="iteration count"):
        fit_spectral(fmap, X, y, tik, iterations=5)
    with pytest.raises(ValueError, match="lam must lie"):
        fit_spectral(fmap, X, y, tik, lam=1.5)
    big = sample_feature_map("gaussian_rff", 2, 5000, {}, 0)
    with pytest.raises(ValueError, match="eigensolver cap"):
        fit_spectral(big, X, y, tik, lam=0.1, eig_dim_cap=4096)


def test_iterative_filter_iteration_count_derived_from_lambda():
    fmap, X, y = _toy(seed=9)
    model = fit_spectral(fmap, X, y, make_filter("landweber", alpha=0.5), lam=0.125)
    assert model.iterations == 16
    assert model.fit_path == "spectral"


def test_model_roundtrip_through_disk(tmp_path):
    fmap, X, y = _toy(seed=10)
    model = fit_spectral(fmap, X, y, make_filter("tikhonov"), lam=0.07)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    np.testing.assert_array_equal(loaded.theta, model.theta)
    X_test = np.random.default_rng(2).standard_normal((20, 2))
    np.testing.assert_array_equal(predict(loaded, X_test), predict(model, X_test))
    assert loaded.train_fingerprint == model.train_fingerprint


def test_mse_rejects_empty_test_set():
    fmap, X, y = _toy()
    model = fit_spectral(fmap, X, y, make_filter("tikhonov"), lam=0.1)
    with pytest.raises(ValueError, match="empty"):
        mse(model, np.zeros((0, 2)), np.zeros(0))


def test_length_mismatch_rejected():
    fmap, X, y = _toy()
    with pytest.raises(ValueError, match="mismatch"):
        assemble_empirical_operators(fmap, X, y[:-1])
