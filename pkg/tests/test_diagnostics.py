import json

import numpy as np
import pytest

from specrf.diagnostics import (
    HardLearningError,
    compute_f_star,
    diagnostics_record,
    effective_dimension,
    effective_dimension_comparison,
    excess_risk_exact,
    make_designer_problem,
    sample_dataset,
    sup_norm_f_star,
)
from specrf.estimator import fit_spectral
from specrf.features import sample_feature_map
from specrf.filters import make_filter
from specrf.oracles import GaussianKernel


def test_problem_construction_known_coefficients():
    p = make_designer_problem(J=4, b=1.0, r=0.5, noise_std=0.0, seed=3)
    np.testing.assert_allclose(p.eigenvalues, [1.0, 0.5, 1 / 3, 0.25])
    np.testing.assert_allclose(
        p.h_coeffs, [0.83811635, 0.41905818, 0.27937212, 0.20952909], atol=1e-8
    )
    np.testing.assert_allclose(
        p.g_coeffs, [0.83811635, 0.29631888, 0.16129557, 0.10476454], atol=1e-8
    )
    assert np.linalg.norm(p.h_coeffs) == pytest.approx(p.R)


def test_hard_learning_regime_rejected():
    with pytest.raises(HardLearningError):
        make_designer_problem(J=8, b=0.5, r=0.25)


def test_construction_validation():
    with pytest.raises(ValueError):
        make_designer_problem(J=1, b=1.0, r=0.5)
    with pytest.raises(ValueError):
        make_designer_problem(J=4, b=2.0, r=0.5)
    with pytest.raises(ValueError):
        make_designer_problem(J=4, b=1.0, r=-0.5)
    with pytest.raises(ValueError, match="noise_std"):
        make_designer_problem(J=4, b=1.0, r=0.5, noise_std=-1.0)
    with pytest.raises(ValueError, match="h_weights"):
        make_designer_problem(J=4, b=1.0, r=0.5, h_weights=np.zeros(4))


def test_effective_dimension_small_case():
    assert effective_dimension(np.array([1.0, 0.25]), 0.25) == pytest.approx(1.3)
    with pytest.raises(ValueError):
        effective_dimension(np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        effective_dimension(np.array([-1.0]), 0.1)


def test_dataset_seeded_and_noiseless_exact():
    p = make_designer_problem(J=6, b=1.0, r=0.5, noise_std=0.0, seed=0)
    X1, y1 = sample_dataset(p, 50, 11)
    X2, y2 = sample_dataset(p, 50, 11)
    np.testing.assert_array_equal(X1, X2)
    np.testing.assert_array_equal(y1, y2)
    np.testing.assert_allclose(y1, p.target_values(X1[:, 0]), atol=1e-13)
    assert X1.min() >= 0.0 and X1.max() <= 1.0


def test_filtered_target_cutoff_bias_is_exact_tail_norm():
    p = make_designer_problem(J=8, b=1.0, r=0.5, noise_std=0.0, seed=0)
    lam = 0.3  # keeps eigenvalues 1, 1/2, 1/3 and drops the rest
    _, bias = compute_f_star(p, make_filter("spectral_cutoff"), lam)
    kept = p.eigenvalues >= lam
    expected = float(np.linalg.norm(p.g_coeffs[~kept]))
    assert bias == pytest.approx(expected, abs=1e-14)


def test_filtered_target_ridge_known_values():
    p = make_designer_problem(J=4, b=1.0, r=0.5, noise_std=0.0, seed=3)
    coeffs, bias = compute_f_star(p, make_filter("tikhonov"), 0.1)
    np.testing.assert_allclose(
        coeffs, [0.76192396, 0.2469324, 0.12407351, 0.07483182], atol=1e-8
    )
    assert bias == pytest.approx(0.10259510240426205, abs=1e-10)


def test_exact_recovery_with_full_rank_features():
    p = make_designer_problem(J=8, b=1.0, r=1.0, noise_std=0.0, seed=0)
    X, y = sample_dataset(p, 400, 5)
    lam = 0.5 * float(p.eigenvalues[-1])
    model = fit_spectral(p.truncated_map(8), X, y, make_filter("spectral_cutoff"), lam=lam)
    risk = excess_risk_exact(p, model)
    assert risk["total"] < 1e-8
    assert risk["bias"] == 0.0


def test_excess_risk_decomposition_triangle():
    p = make_designer_problem(J=16, b=1.0, r=0.5, noise_std=0.2, seed=0)
    X, y = sample_dataset(p, 300, 7)
    model = fit_spectral(p.truncated_map(8), X, y, make_filter("tikhonov"), lam=0.05)
    risk = excess_risk_exact(p, model)
    assert risk["total"] <= risk["bias"] + risk["variance"] + 1e-12


def test_excess_risk_rejects_foreign_map():
    p = make_designer_problem(J=8, b=1.0, r=0.5, noise_std=0.0, seed=0)
    other = sample_feature_map(
        "designer_finite_rank", 1, 4, {"eigenvalues": np.full(4, 0.1)}, 0
    )
    X, y = sample_dataset(p, 50, 0)
    model = fit_spectral(other, X, y, make_filter("tikhonov"), lam=0.1)
    with pytest.raises(ValueError, match="truncation"):
        excess_risk_exact(p, model)
    rff = sample_feature_map("gaussian_rff", 1, 4, {}, 0)
    model = fit_spectral(rff, X, y, make_filter("tikhonov"), lam=0.1)
    with pytest.raises(ValueError, match="designer"):
        excess_risk_exact(p, model)


def test_truncated_map_is_prefix():
    p = make_designer_problem(J=10, b=0.5, r=1.0, noise_std=0.0, seed=0)
    t = p.truncated_map(4)
    np.testing.assert_array_equal(t.params["eigenvalues"], p.eigenvalues[:4])
    t_full = p.truncated_map(99)
    assert t_full.num_samples == 10
    with pytest.raises(ValueError):
        p.truncated_map(0)


def test_sup_norm_within_monitored_bound():
    p = make_designer_problem(J=32, b=1.0, r=0.5, noise_std=0.0, seed=0)
    for lam in (0.01, 0.1, 0.5):
        out = sup_norm_f_star(p, make_filter("tikhonov"), lam, grid_size=2001)
        assert out["within_bound"]
        assert out["status"] == "monitored"


def test_effective_dimension_comparison_on_rff():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((600, 2))
    fmap = sample_feature_map("gaussian_rff", 2, 256, {}, 1)
    out = effective_dimension_comparison(fmap, GaussianKernel(2, 1.0), X, 0.05)
    assert out["status"] == "ok"
    assert 0.2 < out["ratio"] < out["threshold"]
    with pytest.raises(ValueError, match="500"):
        effective_dimension_comparison(fmap, GaussianKernel(2, 1.0), X[:100], 0.05)


def test_diagnostics_record_is_json_line():
    line = diagnostics_record("bias", 0.1, 0.05, 0.2, "ok")
    parsed = json.loads(line)
    assert parsed == {
        "bound": 0.2,
        "lambda": 0.1,
        "quantity": "bias",
        "status": "ok",
        "value": 0.05,
    }
