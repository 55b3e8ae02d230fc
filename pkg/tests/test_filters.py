import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specrf.filters import (
    Heavyball,
    Landweber,
    audit_filter,
    filter_value,
    make_filter,
    qualification_sufficient,
    residual_value,
)


def test_tikhonov_known_values():
    f = make_filter("tikhonov")
    assert filter_value(f, 0.5, 0.1) == pytest.approx(1.0 / 0.6)
    assert residual_value(f, 0.5, 0.1) == pytest.approx(0.1 / 0.6)
    # residual identity r = 1 - t*phi holds vectorized
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(f.residual(t, 0.3), 1.0 - t * f.value(t, 0.3))


def test_cutoff_inverts_above_threshold_only():
    f = make_filter("spectral_cutoff")
    t = np.array([0.01, 0.1, 0.5, 1.0])
    lam = 0.1
    np.testing.assert_allclose(f.value(t, lam), [0.0, 10.0, 2.0, 1.0])
    np.testing.assert_allclose(f.residual(t, lam), [1.0, 0.0, 0.0, 0.0])


def test_landweber_one_step_is_step_size():
    f = Landweber(alpha=0.7)
    t = np.linspace(0.0, 1.0, 7)
    np.testing.assert_allclose(f.value_at_iterations(t, 1), 0.7, atol=1e-15)


def test_landweber_many_steps_approaches_inverse():
    f = Landweber(alpha=1.0)
    t = np.array([0.2, 0.5, 0.9])
    np.testing.assert_allclose(f.value_at_iterations(t, 5000), 1.0 / t, rtol=1e-12)


def test_landweber_matches_direct_product_form():
    f = Landweber(alpha=0.3)
    t = np.array([1e-8, 1e-4, 0.1, 0.9, 2.5])
    T = 37
    # the naive form loses ~8 digits to cancellation at the smallest t, so
    # compare loosely there; the filter itself is the numerically stable one
    direct = (1.0 - (1.0 - 0.3 * t) ** T) / t
    np.testing.assert_allclose(f.value_at_iterations(t, T), direct, rtol=1e-6)


def test_heavyball_zero_momentum_equals_plain_gradient():
    hb = Heavyball(alpha=0.6, beta=0.0)
    lw = Landweber(alpha=0.6)
    t = np.linspace(0.0, 1.0, 9)
    for T in (1, 3, 10, 50):
        np.testing.assert_allclose(
            hb.value_at_iterations(t, T), lw.value_at_iterations(t, T), rtol=1e-12
        )


def test_iteration_lambda_correspondence():
    f = Landweber(alpha=0.5)
    assert f.lambda_for_iterations(8) == pytest.approx(0.25)
    assert f.iterations_for_lambda(0.25) == 8
    assert f.lambda_for_iterations(1) == 1.0  # capped at 1
    with pytest.raises(ValueError):
        f.lambda_for_iterations(0)
    with pytest.raises(ValueError):
        f.iterations_for_lambda(0.0)


def test_step_size_validation():
    with pytest.raises(ValueError):
        Landweber(alpha=0.0)
    with pytest.raises(ValueError):
        Landweber(alpha=1.5)
    with pytest.raises(ValueError, match="effective step"):
        Heavyball(alpha=0.5, beta=0.9)
    with pytest.raises(ValueError):
        Heavyball(alpha=0.1, beta=1.0)


def test_make_filter_unknown_kind():
    with pytest.raises(ValueError, match="unknown filter kind"):
        make_filter("wiener")


def test_qualification_threshold():
    tik = make_filter("tikhonov")
    assert qualification_sufficient(tik, 0.5)
    assert not qualification_sufficient(tik, 0.75)
    for kind in ("spectral_cutoff", "landweber"):
        assert qualification_sufficient(make_filter(kind), 3.0)


@pytest.mark.parametrize(
    "filt",
    [
        make_filter("tikhonov"),
        make_filter("spectral_cutoff"),
        make_filter("landweber", alpha=1.0),
        make_filter("landweber", alpha=0.25),
        make_filter("heavyball", alpha=0.1, beta=0.9),
        make_filter("heavyball", alpha=0.05, beta=0.5),
    ],
)
def test_audits_pass_for_declared_constants(filt):
    report = audit_filter(filt)
    assert report.passed, report.to_json()
    assert report.measured["D"] <= filt.D + 1e-9
    assert report.measured["E"] <= filt.E + 1e-9
    assert report.measured["c0"] <= filt.c0 + 1e-9


def test_audit_exposes_tikhonov_saturation():
    # the ratio sup_t |r(t)| t^2 / lam^2 diverges like 1/lam for this filter
    report = audit_filter(make_filter("tikhonov"), q_values=(1.0, 2.0))
    entry = {e.q: e for e in report.qualification}
    assert entry[1.0].passed
    assert entry[2.0].passed is False
    assert entry[2.0].measured > 100.0
    # exceeding the declared qualification does not sink the report
    assert report.passed


def test_heavyball_constants_reported_not_certified():
    report = audit_filter(make_filter("heavyball", alpha=0.1, beta=0.9))
    assert all(e.passed is None for e in report.qualification)
    with pytest.raises(KeyError):
        report.measured_cq(3.0)


def test_audit_grid_floor():
    with pytest.raises(ValueError, match="10"):
        audit_filter(make_filter("tikhonov"), t_grid=np.linspace(0.01, 1, 10), lam_grid=np.linspace(0.01, 1, 10))


def test_audit_report_json_shape():
    import json

    rep = json.loads(audit_filter(make_filter("landweber", alpha=1.0)).to_json())
    assert rep["filter"] == "landweber"
    assert set(rep["constants_declared"]) == {"D", "E", "c0"}
    assert rep["pass"] is True


@settings(max_examples=50, deadline=None)
@given(
    t=st.floats(0.0, 2.0),
    lam=st.floats(1e-4, 1.0),
)
def test_residual_bounded_for_convex_filters(t, lam):
    for kind in ("tikhonov", "spectral_cutoff"):
        f = make_filter(kind)
        assert 0.0 <= float(f.residual(np.array([t]), lam)[0]) <= 1.0 + 1e-12


@settings(max_examples=30, deadline=None)
@given(
    alpha=st.floats(0.05, 1.0),
    T=st.integers(1, 200),
    t=st.floats(0.0, 1.0),
)
def test_landweber_residual_contracts(alpha, T, t):
    f = Landweber(alpha=alpha)
    phi = float(f.value_at_iterations(np.array([t]), T)[0])
    res = 1.0 - t * phi
    assert -1e-12 <= res <= 1.0 + 1e-12
    assert res == pytest.approx((1.0 - alpha * t) ** T, abs=1e-9)
