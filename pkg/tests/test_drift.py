import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrw import (DriftConfig, Stream, UrnState, clt_check, drift_parts_profile,
                 drift_series, estimate_delta_inf, exact_urn_dp, make_family,
                 parse_function)
from rrw.drift import (CONVERGENT, DIVERGENT_MINUS, DIVERGENT_PLUS,
                       PARTS_INFINITE, UNKNOWN, classify_regime,
                       fit_growth_exponent, fit_tail_exponent, fit_tail_sqrt)
from rrw.errors import InvalidParameter, UnsupportedRegime


def test_series_zero_integrand():
    s = drift_series(parse_function("const(0.5)"), UrnState(0.5, 2.0), 100, Stream(0))
    np.testing.assert_array_equal(s.values, np.zeros(101))


def test_series_constant_integrand():
    s = drift_series(parse_function("const(0.75)"), UrnState(0.5, 2.0), 100, Stream(0))
    np.testing.assert_allclose(s.values, 0.5 * np.arange(1, 102), atol=1e-12)
    np.testing.assert_array_equal(s.neg, np.zeros(101))


def test_series_exact_odd_symmetry():
    s = drift_series(parse_function("polya"), UrnState(0.5, 2.0), 1000, exact=True)
    assert np.max(np.abs(s.values)) <= 1e-12


@given(st.sampled_from(["linear(0.4)", "quartic(2)", "mix"]),
       st.integers(min_value=0, max_value=2 ** 32))
@settings(max_examples=20, deadline=None)
def test_decomposition_pathwise(spec, seed):
    s = drift_series(parse_function(spec), UrnState(0.5, 2.0), 300, Stream(seed))
    np.testing.assert_array_equal(s.values, s.pos - s.neg)
    assert np.all(np.diff(s.pos) >= 0) and np.all(np.diff(s.neg) >= 0)
    assert np.max(np.abs(np.diff(s.values))) <= 1.0


@pytest.mark.parametrize(
    ("spec", "regime"),
    [
        ("const(0.5)", CONVERGENT),
        ("quartic(2)", CONVERGENT),
        ("family(quartic(2), 3)", CONVERGENT),
        ("const(0.75)", DIVERGENT_PLUS),
        ("const(0.25)", DIVERGENT_MINUS),
        ("mix", DIVERGENT_PLUS),
        ("linear(0.4)", PARTS_INFINITE),
        ("family(quartic(2), 8)", UNKNOWN),
    ],
)
def test_regimes(spec, regime):
    rep = parse_function(spec).analysis()
    assert classify_regime(rep)[0] == regime


def test_estimate_const_half():
    est = estimate_delta_inf(parse_function("const(0.5)"), UrnState(0.5, 2.0),
                             DriftConfig(n_dp=500, method="dp"))
    assert est.regime == CONVERGENT
    assert est.mean == pytest.approx(0.0, abs=1e-12)
    assert est.stderr == 0.0


def test_estimate_divergent_plus():
    est = estimate_delta_inf(parse_function("const(0.75)"), UrnState(0.5, 2.0),
                             DriftConfig(n_dp=500))
    assert est.regime == DIVERGENT_PLUS
    assert math.isinf(est.mean) and est.mean > 0
    opp, band = est.opposite_part
    assert opp == pytest.approx(0.0, abs=1e-12)  # f >= 1/2 means no negative part
    d = est.to_json_dict()
    assert d["mean"] == "+inf"


def test_estimate_quartic_dp():
    est = estimate_delta_inf(parse_function("quartic(2)"), UrnState(0.5, 2.0),
                             DriftConfig(n_dp=4000, method="dp"))
    assert est.regime == CONVERGENT
    # regression value from the exact DP (truncation + sqrt tail band)
    assert est.mean == pytest.approx(0.10652, abs=2e-3)
    assert est.stderr == 0.0
    assert est.tail_model == "sqrt"


def test_estimate_parts_infinite():
    est = estimate_delta_inf(parse_function("linear(0.4)"), UrnState(0.5, 2.0),
                             DriftConfig(n_dp=2000))
    assert est.regime == PARTS_INFINITE
    assert math.isnan(est.mean)
    assert est.growth["pos"] == pytest.approx(0.5, abs=0.2)
    assert est.growth["neg"] == pytest.approx(0.5, abs=0.2)


def test_estimate_mc_agrees_with_dp():
    f = parse_function("quartic(2)")
    init = UrnState(0.5, 2.0)
    dp = estimate_delta_inf(f, init, DriftConfig(n_dp=2000, method="dp"))
    mc = estimate_delta_inf(f, init, DriftConfig(n_mc=2000, replicas=4000,
                                                 method="mc", seed=5))
    assert abs(mc.mean - dp.mean) <= 4 * mc.stderr + mc.tail_error + dp.tail_error


def test_estimate_dp_mc_tail_combined():
    f = parse_function("quartic(2)")
    est = estimate_delta_inf(f, UrnState(0.5, 2.0),
                             DriftConfig(n_dp=1000, n_mc=4000, replicas=2000,
                                         method="dp+mc+tail", seed=3))
    assert est.method == "dp+mc+tail"
    assert est.N == 4000
    assert est.mean == pytest.approx(0.10652, abs=5e-3)


def test_estimate_unknown_regime_truncated():
    est = estimate_delta_inf(parse_function("family(quartic(2), 8)"), UrnState(0.5, 2.0),
                             DriftConfig(n_dp=500))
    assert est.regime == UNKNOWN
    assert est.method == "dp-truncated"
    assert math.isfinite(est.mean)


def test_u_monotone_dp_values():
    # exact DP drift at N = 1000 is nondecreasing in the family scale u
    base = parse_function("quartic(2)")
    vals = []
    for u in (0.5, 1.0, 2.0, 4.0):
        law = exact_urn_dp(make_family(base, u), UrnState(0.5, 2.0), 1000)
        vals.append(law.delta_mean[-1])
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_profile_quartic_neg_part_zero():
    prof = drift_parts_profile(parse_function("quartic(2)"), UrnState(0.5, 2.0),
                               1000, 500, stream=9)
    np.testing.assert_array_equal(prof.neg_mean, np.zeros(len(prof.checkpoints)))
    assert prof.neg_exponent is None


def test_profile_requires_minimum_horizon():
    with pytest.raises(InvalidParameter):
        drift_parts_profile(parse_function("mix"), UrnState(0.5, 2.0), 50, 100)


def test_profile_exact_mode_matches_dp():
    f = parse_function("linear(0.4)")
    prof = drift_parts_profile(f, UrnState(0.5, 2.0), 400, 0, exact=True)
    law = exact_urn_dp(f, UrnState(0.5, 2.0), 400)
    np.testing.assert_allclose(prof.pos_mean, law.delta_pos[prof.checkpoints], atol=1e-12)


def test_profile_csv(tmp_path):
    import io

    prof = drift_parts_profile(parse_function("mix"), UrnState(0.5, 2.0), 200, 100,
                               stream=2)
    buf = io.StringIO()
    prof.to_csv(buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "N,mean,stderr,pos_part,neg_part"
    assert len(lines) == len(prof.checkpoints) + 1


def test_clt_targets():
    rep = clt_check(parse_function("const(0.5)"), 0.5, 400, 2000, stream=1)
    assert rep.target_variance == pytest.approx(0.25, abs=1e-15)
    rep = clt_check(parse_function("linear(0.4)"), 0.5, 400, 2000, stream=1)
    assert rep.target_variance == pytest.approx(1.25, abs=1e-12)


def test_clt_unsupported_regime():
    with pytest.raises(UnsupportedRegime):
        clt_check(parse_function("linear(0.6)"), 0.5, 100, 100)


def test_clt_requires_fixed_point():
    with pytest.raises(InvalidParameter):
        clt_check(parse_function("const(0.75)"), 0.5, 100, 100)


def test_clt_const_converges():
    rep = clt_check(parse_function("const(0.5)"), 0.5, 2000, 4000, stream=12)
    assert rep.empirical_variance == pytest.approx(0.25, rel=0.1)
    assert rep.retained == 4000 or rep.retained >= 3990


def test_fit_helpers():
    ns = np.geomspace(100, 10000, 20)
    ys = 2.0 - 3.0 * ns ** -0.5
    A, c, rms = fit_tail_sqrt(ns, ys)
    assert (A, c) == (pytest.approx(2.0, abs=1e-9), pytest.approx(3.0, abs=1e-9))
    assert rms <= 1e-12
    beta = fit_tail_exponent(ns, 5.0 - 2.0 * ns ** -0.8)
    assert beta == pytest.approx(0.8, abs=0.01)
    slope = fit_growth_exponent(ns, 0.7 * ns ** 0.43)
    assert slope == pytest.approx(0.43, abs=1e-9)
    assert fit_growth_exponent(ns, np.zeros(20)) is None


def test_tail_exponent_quartic_is_near_one():
    # the true remainder of E[delta_N] for the quartic decays like 1/N
    # (increments track the fourth moment of alpha_n - 1/2), so the fitted
    # diagnostic exponent sits near 1, far above the sqrt model
    law = exact_urn_dp(parse_function("quartic(2)"), UrnState(0.5, 2.0), 4000)
    cps = np.unique(np.round(np.geomspace(400, 4000, 12)).astype(int))
    beta = fit_tail_exponent(cps, law.delta_mean[cps])
    assert beta == pytest.approx(1.0, abs=0.15)
