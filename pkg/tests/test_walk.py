import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrw import (EnvironmentSpec, Stream, UrnState, WalkStop,
                 exact_walk_oracle, parse_function, simulate_urn,
                 simulate_walk, walk_functionals)
from rrw.errors import HorizonTooLarge, InvalidParameter

ENV = EnvironmentSpec.homogeneous(UrnState(0.5, 2.0))


def test_constant_half_step_mean():
    rec = simulate_walk(parse_function("const(0.5)"), ENV,
                        WalkStop("horizon", n=100_000), Stream(1))
    assert abs(rec.final_pos) <= 4 * np.sqrt(100_000)


def test_biased_walk_drift():
    rec = simulate_walk(parse_function("const(0.9)"), ENV,
                        WalkStop("horizon", n=100_000), Stream(2), record_path=False)
    assert rec.final_pos / 100_000 == pytest.approx(0.8, abs=0.02)


def test_determinism():
    f = parse_function("quartic(2)")
    r1 = simulate_walk(f, ENV, WalkStop("horizon", n=5000), Stream(3))
    r2 = simulate_walk(f, ENV, WalkStop("horizon", n=5000), Stream(3))
    np.testing.assert_array_equal(r1.path, r2.path)


def test_stop_validation():
    with pytest.raises(InvalidParameter):
        WalkStop("horizon")
    with pytest.raises(InvalidParameter):
        WalkStop("hit_level", a=0)
    with pytest.raises(InvalidParameter):
        WalkStop("nonsense", n=5)


@given(st.integers(min_value=0, max_value=2 ** 32))
@settings(max_examples=25, deadline=None)
def test_record_invariants(seed):
    f = parse_function("mix")
    rec = simulate_walk(f, ENV, WalkStop("horizon", n=2000), Stream(seed))
    X = rec.path
    steps = np.diff(X)
    assert np.all(np.abs(steps) == 1)
    # ledger counts match the path exactly
    sites, counts = np.unique(X[:-1], return_counts=True)
    for x, c in zip(sites, counts):
        assert rec.site_visits[int(x)] == int(c)
    rights = {int(x): 0 for x in sites}
    for x, s in zip(X[:-1], steps):
        if s == 1:
            rights[int(x)] += 1
    assert rights == rec.site_rights
    series = walk_functionals(rec, f)
    assert series.identity_violations() == 0
    np.testing.assert_allclose(series.m_plus, series.x_plus - series.d_plus, atol=1e-12)
    assert series.x_plus[-1] == rec.x_plus
    assert series.U[-1] == rec.U
    assert series.d_plus[-1] == pytest.approx(rec.d_plus, abs=1e-9)


def test_hit_levels_recorded():
    rec = simulate_walk(parse_function("const(0.75)"), ENV,
                        WalkStop("hit_level", a=3, cap=10 ** 6), Stream(4),
                        record_path=False)
    assert rec.status == "stopped"
    assert set(rec.hits) == {1, 2, 3}
    assert rec.hits[1].T <= rec.hits[2].T <= rec.hits[3].T == rec.steps


def test_cap_reported_not_fatal():
    rec = simulate_walk(parse_function("const(0.25)"), ENV,
                        WalkStop("hit_level", a=50, cap=2000), Stream(5),
                        record_path=False)
    assert rec.status == "cap"
    assert rec.steps == 2000


def test_hit_either():
    rec = simulate_walk(parse_function("const(0.5)"), ENV,
                        WalkStop("hit_either", a=10, cap=10 ** 6), Stream(6),
                        record_path=False)
    assert rec.status == "stopped"
    assert abs(rec.final_pos) == 10


def test_urn_extraction_consistency():
    # the site-x urn extracted from the walk coincides with an urn process
    # driven by the uniforms the walk consumed at x
    f = parse_function("quartic(2)")
    rec = simulate_walk(f, ENV, WalkStop("horizon", n=4000), Stream(7))
    gen = Stream(7).generator()
    uniforms = gen.random(rec.steps)
    X = rec.path
    for x in (0, 1, -1):
        if x not in rec.site_visits:
            continue
        mask = X[:-1] == x
        u_x = uniforms[mask]
        st0 = ENV.site(x)
        red, l = st0.red_mass, st0.l
        for u in u_x:
            if u < float(f(red / l)):
                red += 1.0
            l += 1.0
        assert rec.site_visits[x] == int(mask.sum())
        assert rec.site_rights[x] == int(round(red - st0.red_mass))


def test_asymmetric_environment_used():
    env = EnvironmentSpec(w0=UrnState(0.5, 2.0), w_plus=UrnState(0.9, 10.0),
                          w_minus=UrnState(0.1, 10.0))
    f = parse_function("polya")
    rec = simulate_walk(f, env, WalkStop("horizon", n=20_000), Stream(8),
                        record_path=False)
    # right sites push right, left sites push left: the walk escapes
    assert abs(rec.final_pos) > 100


def test_oracle_simple_random_walk():
    orc = exact_walk_oracle(parse_function("const(0.5)"), ENV, 2)
    assert orc.dist_at(0) == pytest.approx(0.5, abs=1e-15)
    assert orc.dist_at(2) == pytest.approx(0.25, abs=1e-15)
    assert orc.dist_at(-2) == pytest.approx(0.25, abs=1e-15)
    assert orc.total_prob == pytest.approx(1.0, abs=1e-12)


def test_oracle_first_step_probability():
    orc = exact_walk_oracle(parse_function("quartic(2)"), ENV, 1, levels=(1,))
    assert orc.hit_prob[1] == pytest.approx(0.5, abs=1e-15)


def test_oracle_martingale_exactness_small():
    for spec in ("const(0.75)", "quartic(2)"):
        orc = exact_walk_oracle(parse_function(spec), ENV, 8)
        assert np.max(np.abs(orc.e_m_plus)) <= 1e-12, spec


def test_oracle_horizon_guard():
    with pytest.raises(HorizonTooLarge):
        exact_walk_oracle(parse_function("const(0.5)"), ENV, 17)


def test_oracle_matches_mc():
    f = parse_function("mix")
    orc = exact_walk_oracle(f, ENV, 10)
    h = 10
    replicas = 4000
    base = Stream(9)
    finals = np.array([
        simulate_walk(f, ENV, WalkStop("horizon", n=h), base.child(r),
                      record_path=False).final_pos
        for r in range(replicas)
    ])
    for j in (-2, 0, 2):
        p = orc.dist_at(j)
        phat = np.mean(finals == j)
        se = np.sqrt(max(p * (1 - p), 1e-9) / replicas)
        assert abs(phat - p) <= 4 * se, j


def test_oracle_path_functional():
    # E[X_h] via the generic path functional equals the mean of the law
    orc = exact_walk_oracle(parse_function("const(0.75)"), ENV, 6,
                            path_functional=lambda s: float(s.sum()))
    mean_from_dist = sum(k * p for k, p in orc.final_dist.items())
    assert orc.functional_means["path"] == pytest.approx(mean_from_dist, abs=1e-12)
    assert orc.functional_means["path"] == pytest.approx(6 * 0.5, abs=1e-12)


def test_environment_json_round_trip():
    env = EnvironmentSpec(w0=UrnState(0.5, 1.0), w_plus=UrnState(1 / 3, 1.5),
                          w_minus=UrnState(2 / 3, 1.5))
    again = EnvironmentSpec.from_json_dict(env.to_json_dict())
    assert again == env
    env2 = EnvironmentSpec(w0=UrnState(0.5, 2.0), w_plus=UrnState(0.5, 2.0))
    assert "w_minus" not in env2.to_json_dict()
    assert env2.w_minus_effective == env2.w_plus
