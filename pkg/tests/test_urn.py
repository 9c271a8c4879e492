import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrw import (Stream, UrnState, exact_urn_dp, parse_function, simulate_urn,
                 simulate_urn_batch, urn_step)
from rrw.errors import HorizonTooLarge, InvalidParameter


def test_urn_step_red():
    st_ = urn_step(UrnState(0.5, 2.0), parse_function("const(0.9)"), 0.5)
    assert st_.alpha == pytest.approx(2 / 3, abs=1e-15)
    assert st_.l == 3.0


def test_urn_step_blue():
    st_ = urn_step(UrnState(0.5, 2.0), parse_function("const(0.9)"), 0.95)
    assert st_.alpha == pytest.approx(1 / 3, abs=1e-15)
    assert st_.l == 3.0


def test_urn_step_polya():
    st_ = urn_step(UrnState(2 / 3, 3.0), parse_function("polya"), 0.6)
    assert st_.alpha == pytest.approx(3 / 4, abs=1e-15)
    assert st_.l == 4.0


def test_state_validation():
    with pytest.raises(InvalidParameter):
        UrnState(1.2, 1.0)
    with pytest.raises(InvalidParameter):
        UrnState(0.5, 0.0)


def test_simulate_deterministic():
    f = parse_function("polya")
    t1 = simulate_urn(f, UrnState(0.5, 2.0), 500, Stream(11))
    t2 = simulate_urn(f, UrnState(0.5, 2.0), 500, Stream(11))
    np.testing.assert_array_equal(t1.alphas, t2.alphas)
    np.testing.assert_array_equal(t1.draws, t2.draws)


def test_mass_bookkeeping():
    f = parse_function("quartic(2)")
    t = simulate_urn(f, UrnState(0.5, 2.0), 1000, Stream(5))
    assert t.ls[-1] == 2.0 + 1000
    red_moves = t.alphas[-1] * t.ls[-1] - 0.5 * 2.0
    assert red_moves == pytest.approx(t.draws.sum(), abs=1e-9)


@given(st.sampled_from(["const(0.5)", "linear(0.4)", "polya", "quartic(2)", "mix"]),
       st.integers(min_value=0, max_value=400),
       st.integers(min_value=0, max_value=2 ** 32))
@settings(max_examples=25, deadline=None)
def test_mass_count_invariant(spec, n, seed):
    f = parse_function(spec)
    init = UrnState(0.5, 2.0)
    t = simulate_urn(f, init, n, Stream(seed))
    count = t.alphas[-1] * t.ls[-1] - init.alpha * init.l
    assert abs(count - round(count)) <= 1e-9
    assert 0 <= round(count) <= n


def test_batch_matches_single():
    f = parse_function("quartic(2)")
    init = UrnState(0.5, 2.0)
    base = Stream(3)
    res = simulate_urn_batch(f, init, 200, 8, base, collect=("alpha", "delta"))
    for r in range(8):
        t = simulate_urn(f, init, 200, base.child(r))
        assert res["alpha"][r] == pytest.approx(t.alphas[-1], abs=1e-12)


def test_dp_binomial():
    law = exact_urn_dp(parse_function("const(0.5)"), UrnState(0.5, 2.0), 2)
    np.testing.assert_allclose(law.final_row, [0.25, 0.5, 0.25], atol=1e-15)


def test_dp_polya_uniform_small():
    law = exact_urn_dp(parse_function("polya"), UrnState(0.5, 2.0), 2)
    np.testing.assert_allclose(law.final_row, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)


def test_dp_quartic_delta1():
    # two-step tree by hand: delta_0 = 0 (alpha = 1/2); both one-step states
    # 1/3 and 2/3 give 2f - 1 = 4 (1/6)^4, so E[delta_1] = 4/6^4 = 2/648
    f = parse_function("quartic(2)")
    law = exact_urn_dp(f, UrnState(0.5, 2.0), 1)
    by_hand = 0.0 + (0.5 * (2 * f(1 / 3) - 1) + 0.5 * (2 * f(2 / 3) - 1))
    assert by_hand == pytest.approx(2 / 648, abs=1e-15)
    assert law.delta_mean[1] == pytest.approx(by_hand, abs=1e-14)


def test_dp_rows_normalized():
    law = exact_urn_dp(parse_function("mix"), UrnState(0.5, 2.0), 300, keep_table=True)
    for n in range(0, 301, 50):
        assert abs(law.row(n).sum() - 1.0) <= 1e-12


def test_dp_odd_symmetric_null():
    # f(x) + f(1-x) = 1 and alpha0 = 1/2 force E[alpha_n] = 1/2, E[delta_n] = 0
    for spec in ("polya", "linear(0.4)"):
        law = exact_urn_dp(parse_function(spec), UrnState(0.5, 2.0), 1000)
        assert np.max(np.abs(law.delta_mean)) <= 1e-12, spec
        assert np.max(np.abs(law.alpha_mean - 0.5)) <= 1e-12, spec


def test_dp_horizon_guard():
    with pytest.raises(HorizonTooLarge):
        exact_urn_dp(parse_function("const(0.5)"), UrnState(0.5, 2.0), 30_000)


def test_dp_expectation_helper():
    law = exact_urn_dp(parse_function("polya"), UrnState(0.5, 2.0), 50, keep_table=True)
    # classical uniformity: E[alpha_N] = 1/2 under the exact law
    assert law.expect(lambda a: a) == pytest.approx(0.5, abs=1e-12)


def test_dp_mc_consistency_fast():
    f = parse_function("mix")
    init = UrnState(0.5, 2.0)
    law = exact_urn_dp(f, init, 100)
    res = simulate_urn_batch(f, init, 100, 4000, Stream(17), collect=("alpha", "delta"))
    se = res["delta"].std(ddof=1) / np.sqrt(4000)
    assert abs(res["delta"].mean() - law.delta_mean[100]) <= 4 * se


def test_trajectory_csv(tmp_path):
    t = simulate_urn(parse_function("polya"), UrnState(0.5, 2.0), 5, Stream(1))
    import io

    buf = io.StringIO()
    t.to_csv(buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "n,alpha,l,draw"
    assert len(lines) == 7
    assert lines[1].startswith("0,0.5,2.0,")
    assert lines[-1].split(",")[3] in ("R", "B")


def test_polya_limit_beta_uniform():
    # classical Polya limit from (1/2, 2) is Beta(1,1); KS check at N = 1000
    res = simulate_urn_batch(parse_function("polya"), UrnState(0.5, 2.0), 1000, 10_000,
                             Stream(23), collect=("alpha",))
    alphas = np.sort(res["alpha"])
    ecdf = np.arange(1, len(alphas) + 1) / len(alphas)
    ks = np.max(np.abs(ecdf - alphas))
    assert ks < 0.02
