import numpy as np
import pytest

from rrw import (Stream, UrnState, couple_function_order, couple_mass_order,
                 couple_off_center, exact_urn_dp, parse_function,
                 run_coupling_batch)
from rrw.errors import (IntegralityViolation, PreconditionOrder,
                        SymmetryViolation)


def test_equal_functions_identical_trajectories():
    f = parse_function("quartic(2)")
    run = couple_function_order(f, f, UrnState(0.5, 2.0), 500, Stream(4))
    np.testing.assert_array_equal(run.alpha, run.beta)
    assert run.violations == 0


def test_function_order_dominance():
    f = parse_function("quartic(1)")
    g = parse_function("quartic(2)")
    run = couple_function_order(f, g, UrnState(0.5, 2.0), 2000, Stream(8))
    assert run.violations == 0
    assert np.all(run.alpha <= run.beta + 1e-15)


def test_function_order_precondition():
    with pytest.raises(PreconditionOrder):
        couple_function_order(parse_function("linear(0.4)"), parse_function("const(0.5)"),
                              UrnState(0.5, 2.0), 10, Stream(0))


def test_off_center_centered_start_identical():
    f = parse_function("quartic(2)")
    run = couple_off_center(f, 0.5, 2.0, 500, Stream(3))
    np.testing.assert_array_equal(run.alpha, run.beta)
    assert run.violations == 0


def test_off_center_dominance():
    # alpha = 3/4, l = 2: excess 2*alpha*l - l = 1 is an integer
    run = couple_off_center(parse_function("quartic(2)"), 0.75, 2.0, 2000, Stream(5))
    assert run.violations == 0
    assert np.all(np.abs(run.beta - 0.5) <= np.abs(run.alpha - 0.5) + 1e-12)


def test_off_center_integrality():
    with pytest.raises(IntegralityViolation):
        couple_off_center(parse_function("quartic(2)"), 0.6, 1.0, 10, Stream(0))


def test_off_center_symmetry_check():
    with pytest.raises(SymmetryViolation):
        couple_off_center(parse_function("linear(0.4)"), 0.75, 2.0, 10, Stream(0))


def test_off_center_integer_distance_invariant():
    run = couple_off_center(parse_function("mix"), 0.75, 2.0, 1500, Stream(6))
    l = 2.0 * 2.0 + np.arange(1501)
    d = run.alpha * l - run.beta * l
    assert np.max(np.abs(d - np.round(d))) <= 1e-9


def test_mass_order_equal_masses_rejected():
    with pytest.raises(PreconditionOrder):
        couple_mass_order(parse_function("quartic(2)"), 2.0, 2.0, 10, Stream(0))


def test_mass_order_dominance():
    run = couple_mass_order(parse_function("quartic(2)"), 1.0, 2.0, 2000, Stream(7))
    assert run.violations == 0
    assert np.all(np.abs(run.beta - 0.5) + 1e-12 >= np.abs(run.alpha - 0.5))


def test_mass_order_dp_downstream():
    # larger initial mass gives smaller exact drift at N = 1000
    f = parse_function("quartic(2)")
    small = exact_urn_dp(f, UrnState(0.5, 2.0), 1000).delta_mean[-1]
    big = exact_urn_dp(f, UrnState(0.5, 8.0), 1000).delta_mean[-1]
    assert small >= big


def test_shared_stream_determinism():
    f = parse_function("quartic(2)")
    r1 = couple_off_center(f, 0.75, 2.0, 300, Stream(9))
    r2 = couple_off_center(f, 0.75, 2.0, 300, Stream(9))
    np.testing.assert_array_equal(r1.alpha, r2.alpha)
    np.testing.assert_array_equal(r1.beta, r2.beta)


def test_batch_matches_single_runs():
    f = parse_function("quartic(1)")
    g = parse_function("quartic(2)")
    base = Stream(13)
    total = run_coupling_batch("order", 200, 5, base, f=f, g=g, init=UrnState(0.5, 2.0))
    singles = sum(
        couple_function_order(f, g, UrnState(0.5, 2.0), 200, base.child(s)).violations
        for s in range(5))
    assert total == singles == 0


def test_batch_all_kinds_clean():
    f = parse_function("quartic(2)")
    base = Stream(21)
    assert run_coupling_batch("order", 500, 20, base,
                              f=parse_function("quartic(1)"), g=f,
                              init=UrnState(0.5, 2.0)) == 0
    assert run_coupling_batch("offcenter", 500, 20, base, f=f, alpha=0.75, l=2.0) == 0
    assert run_coupling_batch("massorder", 500, 20, base, f=f, l0=1.0, l1=2.0) == 0


def test_csv_export():
    import io

    run = couple_off_center(parse_function("quartic(2)"), 0.75, 2.0, 5, Stream(1))
    buf = io.StringIO()
    run.to_csv(buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "n,alpha,beta,violation"
    assert len(lines) == 7
