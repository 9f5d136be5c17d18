import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stoqwalk.errors import CalibrationError
from stoqwalk.graph import cut_stats, is_bad
from stoqwalk.instance import (all_strings, gen_frustrated, gen_hypercube, gen_leaky_chain,
                               gen_random, to_int)
from stoqwalk.walk import (Estimate, WalkKernel, WalkParams, calibrate_T, default_T,
                           escape_bound, escape_probability, exact_rejection_probability,
                           first_bad_times, rejection_probability, transition_matrix,
                           transition_probabilities, verify, visit_frequencies, walk_step)


def test_params_validation():
    with pytest.raises(ValueError):
        WalkParams(0)
    with pytest.raises(ValueError):
        WalkParams(5, laziness=1.0)
    with pytest.raises(ValueError):
        WalkParams(5, trials=0)


def test_default_T():
    assert default_T(gen_leaky_chain(4)) == 100 * 4 * 8


def test_T1_checks_only_the_start():
    h = gen_leaky_chain(2)  # "11" is the only bad counter state
    assert verify(h, "10", WalkParams(1)).accepted
    assert exact_rejection_probability(h, "10", 1) == 0.0
    assert not verify(h, "11", WalkParams(1)).accepted
    assert verify(h, "11", WalkParams(1)).reject_step == 0


def test_last_string_is_not_checked():
    # from 10 the walk reaches 11 with positive probability at step 1, checked only if T >= 2
    h = gen_leaky_chain(2)
    p1 = exact_rejection_probability(h, "10", 1)
    p2 = exact_rejection_probability(h, "10", 2)
    assert p1 == 0.0 and p2 > 0


def test_trace_records():
    h = gen_leaky_chain(3)
    trace = verify(h, "000", WalkParams(50, laziness=0.5, seed=3))
    recs = list(trace.jsonl_records())
    assert recs[0] == {"step": 0, "term": None, "string": "000", "bad": False}
    assert all(set(r) == {"step", "term", "string", "bad"} for r in recs)
    assert any(r["term"] == "stay" for r in recs[1:])
    if not trace.accepted:
        assert recs[-1]["bad"] and trace.reject_step == len(recs) - 1


def test_verify_reproducible():
    h = gen_leaky_chain(4)
    p = WalkParams(100, seed=11)
    assert verify(h, "0000", p).strings() == verify(h, "0000", p).strings()


def test_transition_probabilities_match_matrix():
    h = gen_random(4, 2, 3, seed=2, full_cover=True)
    M = transition_matrix(h, 0.25)
    for x in all_strings(4):
        row = transition_probabilities(h, x, 0.25)
        assert sum(row.values()) == pytest.approx(1.0)
        for y, p in row.items():
            assert M[to_int(x), to_int(y)] == pytest.approx(p)


def test_walk_step_signals_bad():
    h = gen_leaky_chain(3)
    rng = np.random.default_rng(0)
    outcomes = {walk_step(h, "111", rng)[0] for _ in range(200)}
    assert None in outcomes


def test_kernel_step_stays_in_subsets():
    h = gen_random(6, 3, 6, seed=4, full_cover=True)
    kernel = WalkKernel(h)
    rng = np.random.default_rng(1)
    x = rng.integers(0, 64, size=500)
    y, terms = kernel.step(x, rng, 0.0)
    for a, b, t in zip(x, y, terms):
        probs = transition_probabilities(h, format(a, "06b"))
        assert format(b, "06b") in probs


def test_thread_count_does_not_change_estimates():
    h = gen_frustrated(6, 3, 6, seed=1)
    kernel = WalkKernel(h)
    starts = np.full(10_000, 5)
    a = first_bad_times(kernel, starts, 40, 0.0, 7, threads=1)
    b = first_bad_times(kernel, starts, 40, 0.0, 7, threads=4)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("laziness", [0.0, 0.5])
def test_monte_carlo_matches_exact_on_chain(laziness):
    h = gen_leaky_chain(4)
    exact = exact_rejection_probability(h, "0000", 60, laziness)
    est = rejection_probability(h, "0000", WalkParams(60, laziness, 20_000, 5))
    assert abs(est.mean - exact) < 4 * max(est.stderr, 1e-3)


def test_hypercube_never_rejects():
    est = rejection_probability(gen_hypercube(6), "101010", WalkParams(500, 0.0, 500))
    assert est.hits == 0


def test_estimate_wilson_interval():
    est = Estimate.from_counts(50, 100)
    assert est.low == pytest.approx(0.4038, abs=1e-4)
    assert est.high == pytest.approx(0.5962, abs=1e-4)
    zero = Estimate.from_counts(0, 1000)
    assert zero.low == 0.0 and zero.high > 0


def test_rejection_probability_needs_30_trials():
    with pytest.raises(ValueError):
        rejection_probability(gen_hypercube(2), "00", WalkParams(5, trials=10))


def test_calibration_on_frustrated_family():
    family = [gen_frustrated(6, 3, 6, seed=s) for s in range(3)]
    cal = calibrate_T(family, 0.5, 1000, 5, 200, seed=0)
    assert cal.T <= 1000
    assert cal.curve[-1]["min_rejection"] >= 0.5
    rows = list(cal.csv_rows())
    assert rows[0] == ["T", "min_rejection", "mean_rejection"]


def test_calibration_fails_on_frustration_free():
    with pytest.raises(CalibrationError) as info:
        calibrate_T([gen_hypercube(3)], 0.5, 64, 3, 50)
    assert info.value.curve[-1]["T"] == 64


def test_escape_singleton_is_exact():
    h = gen_hypercube(4)
    phi = float(cut_stats(h, ["0000"]).conductance)
    est = escape_probability(h, ["0000"], "pi", 3, 20_000, seed=1)
    assert abs(est.mean - escape_bound(phi, 3)) < 4 * est.stderr


def test_escape_rejects_bad_members():
    with pytest.raises(ValueError):
        escape_probability(gen_leaky_chain(3), ["111"], t=2)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 20))
def test_escape_bound_property(seed, t):
    h = gen_random(5, 2, 5, seed=seed, full_cover=True)
    rng = np.random.default_rng(seed)
    S = sorted({format(int(x), "05b") for x in rng.integers(0, 32, size=8)})
    phi = float(cut_stats(h, S).conductance)
    est = escape_probability(h, S, "pi", t, 5000, seed=seed)
    assert est.mean <= escape_bound(phi, t) + 4 * est.stderr + 1e-12


def test_visit_frequencies_uniform_on_hypercube():
    freq = visit_frequencies(gen_hypercube(3), "000", 400, walkers=500, burn_in=100)
    assert freq.sum() == pytest.approx(1.0)
    assert 0.5 * np.abs(freq - 1 / 8).sum() < 0.02


def test_visit_frequencies_refuse_bad_strings():
    with pytest.raises(ValueError):
        visit_frequencies(gen_leaky_chain(3), "000", 500, walkers=50, burn_in=10)
