import itertools

import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_random
from ethscale.cumulants import (averaged_error, correlation_function, eth_prediction, exact_pattern_sums,
                                free_cumulant, moebius, otoc_point, otoc_series, restricted_cycle_sum,
                                set_partitions)
from ethscale.eth import diagonal_moments
from ethscale.oracle import brute_cycle_sum, random_involution
from ethscale.spectral import SpectralData, heisenberg_matrix


def loop_restricted(sd, q, times):
    """Plain nested loops over pairwise-distinct tuples."""
    legs = [heisenberg_matrix(sd, t) for t in times] + [sd.o_eig]
    total = 0j
    for idx in itertools.permutations(range(sd.dim), q):
        prod = 1.0 + 0j
        for m in range(q):
            prod *= legs[m][idx[m], idx[(m + 1) % q]]
        total += prod
    return total


@pytest.mark.parametrize("q, bell", [(1, 1), (2, 2), (3, 5), (4, 15)])
def test_partition_counts(q, bell):
    parts = set_partitions(q)
    assert len(parts) == bell
    assert len(parts[0]) == q


def test_moebius_values():
    finest = set_partitions(4)[0]
    coarsest = ((0, 1, 2, 3),)
    assert moebius(finest, coarsest) == -6
    assert moebius(finest, finest) == 1
    assert moebius(coarsest, finest) == 0


def test_q2_at_zero_is_off_diagonal_trace():
    sd = make_random(9, 0)
    O = sd.o_eig
    val = restricted_cycle_sum(sd, 2, (0.0,))
    assert val == pytest.approx(np.trace(O @ O) - np.sum(np.diag(O) ** 2), rel=1e-12)


def test_diagonal_operator_gives_zero():
    sd = SpectralData.from_arrays(np.arange(6.0), np.diag(np.linspace(-1, 1, 6)))
    for q, t in ((2, (0.3,)), (3, (0.1, 0.5)), (4, (0.2, 0.0, 0.7))):
        assert abs(restricted_cycle_sum(sd, q, t)) < 1e-13


def test_q4_12x12_against_loops():
    sd = make_random(12, 1)
    times = (0.7, 0.0, 0.7)
    ref = loop_restricted(sd, 4, times)
    assert restricted_cycle_sum(sd, 4, times) == pytest.approx(ref, rel=1e-9)
    assert free_cumulant(sd, 4, (0, 0, 0)) == pytest.approx(loop_restricted(sd, 4, (0, 0, 0)) / 12, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(D=st.integers(4, 14), q=st.sampled_from([2, 3, 4]), seed=st.integers(0, 10 ** 6),
       complex_=st.booleans(), data=st.data())
def test_restricted_sum_matches_brute_force(D, q, seed, complex_, data):
    sd = make_random(D, seed, complex_)
    times = tuple(data.draw(st.floats(-5, 5)) for _ in range(q - 1))
    legs = [heisenberg_matrix(sd, t) for t in times] + [sd.o_eig]
    ref = brute_cycle_sum(legs)
    assert abs(restricted_cycle_sum(sd, q, times) - ref) <= 1e-9 * max(abs(ref), 1.0)


def test_exact_patterns_complete():
    rng = np.random.default_rng(3)
    legs = [rng.standard_normal((12, 12)) for _ in range(4)]
    exact = exact_pattern_sums(legs)
    total = np.einsum("ab,bc,cd,da->", *legs)
    assert sum(exact.values()) == pytest.approx(total, rel=1e-9)


def test_empty_restriction_when_dim_below_q():
    sd = make_random(3, 4)
    assert restricted_cycle_sum(sd, 4, (0.1, 0.2, 0.3)) == 0


def test_cumulant_examples(ising9):
    assert abs(free_cumulant(ising9, 1)) < 1e-10
    m2 = diagonal_moments(ising9)[1]
    assert free_cumulant(ising9, 2, (0.0,)).real == pytest.approx(1 - m2, abs=1e-10)


def test_correlation_involution_at_zero(ising9):
    assert correlation_function(ising9, 2, (0.0,)) == pytest.approx(1.0, abs=1e-10)
    assert correlation_function(ising9, 4, (0.0, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-10)


def test_two_point_against_double_loop(ising6_full):
    sd = ising6_full
    w = np.subtract.outer(sd.eigenvalues, sd.eigenvalues)
    ref = np.sum(np.exp(1j * w) * np.abs(sd.o_eig) ** 2) / sd.dim
    assert correlation_function(sd, 2, (1.0,)) == pytest.approx(ref, rel=1e-12)


def test_time_symmetry(ising6_full):
    sd = ising6_full
    for t in (0.3, 1.7):
        assert correlation_function(sd, 2, (-t,)) == pytest.approx(np.conj(correlation_function(sd, 2, (t,))))
        assert abs(correlation_function(sd, 4, (t, 0.0, t)).imag) < 1e-9


def test_eth_q2_chain(ising9):
    m1, m2 = diagonal_moments(ising9)[:2]
    pred = eth_prediction(ising9, 2, (0.0,))
    exact = correlation_function(ising9, 2, (0.0,))
    assert pred.real == pytest.approx(1 - m2, abs=1e-10)
    assert (pred - exact).real == pytest.approx(-(m2 - m1 ** 2), abs=1e-10)


def test_eth_q2_nonzero_m1():
    rng = np.random.default_rng(8)
    sd = random_involution(rng, 30)
    m1, m2 = diagonal_moments(sd)[:2]
    err = eth_prediction(sd, 2, (0.0,)) - correlation_function(sd, 2, (0.0,))
    assert err.real == pytest.approx(-(m2 - m1 ** 2), abs=1e-12)


def test_eth_q3_symmetric_in_times():
    sd = make_random(10, 9)
    a = eth_prediction(sd, 3, (0.4, 1.1))
    # the k2 terms are symmetric under t1 <-> t2 up to the k2(t1 - t2) argument flip
    k1 = free_cumulant(sd, 1)
    k2s = sum(free_cumulant(sd, 2, (t,)) for t in (0.4 - 1.1, 0.4, 1.1))
    assert a == pytest.approx(free_cumulant(sd, 3, (0.4, 1.1)) + k2s * k1 + k1 ** 3)


def test_eth_q4_zero_diagonal():
    rng = np.random.default_rng(10)
    A = rng.standard_normal((9, 9))
    O = A + A.T
    O[np.diag_indices(9)] = 0.0
    sd = SpectralData.from_arrays(np.sort(rng.standard_normal(9)), O)
    pred = eth_prediction(sd, 4, (0.0, 0.0, 0.0))
    k2 = free_cumulant(sd, 2, (0.0,))
    assert pred == pytest.approx(free_cumulant(sd, 4, (0, 0, 0)) + 2 * k2 ** 2)
    # with a zero diagonal only patterns without adjacent coincidences survive:
    # all distinct, i1 = i3 alone, i2 = i4 alone, and both
    exact = exact_pattern_sums([O] * 4)
    keep = [set_partitions(4)[0], ((0, 2), (1,), (3,)), ((0,), (1, 3), (2,)), ((0, 2), (1, 3))]
    assert all(p in exact for p in keep)
    c4 = correlation_function(sd, 4, (0, 0, 0))
    assert c4 * 9 == pytest.approx(sum(exact[p] for p in keep))


def test_eth_q4_rejects_nonzero_k1_and_other_patterns():
    sd = SpectralData.from_arrays(np.arange(5.0), np.eye(5))
    with pytest.raises(ValueError):
        eth_prediction(sd, 4, (0.1, 0.0, 0.1))
    with pytest.raises(ValueError):
        eth_prediction(make_random(5, 1), 4, (0.1, 0.2, 0.3))


@pytest.mark.parametrize("t", [0.0, 0.35, 2.0])
def test_otoc_fast_path_matches_generic(ising9, t):
    otoc, k4, k2 = otoc_point(ising9, t)
    assert otoc == pytest.approx(correlation_function(ising9, 4, (t, 0.0, t)).real, abs=1e-10)
    assert k4 == pytest.approx(free_cumulant(ising9, 4, (t, 0.0, t)).real, abs=1e-10)
    assert k2 == pytest.approx(free_cumulant(ising9, 2, (t,)).real, abs=1e-10)


def test_otoc_generic_path_for_complex_data(ising6_full):
    sd = SpectralData(ising6_full.eigenvalues, ising6_full.o_eig.astype(complex))
    assert otoc_point(sd, 0.5)[0] == pytest.approx(otoc_point(ising6_full, 0.5)[0], abs=1e-10)


def test_otoc_series_basics(ising9):
    s = otoc_series(ising9, T=2.0, dt=0.1)
    assert len(s.times) == 21
    assert s.otoc[0] == pytest.approx(1.0, abs=1e-9)
    assert s.e_mid == pytest.approx(abs(s.otoc_eth[10] - s.otoc[10]))
    assert s.summary()["distinctness"] == "pairwise"


def test_otoc_series_quadrature_converges(ising9):
    coarse = otoc_series(ising9, T=8.0, dt=0.05)
    fine = otoc_series(ising9, T=8.0, dt=0.025)
    assert fine.e_avg == pytest.approx(coarse.e_avg, rel=1e-3)
    assert fine.e_mid == pytest.approx(coarse.e_mid, rel=1e-12)


def test_averaged_error_identical_curves():
    t = np.linspace(0, 8, 161)
    y = np.cos(t)
    assert averaged_error(t, y, y, y[80]) == 0
    assert averaged_error(t, y, y, y[80], "literal") == pytest.approx(abs(trapezoid(y, t) / 8 - y[80]))


def test_averaged_error_integrands_differ_on_sign_changes():
    t = np.linspace(0, 8, 1601)
    err = 0.1 * np.sin(2 * np.pi * t / 8)
    assert averaged_error(t, np.zeros_like(t), err, 0.0) == pytest.approx(0.2 / np.pi, rel=1e-5)
    assert averaged_error(t, np.zeros_like(t), err, 0.0, "signed") < 1e-15
    with pytest.raises(ValueError):
        averaged_error(t, t, t, 0.0, "other")


def test_otoc_series_validation(ising9):
    with pytest.raises(ValueError):
        otoc_series(ising9, T=1.0, dt=0.3)
    with pytest.raises(ValueError):
        otoc_series(random_involution(np.random.default_rng(0), 10), T=1.0, dt=0.5)
