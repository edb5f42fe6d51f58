import cmath
import itertools
import math
import time

import numpy as np
import pytest

from conftest import random_complex, rel_close
from noisybs.errors import CapacityError, ImaginaryResidueError
from noisybs.kernels import (
    _check_real,
    as_matrix,
    chi_moment,
    chi_moment_bruteforce,
    derangement_sum,
    derangement_sum_bruteforce,
    derangement_sums,
    derangement_sums_batch,
    fixed_point_coefficients,
    interference_term,
    is_unitary,
    magnitude_scale,
    permanent,
    permanent_batch,
    permanent_glynn,
    permanent_naive,
    submatrix,
    unitarity_error,
)
from noisybs.montecarlo import ginibre, haar_unitary
from noisybs.symgroup import Permutation, all_permutations, inverse


def test_permanent_examples():
    assert permanent(np.eye(3)) == pytest.approx(1)
    assert permanent(np.ones((4, 4))) == pytest.approx(24)
    assert permanent([[1, 2], [3, 4]]) == pytest.approx(10)
    assert permanent(np.zeros((0, 0))) == 1
    assert permanent_naive(np.eye(2)) == pytest.approx(1)
    assert permanent_naive(np.ones((3, 3))) == pytest.approx(6)
    assert permanent_glynn([[1, 2], [3, 4]]) == pytest.approx(10)


def test_permanent_rejects_bad_input():
    with pytest.raises(ValueError):
        permanent(np.ones((2, 3)))
    with pytest.raises(ValueError):
        as_matrix([[1, np.nan]])
    with pytest.raises(CapacityError):
        permanent_naive(np.ones((10, 10)))
    with pytest.raises(CapacityError):
        permanent(np.ones((25, 25)))


@pytest.mark.parametrize("n", range(1, 8))
def test_permanent_matches_naive(n):
    a = random_complex(n, seed=n)
    ref = permanent_naive(a)
    assert rel_close(permanent(a), ref, 1e-10)
    assert rel_close(permanent_glynn(a), ref, 1e-10)


def test_ryser_and_glynn_agree_on_200_ginibre_matrices():
    for k in range(200):
        n = 2 + k % 9
        a = ginibre(n, n, 1.0, seed=k)
        assert rel_close(permanent_glynn(a), permanent(a), 1e-10)


def test_permanent_batch_matches_single():
    blocks = np.stack([random_complex(5, seed=s) for s in range(6)])
    batch = permanent_batch(blocks)
    for b, v in zip(blocks, batch):
        assert rel_close(v, permanent(b), 1e-12)


def test_submatrix_allows_repeats():
    u = np.arange(9).reshape(3, 3)
    assert submatrix(u, [0, 0], [2, 1]).tolist() == [[2, 1], [2, 1]]


def test_interference_identity_is_classical_permanent():
    u = random_complex(5, 7, seed=3)
    ins, outs = [0, 2, 4], [1, 3, 6]
    a = submatrix(u, ins, outs)
    t = interference_term(u, Permutation.identity(3), ins, outs)
    assert rel_close(t, permanent(np.abs(a) ** 2), 1e-12)
    assert interference_term(u, Permutation((0,)), [1], [2]) == pytest.approx(abs(u[1, 2]) ** 2)


def test_interference_conjugate_pairs_are_real():
    u = random_complex(4, seed=11)
    for sigma in all_permutations(4):
        pair = interference_term(u, sigma, range(4), range(4)) + interference_term(u, inverse(sigma), range(4), range(4))
        assert abs(pair.imag) <= 1e-12 * (1 + abs(pair))


def test_interference_size_checks():
    with pytest.raises(ValueError):
        interference_term(np.eye(3), Permutation.identity(2), [0, 1, 2], [0, 1, 2])


def test_derangement_examples():
    u = random_complex(5, seed=1)
    ins = outs = [0, 1, 2, 3]
    a = submatrix(u, ins, outs)
    assert rel_close(derangement_sum(u, ins, outs, 0), permanent(np.abs(a) ** 2).real, 1e-11)
    assert abs(derangement_sum(u, ins, outs, 1)) <= 1e-11 * magnitude_scale(a)
    total = derangement_sums(u, ins, outs).sum()
    assert rel_close(total, abs(permanent(a)) ** 2, 1e-10, scale=magnitude_scale(a))


def test_bruteforce_identity_three_cycle_class():
    assert derangement_sum_bruteforce(np.eye(3), range(3), range(3), 3) == 0


def test_two_by_two_hand_expansion():
    a = random_complex(2, seed=5)
    hand = 2 * (a[0, 0] * a[1, 1] * np.conj(a[0, 1] * a[1, 0])).real
    assert derangement_sum_bruteforce(a, [0, 1], [0, 1], 2) == pytest.approx(hand, rel=1e-12)
    assert derangement_sum(a, [0, 1], [0, 1], 2) == pytest.approx(hand, rel=1e-10)


@pytest.mark.parametrize("method", ["glynn", "ryser"])
def test_seed_seven_oracle_case(method):
    a = ginibre(4, 4, 1.0, seed=7)
    fast = derangement_sum(a, range(4), range(4), 2, method=method)
    slow = derangement_sum_bruteforce(a, range(4), range(4), 2)
    assert rel_close(fast, slow, 1e-9, scale=magnitude_scale(a))


@pytest.mark.parametrize("n", range(1, 7))
def test_fast_kernel_matches_oracle(n):
    for seed in range(8):
        a = random_complex(n, seed=100 * n + seed)
        fast = derangement_sums(a, range(n), range(n))
        for s in range(n + 1):
            slow = derangement_sum_bruteforce(a, range(n), range(n), s)
            assert rel_close(fast[s], slow, 1e-9, scale=max(abs(slow), 1e-3 * magnitude_scale(a)))


def test_fixed_point_coefficients_are_class_sums():
    n = 4
    a = random_complex(n, seed=9)
    coef = fixed_point_coefficients(a)
    ref = np.zeros(n + 1, dtype=complex)
    for sigma in all_permutations(n):
        ref[sum(1 for k in range(n) if sigma(k) == k)] += interference_term(a, sigma, range(n), range(n))
    assert np.allclose(coef, ref, rtol=0, atol=1e-11 * magnitude_scale(a))


def test_s_set_selection_matches_full():
    u = random_complex(6, seed=2)
    full = derangement_sums(u, range(6), range(6))
    part = derangement_sums(u, range(6), range(6), s_set=[0, 3, 5])
    assert np.allclose(part, full[[0, 3, 5]], rtol=1e-12, atol=1e-14)


def test_batch_matches_single():
    blocks = np.stack([random_complex(5, seed=s) for s in range(4)])
    batch = derangement_sums_batch(blocks)
    for b, row in zip(blocks, batch):
        assert np.allclose(row, derangement_sums(b, range(5), range(5)), rtol=1e-12, atol=1e-14)


def test_global_phase_invariance():
    u = random_complex(5, seed=4)
    phase = cmath.exp(0.73j)
    assert np.allclose(
        derangement_sums(u, range(5), range(5)),
        derangement_sums(phase * u, range(5), range(5)),
        rtol=1e-10,
        atol=1e-12,
    )


def test_methods_agree_at_moderate_size():
    a = random_complex(9, seed=21)
    g = derangement_sums(a, range(9), range(9), method="glynn")
    r = derangement_sums(a, range(9), range(9), method="ryser")
    assert np.allclose(g, r, rtol=0, atol=1e-8 * magnitude_scale(a))
    with pytest.raises(ValueError):
        derangement_sums(a, range(9), range(9), method="other")


def test_imaginary_residue_is_reported():
    with pytest.raises(ImaginaryResidueError) as info:
        _check_real(np.array([1.0 + 1e-3j]), 1.0, "probe")
    assert info.value.residue == pytest.approx(1e-3)
    _check_real(np.array([1.0 + 1e-12j]), 1.0, "probe")


def test_derangement_caps():
    with pytest.raises(CapacityError):
        derangement_sum(np.eye(14), range(14), range(14), 0)
    with pytest.raises(CapacityError):
        derangement_sum_bruteforce(np.eye(8), range(8), range(8), 0)
    with pytest.raises(ValueError):
        derangement_sum(np.eye(3), range(3), range(3), 4)


def test_chi_moment():
    assert [chi_moment(n) for n in range(4)] == [1, 2, 5, 16]
    for n in range(8):
        assert chi_moment(n) == chi_moment_bruteforce(n)
    assert chi_moment(2) == 2**2 + 2**0


def test_unitarity_helpers():
    u = haar_unitary(6, seed=0)
    assert unitarity_error(u) < 1e-12
    assert is_unitary(u)
    assert not is_unitary(2 * u)


def test_n12_completes_within_a_minute():
    a = ginibre(12, 12, 1.0 / 12, seed=12)
    start = time.perf_counter()
    sums = derangement_sums(a, range(12), range(12))
    elapsed = time.perf_counter() - start
    assert elapsed < 60
    assert rel_close(sums.sum(), abs(permanent(a)) ** 2, 1e-9, scale=magnitude_scale(a))
