import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_complex, rel_close
from noisybs.errors import CapacityError, ImaginaryResidueError
from noisybs.kernels import permanent, submatrix
from noisybs.models import model_cutoff, model_rearranged, model_uniform
from noisybs.montecarlo import haar_unitary
from noisybs.probability import (
    DistributionTable,
    OutputConfiguration,
    _real,
    classical_permanent,
    convex_sum_probability,
    derangement_table,
    distribution_from_sums,
    enumerate_distribution,
    negative_mass,
    no_collision_configs,
    ordered_tuple_mass,
    permanent_split,
    probability_bruteforce,
    probability_expansion,
    probability_from_model,
    quantum_factor_cutoff,
    rearranged_probability,
    total_variation_distance,
)


def test_output_configuration():
    cfg = OutputConfiguration((0, 3, 5))
    assert str(cfg) == "0-3-5"
    assert OutputConfiguration.parse("0-3-5") == cfg
    with pytest.raises(ValueError):
        OutputConfiguration((3, 0))
    with pytest.raises(ValueError):
        OutputConfiguration((1, 1))


def test_bruteforce_examples():
    u = random_complex(6, seed=8)
    ins, out = [0, 1, 2], [1, 3, 4]
    a = submatrix(u, ins, out)
    assert rel_close(probability_bruteforce(u, model_uniform(3, 1), ins, out), abs(permanent(a)) ** 2, 1e-12)
    assert rel_close(probability_bruteforce(u, model_uniform(3, 0), ins, out), classical_permanent(a), 1e-12)
    assert probability_bruteforce(np.eye(4), model_uniform(3, Fraction(1, 3)), ins, [0, 1, 2]) == pytest.approx(1)


def test_bruteforce_guards():
    with pytest.raises(ValueError):
        probability_bruteforce(np.eye(4), model_uniform(2, 1), [0, 1, 2], [0, 1, 2])
    with pytest.raises(CapacityError):
        probability_bruteforce(np.eye(8), model_uniform(8, 1), range(8), range(8))


def _haar_case(N, M, seed):
    u = haar_unitary(M, seed)
    rng = np.random.default_rng(seed)
    ins = sorted(rng.choice(M, N, replace=False).tolist())
    out = sorted(rng.choice(M, N, replace=False).tolist())
    return u, ins, out


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_routes_agree(N):
    for seed in range(3):
        u, ins, out = _haar_case(N, N + 3, seed)
        for x in (0.0, 0.3, 1.0):
            for R in sorted({0, 1, 2, N} & set(range(N + 1))):
                ref = probability_bruteforce(u, model_cutoff(N, R, x), ins, out)
                vals = [
                    probability_from_model(u, model_cutoff(N, R, x), ins, out),
                    probability_expansion(u, N, R, x, ins, out),
                    convex_sum_probability(u, N, x, ins, out, cutoff=R),
                ]
                vals += [rearranged_probability(u, N, K, R, x, ins, out) for K in range(R, N + 1)]
                for v in vals:
                    assert rel_close(v, ref, 1e-9)


def test_expansion_examples():
    u, ins, out = _haar_case(5, 8, 11)
    a = submatrix(u, ins, out)
    assert rel_close(probability_expansion(u, 5, 0, 0.3, ins, out), classical_permanent(a), 1e-12)
    full = convex_sum_probability(u, 5, 0.3, ins, out)
    assert rel_close(probability_expansion(u, 5, 5, 0.3, ins, out), full, 1e-10)
    assert rel_close(
        probability_expansion(u, 5, 2, 0.3, ins, out), probability_bruteforce(u, model_cutoff(5, 2, 0.3), ins, out), 1e-9
    )


def test_convex_sum_examples():
    u, ins, out = _haar_case(4, 7, 3)
    a = submatrix(u, ins, out)
    assert rel_close(convex_sum_probability(u, 4, 0, ins, out), classical_permanent(a), 1e-12)
    assert rel_close(convex_sum_probability(u, 4, 1, ins, out), abs(permanent(a)) ** 2, 1e-12)
    three = [
        convex_sum_probability(u, 4, 0.5, ins, out, cutoff=2),
        probability_bruteforce(u, model_cutoff(4, 2, 0.5), ins, out),
        probability_expansion(u, 4, 2, 0.5, ins, out),
    ]
    assert max(three) - min(three) <= 1e-9 * abs(three[1])


def test_rearranged_examples():
    u, ins, out = _haar_case(5, 8, 4)
    assert rel_close(
        rearranged_probability(u, 5, 3, 2, 0.3, ins, out), probability_expansion(u, 5, 2, 0.3, ins, out), 1e-9
    )
    u, ins, out = _haar_case(4, 6, 5)
    a = submatrix(u, ins, out)
    assert rel_close(rearranged_probability(u, 4, 2, 2, 0, ins, out), classical_permanent(a), 1e-12)
    with pytest.raises(ValueError):
        rearranged_probability(u, 4, 1, 2, 0.3, ins, out)


def test_quantum_factor_cutoff():
    a = random_complex(5, seed=6)
    full = abs(permanent(a)) ** 2
    assert rel_close(quantum_factor_cutoff(a, 5, 5, range(5), range(5)), full, 1e-9)
    assert rel_close(quantum_factor_cutoff(a, 5, 9, range(5), range(5)), full, 1e-9)
    assert rel_close(quantum_factor_cutoff(a, 5, 0, range(5), range(5)), classical_permanent(a), 1e-12)


def test_quantum_factor_goes_negative_for_seven_bosons():
    values = [quantum_factor_cutoff(random_complex(7, seed=s), 7, 4, range(7), range(7)) for s in range(200)]
    assert min(values) < 0


def test_quantum_factor_nonnegative_when_untruncated():
    for s in range(30):
        a = random_complex(6, seed=50 + s)
        for n in range(1, 7):
            assert quantum_factor_cutoff(a[:n, :n], n, n, range(n), range(n)) >= -1e-10


def test_permanent_split_identity():
    rng = np.random.default_rng(2)
    for _ in range(3):
        b = rng.random((5, 5))
        ref = permanent(b)
        for K in range(6):
            assert rel_close(permanent_split(b, K), ref, 1e-10)


def test_table_examples():
    u = haar_unitary(4, 1)
    table = enumerate_distribution(u, model_uniform(4, 1), range(4))
    assert table.configs == [(0, 1, 2, 3)]
    assert table.probs[0] == pytest.approx(abs(permanent(u)) ** 2)
    assert len(enumerate_distribution(haar_unitary(6, 2), model_uniform(2, 0.5), [0, 1]).configs) == 15
    assert no_collision_configs(5, 2)[:3] == [(0, 1), (0, 2), (0, 3)]


@pytest.mark.parametrize("x", [0, Fraction(1, 4), Fraction(1, 2), 1])
def test_uniform_tables_nonnegative(x):
    for seed in range(3):
        table = enumerate_distribution(haar_unitary(7, seed), model_uniform(3, x), range(3))
        assert table.probs.min() >= -1e-10
        assert 0 < table.total() < 1


def test_negative_mass_bounded_by_twice_tvd():
    for seed in range(4):
        u = haar_unitary(8, 30 + seed)
        configs, sums = derangement_table(u, range(4))
        for x, R in [(0.5, 1), (0.8, 1), (0.9, 2), (1.0, 2)]:
            p = distribution_from_sums(configs, sums, model_uniform(4, x))
            q = distribution_from_sums(configs, sums, model_cutoff(4, R, x))
            assert negative_mass(q) <= 2 * total_variation_distance(p, q) + 1e-8


def test_tvd_examples():
    u = haar_unitary(16, 123)
    p = enumerate_distribution(u, model_uniform(4, 0.5), range(4))
    assert total_variation_distance(p, p) == 0
    q = enumerate_distribution(u, model_cutoff(4, 4, 0.5), range(4))
    assert total_variation_distance(p, q) == 0
    r = enumerate_distribution(u, model_cutoff(4, 1, 0.5), range(4))
    tvd = total_variation_distance(p, r)
    assert 0 < tvd < 0.5
    other = enumerate_distribution(haar_unitary(5, 0), model_uniform(4, 0.5), range(4))
    with pytest.raises(ValueError):
        total_variation_distance(p, other)


def test_table_renormalized():
    table = enumerate_distribution(haar_unitary(6, 9), model_uniform(3, 0.4), range(3))
    assert table.renormalized().total() == pytest.approx(1)
    assert negative_mass(table) == 0


@pytest.mark.parametrize("N,M", [(1, 3), (2, 4), (3, 5), (4, 6), (2, 8), (4, 8)])
def test_unitarity_sum_rule(N, M):
    u = haar_unitary(M, N * 10 + M)
    for model in (model_uniform(N, 1), model_uniform(N, 0.4), model_cutoff(N, 1, 0.7)):
        assert abs(ordered_tuple_mass(u, model, range(N)) - math.factorial(N)) <= 1e-8 * math.factorial(N)


def test_imaginary_residue_threshold():
    assert _real(1 + 1e-12j, 1.0, "probe") == 1.0
    with pytest.raises(ImaginaryResidueError):
        _real(1 + 1e-3j, 1.0, "probe")


def test_distribution_caps():
    with pytest.raises(CapacityError):
        derangement_table(np.eye(200, dtype=complex), range(4))
