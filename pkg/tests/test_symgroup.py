import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisybs.errors import CapacityError
from noisybs.symgroup import (
    IntegerPartition,
    Permutation,
    all_permutations,
    character,
    character_table,
    class_size,
    compose,
    cycle_type,
    derangement_count,
    enumerate_derangement_class,
    fixed_point_count,
    fixed_point_power_sum,
    fixed_point_power_sum_closed,
    identity,
    inverse,
    partitions,
)

perms = st.integers(1, 7).flatmap(lambda n: st.permutations(range(n))).map(Permutation)


def test_permutation_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


def test_from_cycles_and_cycles():
    p = Permutation.from_cycles(4, (0, 1, 2))
    assert p.mapping == (1, 2, 0, 3)
    assert p.cycles() == [(0, 1, 2), (3,)]
    assert p.fixed_points() == (3,)
    with pytest.raises(ValueError):
        Permutation.from_cycles(3, (0, 1), (1, 2))


def test_compose_is_function_composition():
    p = Permutation((1, 2, 0))
    q = Permutation((0, 2, 1))
    r = compose(p, q)
    assert all(r(k) == p(q(k)) for k in range(3))


def test_fixed_points_of_identity_and_cycle():
    assert fixed_point_count(identity(5)) == 5
    assert fixed_point_count(Permutation.from_cycles(5, (0, 1, 2, 3, 4))) == 0


def test_all_permutations_lexicographic():
    maps = [p.mapping for p in all_permutations(3)]
    assert maps == sorted(maps)
    assert len(maps) == 6


@given(perms)
def test_inverse_undoes(p):
    assert compose(p, inverse(p)) == identity(p.n)
    assert compose(inverse(p), p) == identity(p.n)


@given(perms)
def test_cycle_type_is_conjugation_invariant(p):
    q = Permutation(tuple(reversed(range(p.n))))
    conj = compose(compose(q, p), inverse(q))
    assert cycle_type(conj) == cycle_type(p)
    assert fixed_point_count(p) == cycle_type(p).ones
    assert cycle_type(p).total == p.n


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.permutations(range(n)), st.permutations(range(n)))))
def test_sign_is_multiplicative(pair):
    p, q = map(Permutation, pair)
    assert compose(p, q).sign() == p.sign() * q.sign()


def test_subfactorial_values():
    assert [derangement_count(s) for s in range(8)] == [1, 0, 1, 2, 9, 44, 265, 1854]
    with pytest.raises(ValueError):
        derangement_count(-1)
    with pytest.raises(CapacityError):
        derangement_count(10**6)


@pytest.mark.parametrize("n", range(0, 7))
def test_derangement_classes_partition_the_group(n):
    total = 0
    for s in range(n + 1):
        cls = list(enumerate_derangement_class(n, s))
        assert len(cls) == math.comb(n, s) * derangement_count(s)
        assert all(fixed_point_count(p) == n - s for p in cls)
        assert len(set(cls)) == len(cls)
        total += len(cls)
    assert total == math.factorial(n)


@pytest.mark.parametrize("t", [0, 1, 2, Fraction(1, 3), Fraction(-5, 2)])
def test_fixed_point_power_sum_closed_form(t):
    for n in range(0, 7):
        assert fixed_point_power_sum(n, t) == fixed_point_power_sum_closed(n, t)


def test_partition_order_and_counts():
    assert [p.parts for p in partitions(3)] == [(1, 1, 1), (2, 1), (3,)]
    assert [len(partitions(n)) for n in range(1, 11)] == [1, 2, 3, 5, 7, 11, 15, 22, 30, 42]
    assert str(IntegerPartition((3, 1, 1))) == "3+1+1"
    assert IntegerPartition.parse("1+3+1") == IntegerPartition((3, 1, 1))
    with pytest.raises(ValueError):
        IntegerPartition((1, 2))


@pytest.mark.parametrize("n", range(1, 8))
def test_class_sizes_match_enumeration(n):
    counts = {}
    for p in all_permutations(n):
        counts[cycle_type(p)] = counts.get(cycle_type(p), 0) + 1
    assert counts == {rho: class_size(rho) for rho in partitions(n)}


def test_character_table_s3():
    table = character_table(3)
    assert table.values == ((1, -1, 1), (2, 0, -1), (1, 1, 1))
    assert table.dims == (1, 2, 1)


def test_character_table_s4_known_rows():
    table = character_table(4)
    p = IntegerPartition
    # class order: 1111, 211, 22, 31, 4
    assert table.row(p((2, 2))) == (2, 0, 2, -1, 0)
    assert table.row(p((3, 1))) == (3, 1, -1, 0, -1)
    assert table.row(p((2, 1, 1))) == (3, -1, -1, 0, 1)


@pytest.mark.parametrize("n", range(1, 9))
def test_character_orthogonality(n):
    table = character_table(n)
    order = math.factorial(n)
    k = len(table.partitions)
    for i, j in itertools.product(range(k), repeat=2):
        assert table.inner(i, j) == (order if i == j else 0)
    # column orthogonality: sum_lam chi(rho) chi(rho') = delta * n!/|class|
    for a, b in itertools.product(range(k), repeat=2):
        s = sum(table.values[r][a] * table.values[r][b] for r in range(k))
        assert s == (order // table.class_sizes[a] if a == b else 0)
    assert sum(d * d for d in table.dims) == order


@pytest.mark.parametrize("n", range(1, 8))
def test_trivial_and_sign_characters(n):
    trivial = IntegerPartition((n,))
    sign = IntegerPartition((1,) * n)
    for p in all_permutations(n):
        rho = cycle_type(p)
        assert character(trivial, rho) == 1
        assert character(sign, rho) == p.sign()


def test_character_table_cap():
    with pytest.raises(CapacityError):
        character_table(11)
    with pytest.raises(ValueError):
        character(IntegerPartition((2,)), IntegerPartition((1, 1, 1)))


def test_character_table_types_are_exact_ints():
    table = character_table(10)
    assert all(isinstance(v, int) for row in table.values for v in row)
    assert table.inner(0, 0) == math.factorial(10)
