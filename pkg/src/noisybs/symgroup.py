"""Permutations, cycle statistics, derangements and characters of S_n.

Permutations are stored 0-based as image tuples: ``p.mapping[k]`` is the
image of point ``k``.  Composition follows function notation,
``compose(p, q)(k) == p(q(k))``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

from noisybs.config import CHARACTER_TABLE_MAX_N, SUBFACTORIAL_MAX_N
from noisybs.errors import CapacityError

__all__ = [
    "Permutation",
    "IntegerPartition",
    "CharacterTable",
    "identity",
    "compose",
    "inverse",
    "fixed_point_count",
    "cycle_type",
    "all_permutations",
    "derangement_count",
    "enumerate_derangement_class",
    "partitions",
    "class_size",
    "character",
    "character_table",
    "fixed_point_power_sum",
    "fixed_point_power_sum_closed",
]


@dataclass(frozen=True)
class Permutation:
    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(k) for k in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"not a permutation of 0..{len(mapping) - 1}: {mapping}")
        object.__setattr__(self, "mapping", mapping)

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, k: int) -> int:
        return self.mapping[k]

    def __len__(self) -> int:
        return len(self.mapping)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, n: int, *cycles: Sequence[int]) -> "Permutation":
        """Build a permutation of ``n`` points from disjoint cycles.

        ``Permutation.from_cycles(3, (0, 1, 2))`` maps 0->1, 1->2, 2->0.
        """
        image = list(range(n))
        seen: set[int] = set()
        for cyc in cycles:
            for a, b in zip(cyc, tuple(cyc[1:]) + (cyc[0],)):
                if a in seen:
                    raise ValueError(f"cycles are not disjoint at point {a}")
                seen.add(a)
                image[a] = b
        return cls(tuple(image))

    def cycles(self) -> list[tuple[int, ...]]:
        """Disjoint cycle decomposition, fixed points included."""
        seen = [False] * self.n
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cyc = []
            k = start
            while not seen[k]:
                seen[k] = True
                cyc.append(k)
                k = self.mapping[k]
            out.append(tuple(cyc))
        return out

    def fixed_points(self) -> tuple[int, ...]:
        return tuple(k for k, v in enumerate(self.mapping) if k == v)

    def sign(self) -> int:
        return -1 if (self.n - len(self.cycles())) % 2 else 1

    def __repr__(self) -> str:
        cyc = [c for c in self.cycles() if len(c) > 1]
        body = "".join("(" + " ".join(map(str, c)) + ")" for c in cyc) or "()"
        return f"Permutation[{self.n}]{body}"


def identity(n: int) -> Permutation:
    return Permutation.identity(n)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Return ``p o q``, i.e. ``k -> p(q(k))``."""
    if p.n != q.n:
        raise ValueError(f"size mismatch: {p.n} vs {q.n}")
    pm = p.mapping
    return Permutation(tuple(pm[k] for k in q.mapping))


def inverse(p: Permutation) -> Permutation:
    inv = [0] * p.n
    for k, v in enumerate(p.mapping):
        inv[v] = k
    return Permutation(tuple(inv))


def fixed_point_count(p: Permutation) -> int:
    return sum(1 for k, v in enumerate(p.mapping) if k == v)


def all_permutations(n: int) -> Iterator[Permutation]:
    """All of S_n in lexicographic order of image tuples."""
    for m in itertools.permutations(range(n)):
        yield Permutation(m)


@dataclass(frozen=True, order=True)
class IntegerPartition:
    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p <= 0 for p in parts):
            raise ValueError(f"partition parts must be positive: {parts}")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"partition parts must be non-increasing: {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def total(self) -> int:
        return sum(self.parts)

    @property
    def ones(self) -> int:
        """Number of parts equal to 1 (fixed points of the cycle type)."""
        return self.parts.count(1)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __str__(self) -> str:
        return "+".join(map(str, self.parts)) or "0"

    @classmethod
    def parse(cls, text: str) -> "IntegerPartition":
        """Parse the ``"3+1+1"`` form produced by ``str``."""
        text = text.strip()
        if text in ("", "0"):
            return cls(())
        return cls(tuple(sorted((int(t) for t in text.split("+")), reverse=True)))


def cycle_type(p: Permutation) -> IntegerPartition:
    return IntegerPartition(tuple(sorted((len(c) for c in p.cycles()), reverse=True)))


def derangement_count(s: int) -> int:
    """Subfactorial ``!s``, the number of fixed-point-free permutations."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if s > SUBFACTORIAL_MAX_N:
        raise CapacityError(f"derangement_count capped at s={SUBFACTORIAL_MAX_N}, got {s}")
    prev, cur = 1, 0  # !0, !1
    if s == 0:
        return 1
    for k in range(2, s + 1):
        prev, cur = cur, (k - 1) * (cur + prev)
    return cur


def _derangements_of(points: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    for images in itertools.permutations(points):
        if all(a != b for a, b in zip(points, images)):
            yield images


def enumerate_derangement_class(n: int, s: int) -> Iterator[Permutation]:
    """Yield every permutation of ``n`` points moving exactly ``s`` of them.

    Each yielded permutation has ``n - s`` fixed points; there are
    ``C(n, s) * !s`` of them.
    """
    if not 0 <= s <= n:
        raise ValueError(f"need 0 <= s <= n, got s={s}, n={n}")
    for moved in itertools.combinations(range(n), s):
        for images in _derangements_of(moved):
            image = list(range(n))
            for a, b in zip(moved, images):
                image[a] = b
            yield Permutation(tuple(image))


def fixed_point_power_sum(n: int, t) -> Fraction:
    """``sum over S_n of t**C1(sigma)`` by explicit enumeration."""
    t = Fraction(t)
    return sum((t ** fixed_point_count(p) for p in all_permutations(n)), Fraction(0))


def fixed_point_power_sum_closed(n: int, t) -> Fraction:
    """Same sum from the generating function ``exp((t-1)z)/(1-z)``.

    ``n! [z^n] exp((t-1)z)/(1-z) = n! * sum_k (t-1)**k / k!``.
    """
    t = Fraction(t)
    return math.factorial(n) * sum(
        (Fraction((t - 1) ** k) / math.factorial(k) for k in range(n + 1)), Fraction(0)
    )


# -- partitions and characters ------------------------------------------------


def _partitions_desc(n: int, largest: int) -> Iterator[tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _partitions_desc(n - first, first):
            yield (first,) + rest


def partitions(n: int) -> list[IntegerPartition]:
    """Partitions of ``n`` in ascending lexicographic order.

    Parts are written largest first, so the list runs from ``(1,)*n`` to
    ``(n,)``.  This order labels both the rows and the columns of
    :class:`CharacterTable`.
    """
    return [IntegerPartition(p) for p in sorted(_partitions_desc(n, n))]


def class_size(rho: IntegerPartition) -> int:
    """Number of permutations with cycle type ``rho``."""
    z = 1
    for length in set(rho.parts):
        m = rho.parts.count(length)
        z *= length**m * math.factorial(m)
    return math.factorial(rho.total) // z


def _remove_rim_hooks(shape: tuple[int, ...], k: int) -> list[tuple[tuple[int, ...], int]]:
    """All shapes obtained by removing a rim hook of length ``k``, with signs.

    Uses the beta-set (abacus) description: sliding a bead from position
    ``b`` to an empty ``b - k`` removes a k-rim hook whose leg length is
    the number of beads strictly between.
    """
    length = len(shape)
    beta = [shape[i] + (length - 1 - i) for i in range(length)]
    occupied = set(beta)
    out = []
    for i, b in enumerate(beta):
        target = b - k
        if target < 0 or target in occupied:
            continue
        leg = sum(1 for c in beta if target < c < b)
        new_beta = sorted(beta[:i] + [target] + beta[i + 1 :], reverse=True)
        new_shape = tuple(
            v for v in (new_beta[j] - (length - 1 - j) for j in range(length)) if v > 0
        )
        out.append((new_shape, -1 if leg % 2 else 1))
    return out


@lru_cache(maxsize=None)
def _murnaghan_nakayama(shape: tuple[int, ...], rho: tuple[int, ...]) -> int:
    if not rho:
        return 1 if not shape else 0
    k, rest = rho[0], rho[1:]
    return sum(sign * _murnaghan_nakayama(sub, rest) for sub, sign in _remove_rim_hooks(shape, k))


def character(lam: IntegerPartition, rho: IntegerPartition) -> int:
    """Irreducible character ``chi_lam`` evaluated on the class ``rho``."""
    if lam.total != rho.total:
        raise ValueError(f"partitions of different totals: {lam} vs {rho}")
    return _murnaghan_nakayama(lam.parts, rho.parts)


@dataclass(frozen=True)
class CharacterTable:
    """Integer character table of S_n.

    ``values[i][c]`` is the character of irrep ``partitions[i]`` on the
    class ``partitions[c]``; rows and columns share one ordering.
    """

    n: int
    partitions: tuple[IntegerPartition, ...]
    values: tuple[tuple[int, ...], ...]
    class_sizes: tuple[int, ...]

    @property
    def dims(self) -> tuple[int, ...]:
        ident = self.identity_class
        return tuple(row[ident] for row in self.values)

    @property
    def identity_class(self) -> int:
        return self.partitions.index(IntegerPartition((1,) * self.n))

    def index(self, lam: IntegerPartition) -> int:
        return self.partitions.index(lam)

    def row(self, lam: IntegerPartition) -> tuple[int, ...]:
        return self.values[self.index(lam)]

    def __call__(self, lam: IntegerPartition, rho: IntegerPartition) -> int:
        return self.values[self.index(lam)][self.index(rho)]

    def inner(self, i: int, j: int) -> int:
        """Unnormalized row inner product ``sum_c size_c chi_i(c) chi_j(c)``."""
        return sum(s * a * b for s, a, b in zip(self.class_sizes, self.values[i], self.values[j]))


@lru_cache(maxsize=None)
def character_table(n: int) -> CharacterTable:
    if n < 1:
        raise ValueError("character table needs n >= 1")
    if n > CHARACTER_TABLE_MAX_N:
        raise CapacityError(f"character table capped at n={CHARACTER_TABLE_MAX_N}, got {n}")
    parts = tuple(partitions(n))
    values = tuple(tuple(character(lam, rho) for rho in parts) for lam in parts)
    sizes = tuple(class_size(rho) for rho in parts)
    return CharacterTable(n=n, partitions=parts, values=values, class_sizes=sizes)
