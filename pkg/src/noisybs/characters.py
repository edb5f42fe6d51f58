"""Class functions on S_N, their irreducible-character expansions, and immanants.

A fixed-point-count model is a class function, so it expands as

    F(sigma) = sum_lam q_lam * chi_lam(sigma) / chi_lam(identity),

with ``q_lam = dim_lam * <F, chi_lam>``.  For the uniform model the weights
are a probability vector.  Values stay exact (``Fraction``) whenever the
model is rational.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from noisybs.config import CHARACTER_TABLE_MAX_N, IMMANANT_MAX_N
from noisybs.errors import CapacityError
from noisybs.kernels import as_matrix
from noisybs.models import FixedPointModel
from noisybs.symgroup import (
    IntegerPartition,
    Permutation,
    character_table,
    cycle_type,
    fixed_point_count,
)

__all__ = [
    "ClassFunction",
    "CharacterExpansion",
    "to_class_function",
    "expand_class_function",
    "trace_Ln",
    "trace_Ln_class_function",
    "decompose_trace_Ln",
    "immanant",
]


def _exact(v) -> bool:
    return isinstance(v, (Fraction, int))


@dataclass(frozen=True)
class ClassFunction:
    """Values on the conjugacy classes of S_n, in character-table order."""

    n: int
    values: tuple

    def __post_init__(self):
        table = character_table(self.n)
        vals = tuple(self.values)
        if len(vals) != len(table.partitions):
            raise ValueError(f"S_{self.n} has {len(table.partitions)} classes, got {len(vals)} values")
        if not all(_exact(v) or math.isfinite(v) for v in vals):
            raise ValueError("class function values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def exact(self) -> bool:
        return all(_exact(v) for v in self.values)

    @property
    def at_identity(self):
        return self.values[character_table(self.n).identity_class]

    def __getitem__(self, rho: IntegerPartition):
        return self.values[character_table(self.n).index(rho)]

    def __call__(self, p: Permutation):
        return self[cycle_type(p)]


def to_class_function(model: FixedPointModel) -> ClassFunction:
    n = model.n_total
    if n > CHARACTER_TABLE_MAX_N:
        raise CapacityError(f"character expansion capped at n={CHARACTER_TABLE_MAX_N}, got {n}")
    table = character_table(n)
    return ClassFunction(n, tuple(model.a[rho.ones] for rho in table.partitions))


@dataclass(frozen=True)
class CharacterExpansion:
    """Weights ``q`` aligned with ``partitions`` (same order as the character table)."""

    n: int
    partitions: tuple[IntegerPartition, ...]
    q: tuple
    x: object = None

    @property
    def exact(self) -> bool:
        return all(_exact(v) for v in self.q)

    def as_dict(self) -> dict[str, object]:
        return {str(lam): v for lam, v in zip(self.partitions, self.q)}

    def weight(self, lam: IntegerPartition):
        return self.q[self.partitions.index(lam)]

    def reconstruct(self) -> tuple:
        """``sum_lam q_lam chi_lam(rho) / dim_lam`` on every class ``rho``."""
        table = character_table(self.n)
        dims = table.dims
        out = []
        for c in range(len(table.partitions)):
            if self.exact:
                out.append(sum((Fraction(q) * table.values[i][c] / dims[i] for i, q in enumerate(self.q)), Fraction(0)))
            else:
                out.append(sum(float(q) * table.values[i][c] / dims[i] for i, q in enumerate(self.q)))
        return tuple(out)

    def to_json(self) -> str:
        def enc(v):
            return str(v) if isinstance(v, Fraction) else float(v)

        return json.dumps(
            {
                "schema": "noisybs.character_expansion/1",
                "n": self.n,
                "x": None if self.x is None else enc(self.x),
                "exact": self.exact,
                "q": {str(lam): enc(v) for lam, v in zip(self.partitions, self.q)},
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "CharacterExpansion":
        doc = json.loads(text)

        def dec(v):
            return Fraction(v) if isinstance(v, str) else float(v)

        table = character_table(doc["n"])
        q = doc["q"]
        return cls(
            doc["n"],
            table.partitions,
            tuple(dec(q[str(lam)]) for lam in table.partitions),
            None if doc["x"] is None else dec(doc["x"]),
        )


def _inner_products(f: ClassFunction) -> tuple:
    """``<f, chi_lam> = (1/n!) sum_c size_c f(c) chi_lam(c)`` for every lam."""
    table = character_table(f.n)
    order = math.factorial(f.n)
    if f.exact:
        return tuple(
            sum((Fraction(s * v * chi) for s, v, chi in zip(table.class_sizes, f.values, row)), Fraction(0)) / order
            for row in table.values
        )
    return tuple(
        sum(s * float(v) * chi for s, v, chi in zip(table.class_sizes, f.values, row)) / order
        for row in table.values
    )


def expand_class_function(f: ClassFunction, x=None) -> CharacterExpansion:
    if f.n > CHARACTER_TABLE_MAX_N:
        raise CapacityError(f"character expansion capped at n={CHARACTER_TABLE_MAX_N}, got {f.n}")
    table = character_table(f.n)
    coeffs = _inner_products(f)
    q = tuple(c * d for c, d in zip(coeffs, table.dims))
    return CharacterExpansion(f.n, table.partitions, q, x)


def trace_Ln(N: int, n: int, p: Permutation) -> int:
    """``sum_{m >= N-n} C(m, N-n) [C1(p) = m]``, i.e. ``C(C1(p), N - n)``."""
    if not 0 <= n <= N:
        raise ValueError(f"need 0 <= n <= N, got n={n}, N={N}")
    if p.n != N:
        raise ValueError(f"permutation of {p.n} points, expected {N}")
    return math.comb(fixed_point_count(p), N - n)


def trace_Ln_class_function(N: int, n: int) -> ClassFunction:
    if not 0 <= n <= N:
        raise ValueError(f"need 0 <= n <= N, got n={n}, N={N}")
    table = character_table(N)
    return ClassFunction(N, tuple(math.comb(rho.ones, N - n) for rho in table.partitions))


def decompose_trace_Ln(N: int, n: int) -> dict[IntegerPartition, Fraction]:
    """Exact inner products of ``trace_Ln(N, n, .)`` with each irreducible character.

    These are not always integers; callers inspect them rather than assume it.
    """
    f = trace_Ln_class_function(N, n)
    return dict(zip(character_table(N).partitions, _inner_products(f)))


@lru_cache(maxsize=None)
def _perm_classes(n: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)
    table = character_table(n)
    idx = np.array([table.index(cycle_type(Permutation(tuple(p)))) for p in perms], dtype=np.intp)
    return perms, idx


def immanant(a, lam: IntegerPartition) -> complex:
    """``sum_sigma chi_lam(sigma) prod_i a[i, sigma(i)]``."""
    m = as_matrix(a)
    n = m.shape[0]
    if m.shape[1] != n:
        raise ValueError(f"immanant needs a square matrix, got {m.shape}")
    if lam.total != n:
        raise ValueError(f"partition {lam} does not have total {n}")
    if n > IMMANANT_MAX_N:
        raise CapacityError(f"immanant capped at n={IMMANANT_MAX_N}, got {n}")
    if n == 0:
        return 1 + 0j
    perms, idx = _perm_classes(n)
    chars = np.asarray(character_table(n).row(lam), dtype=float)[idx]
    diagonals = np.prod(m[np.arange(n), perms], axis=1)
    return complex(chars @ diagonals)
