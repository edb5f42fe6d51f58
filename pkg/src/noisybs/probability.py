"""Output probabilities of partially distinguishable bosons.

All routes take the interferometer ``U`` (M x M, or any matrix for the
oracles), the list of occupied input ports and a sorted no-collision output
configuration.  Write ``A = U[inputs, out]`` and ``|A|^2`` for its
elementwise squared modulus.  The routes are

``probability_bruteforce``
    the double sum over S_N x S_N weighted by the model.
``probability_from_model``
    any fixed-point model as ``sum_s a[N-s] U(D_s)`` with the fast kernel.
``probability_expansion``
    cut-off model through derangement blocks times classical permanents.
``convex_sum_probability``
    binomial mixture of n-boson quantum factors and classical permanents.
``rearranged_probability``
    K-boson factors weighted by inverse binomials, times classical permanents.

They agree on their common domain; the test-suite checks this.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from noisybs import __version__
from noisybs.config import (
    BRUTEFORCE_MAX_N,
    CONVEX_SUM_MAX_N,
    DERANGEMENT_SUM_MAX_N,
    DISTRIBUTION_MAX_CONFIGS,
    IMAG_ERROR_REL,
    IMAG_WARN_REL,
    REARRANGED_MAX_N,
)
from noisybs.errors import CapacityError, ImaginaryResidueError
from noisybs.kernels import (
    as_matrix,
    derangement_sums,
    derangement_sums_batch,
    magnitude_scale,
    permanent,
    permanent_batch,
    submatrix,
)
from noisybs.models import FixedPointModel, model_rearranged

log = logging.getLogger(__name__)

__all__ = [
    "OutputConfiguration",
    "DistributionTable",
    "no_collision_configs",
    "classical_permanent",
    "probability_bruteforce",
    "probability_from_model",
    "probability_expansion",
    "quantum_factor_cutoff",
    "convex_sum_probability",
    "rearranged_probability",
    "permanent_split",
    "derangement_table",
    "distribution_from_sums",
    "enumerate_distribution",
    "total_variation_distance",
    "negative_mass",
    "ordered_tuple_mass",
]


@dataclass(frozen=True)
class OutputConfiguration:
    ports: tuple[int, ...]

    def __post_init__(self):
        ports = tuple(int(p) for p in self.ports)
        if any(a >= b for a, b in zip(ports, ports[1:])):
            raise ValueError(f"output ports must be strictly increasing: {ports}")
        if ports and ports[0] < 0:
            raise ValueError(f"output ports must be non-negative: {ports}")
        object.__setattr__(self, "ports", ports)

    def __str__(self) -> str:
        return "-".join(map(str, self.ports))

    @classmethod
    def parse(cls, text: str) -> "OutputConfiguration":
        return cls(tuple(int(t) for t in text.split("-")) if text else ())


def _ports(out) -> tuple[int, ...]:
    if isinstance(out, OutputConfiguration):
        return out.ports
    return OutputConfiguration(tuple(out)).ports


def no_collision_configs(m: int, n: int) -> list[tuple[int, ...]]:
    """All sorted n-subsets of range(m), lexicographic."""
    return list(itertools.combinations(range(m), n))


def _real(value: complex, scale: float, what: str) -> float:
    residue = abs(value.imag)
    if residue > IMAG_ERROR_REL * (abs(value.real) + scale):
        raise ImaginaryResidueError(what, residue)
    if residue > IMAG_WARN_REL * (abs(value.real) + scale):
        log.debug("%s: imaginary residue %.3e dropped", what, residue)
    return float(value.real)


def classical_permanent(a: np.ndarray) -> float:
    """Permanent of ``|a|**2``: the probability of distinguishable particles."""
    return float(permanent(np.abs(a) ** 2).real)


# -- oracles ------------------------------------------------------------------


def _agreement_rows(perms: np.ndarray, start: int, stop: int) -> np.ndarray:
    return (perms[start:stop, None, :] == perms[None, :, :]).sum(axis=-1)


def probability_bruteforce(u, model: FixedPointModel, inputs: Sequence[int], out) -> float:
    """The model-weighted double sum over permutation pairs.

    ``sum_{s1, s2} F(s1 s2^-1) prod_k conj(U[in[s1(k)], l_k]) U[in[s2(k)], l_k]``.
    Works for any matrix, unitary or not.
    """
    ports = _ports(out)
    a = submatrix(u, inputs, ports)
    n = a.shape[0]
    if n != model.n_total:
        raise ValueError(f"model acts on {model.n_total} bosons, got {n} inputs")
    if n > BRUTEFORCE_MAX_N:
        raise CapacityError(f"probability_bruteforce capped at N={BRUTEFORCE_MAX_N}, got {n}")
    if n == 0:
        return float(model.coefficients()[0])
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    z = np.prod(a[perms, np.arange(n)], axis=1)
    coef = model.coefficients()
    total = 0j
    chunk = max(1, 2_000_000 // (len(perms) * n))
    for start in range(0, len(perms), chunk):
        stop = min(start + chunk, len(perms))
        # C1(s1 s2^-1) is the number of positions where s1 and s2 agree.
        weights = coef[_agreement_rows(perms, start, stop)]
        total += np.conj(z[start:stop]) @ (weights @ z)
    return _real(complex(total), magnitude_scale(a), "probability_bruteforce")


# -- fast routes --------------------------------------------------------------


def _class_weights(model: FixedPointModel) -> np.ndarray:
    """``w[s] = a[N - s]``, the weight of the class moving s points."""
    return model.coefficients()[::-1].copy()


def probability_from_model(u, model: FixedPointModel, inputs: Sequence[int], out, method: str = "glynn") -> float:
    """``sum_s a[N-s] U(D_s)`` for any fixed-point model."""
    ports = _ports(out)
    if len(ports) != model.n_total:
        raise ValueError(f"model acts on {model.n_total} bosons, got {len(ports)} outputs")
    sums = derangement_sums(u, inputs, ports, method=method)
    return float(sums @ _class_weights(model))


def _subset_blocks(a: np.ndarray, size: int):
    """Row/column ``size``-subsets of ``a`` with the complementary blocks."""
    n = a.shape[0]
    subsets = list(itertools.combinations(range(n), size))
    comps = [tuple(i for i in range(n) if i not in s) for s in subsets]
    pairs = list(itertools.product(range(len(subsets)), repeat=2))
    inner = np.empty((len(pairs), size, size), dtype=np.complex128)
    outer = np.empty((len(pairs), n - size, n - size), dtype=np.complex128)
    for idx, (i, j) in enumerate(pairs):
        inner[idx] = a[np.ix_(subsets[i], subsets[j])]
        outer[idx] = a[np.ix_(comps[i], comps[j])]
    return inner, outer


def _classical_batch(outer: np.ndarray) -> np.ndarray:
    return permanent_batch(np.abs(outer) ** 2).real


def _check_n(n: int, cap: int, what: str) -> None:
    if n > cap:
        raise CapacityError(f"{what} capped at N={cap}, got {n}")


def probability_expansion(u, N: int, R: int, x, inputs: Sequence[int], out) -> float:
    """Cut-off model ``sum_{n<=R} x**n U(D^(N)_n)``, each class factored.

    ``U(D^(N)_n)`` is the sum over row subsets k and column subsets l of
    size n of the block derangement sum ``U(D^(n)_n)[k|l]`` times the
    classical permanent on the complementary rows and columns.
    """
    ports = _ports(out)
    a = submatrix(u, inputs, ports)
    if a.shape[0] != N:
        raise ValueError(f"N={N} but {a.shape[0]} inputs were given")
    _check_n(N, DERANGEMENT_SUM_MAX_N, "probability_expansion")
    if not 0 <= R <= N:
        raise ValueError(f"need 0 <= R <= N, got R={R}")
    x = float(x)
    total = 0.0
    for n in range(R + 1):
        if n == 1:
            continue  # no permutation moves exactly one point
        inner, outer = _subset_blocks(a, n)
        quantum = derangement_sums_batch(inner)[:, n] if n else np.ones(len(inner))
        total += x**n * float(quantum @ _classical_batch(outer))
    return total


def quantum_factor_cutoff(u, n: int, R: int, inputs: Sequence[int], out) -> float:
    """``sum_{s<=R} U(D^(n)_s)``: the n-boson factor at x = 1 with cut-off R.

    ``R >= n`` gives ``|per A|**2``; smaller ``R`` may give negative values.
    """
    ports = _ports(out)
    if len(ports) != n:
        raise ValueError(f"n={n} but {len(ports)} outputs were given")
    if R < 0:
        raise ValueError("R must be non-negative")
    sums = derangement_sums(u, inputs, ports)
    return float(np.sum(sums[: min(R, n) + 1]))


def convex_sum_probability(u, N: int, x, inputs: Sequence[int], out, cutoff: int | None = None) -> float:
    """Binomial mixture form of the uniform or cut-off model.

    ``sum_n x**n (1-x)**(N-n) sum_{k, l} Q(A[k|l]) per|A|^2[k^c|l^c]`` with
    ``Q = |per|**2`` (no cut-off) or the cut-off quantum factor.
    """
    ports = _ports(out)
    a = submatrix(u, inputs, ports)
    if a.shape[0] != N:
        raise ValueError(f"N={N} but {a.shape[0]} inputs were given")
    _check_n(N, CONVEX_SUM_MAX_N, "convex_sum_probability")
    x = float(x)
    total = 0.0
    for n in range(N + 1):
        weight = x**n * (1.0 - x) ** (N - n)
        if weight == 0.0:
            continue
        inner, outer = _subset_blocks(a, n)
        if n == 0:
            quantum = np.ones(len(inner))
        elif cutoff is None or cutoff >= n:
            quantum = np.abs(permanent_batch(inner)) ** 2
        else:
            quantum = derangement_sums_batch(inner)[:, : cutoff + 1].sum(axis=1)
        total += weight * float(quantum @ _classical_batch(outer))
    return total


def rearranged_probability(u, N: int, K: int, R: int, x, inputs: Sequence[int], out) -> float:
    """Cut-off model rewritten through K-boson factors.

    ``sum_{k, l; |k|=|l|=K} p_K(A[k|l]) per|A|^2[k^c|l^c]`` where the
    K-boson factor uses :func:`~noisybs.models.model_rearranged`, i.e.
    ``sum_{n<=R} x**n / C(N-n, K-n) U(D^(K)_n)``.
    """
    ports = _ports(out)
    a = submatrix(u, inputs, ports)
    if a.shape[0] != N:
        raise ValueError(f"N={N} but {a.shape[0]} inputs were given")
    _check_n(N, REARRANGED_MAX_N, "rearranged_probability")
    if not 0 <= R <= K <= N:
        raise ValueError(f"need 0 <= R <= K <= N, got R={R}, K={K}, N={N}")
    weights = _class_weights(model_rearranged(N, K, R, float(x)))
    inner, outer = _subset_blocks(a, K)
    factor = derangement_sums_batch(inner) @ weights if K else np.full(len(inner), weights[0])
    return float(factor @ _classical_batch(outer))


def permanent_split(b, K: int) -> complex:
    """Double Laplace expansion of ``per(b)`` over K-subsets of rows and columns.

    ``C(n, K)**-1 sum_{r, c} per b[r|c] per b[r^c|c^c]``; equals ``per(b)``.
    """
    b = as_matrix(b)
    n = b.shape[0]
    if not 0 <= K <= n:
        raise ValueError(f"need 0 <= K <= n, got K={K}")
    inner, outer = _subset_blocks(b, K)
    if K == 0:
        left = np.ones(len(inner))
    else:
        left = permanent_batch(inner)
    right = permanent_batch(outer) if K < n else np.ones(len(outer))
    return complex(np.sum(left * right) / math.comb(n, K))


# -- distributions ------------------------------------------------------------


@dataclass
class DistributionTable:
    """Probabilities of every no-collision output, lexicographic in the ports."""

    configs: list[tuple[int, ...]]
    probs: np.ndarray
    model_label: str
    meta: dict = field(default_factory=dict)

    def total(self) -> float:
        return float(np.sum(self.probs))

    def negative_mass(self) -> float:
        return negative_mass(self)

    def renormalized(self) -> "DistributionTable":
        """The distribution conditioned on no collision."""
        return DistributionTable(
            list(self.configs), self.probs / self.total(), self.model_label + "|renormalized", dict(self.meta)
        )

    def _header(self) -> dict:
        return {
            "model_label": self.model_label,
            "seed": self.meta.get("seed"),
            "version": __version__,
            **{k: v for k, v in self.meta.items() if k != "seed"},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self._header().items():
            buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["ports", "probability"])
        for cfg, p in zip(self.configs, self.probs):
            writer.writerow(["-".join(map(str, cfg)), f"{p:.17g}"])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema": "noisybs.distribution/1",
            **self._header(),
            "configs": [list(c) for c in self.configs],
            "probs": [float(p) for p in self.probs],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DistributionTable":
        doc = json.loads(text)
        meta = {k: v for k, v in doc.items() if k not in ("schema", "model_label", "version", "configs", "probs")}
        return cls([tuple(c) for c in doc["configs"]], np.asarray(doc["probs"], dtype=float), doc["model_label"], meta)

    @classmethod
    def from_csv(cls, text: str) -> "DistributionTable":
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line:
                rows.append(line)
        reader = csv.reader(rows)
        next(reader)
        configs, probs = [], []
        for ports, p in reader:
            configs.append(OutputConfiguration.parse(ports).ports)
            probs.append(float(p))
        label = meta.pop("model_label", "")
        meta.pop("version", None)
        return cls(configs, np.asarray(probs), label, meta)


def derangement_table(u, inputs: Sequence[int], chunk: int = 20000) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Derangement sums of every no-collision output; shape (C(M, N), N+1).

    Any fixed-point model's table is then ``sums @ a[::-1]``.
    """
    u = as_matrix(u)
    m = u.shape[1]
    n = len(inputs)
    configs = no_collision_configs(m, n)
    if len(configs) > DISTRIBUTION_MAX_CONFIGS:
        raise CapacityError(f"C({m},{n}) = {len(configs)} outputs exceeds {DISTRIBUTION_MAX_CONFIGS}")
    _check_n(n, DERANGEMENT_SUM_MAX_N, "derangement_table")
    rows = u[np.asarray(inputs, dtype=np.intp)]
    cols = np.asarray(configs, dtype=np.intp).reshape(len(configs), n)
    sums = np.empty((len(configs), n + 1))
    for start in range(0, len(configs), chunk):
        stop = min(start + chunk, len(configs))
        blocks = np.transpose(rows[:, cols[start:stop]], (1, 0, 2))
        sums[start:stop] = derangement_sums_batch(blocks)
    return configs, sums


def distribution_from_sums(configs, sums: np.ndarray, model: FixedPointModel, meta: dict | None = None) -> DistributionTable:
    if sums.shape[1] != model.n_total + 1:
        raise ValueError("model size does not match the derangement table")
    return DistributionTable(list(configs), sums @ _class_weights(model), model.label, dict(meta or {}))


def enumerate_distribution(u, model: FixedPointModel, inputs: Sequence[int], meta: dict | None = None) -> DistributionTable:
    """Full no-collision table of ``model``, not renormalized."""
    if len(inputs) != model.n_total:
        raise ValueError(f"model acts on {model.n_total} bosons, got {len(inputs)} inputs")
    configs, sums = derangement_table(u, inputs)
    params = {k: (str(v) if not isinstance(v, (int, float)) else v) for k, v in model.params.items()}
    return distribution_from_sums(configs, sums, model, {**params, **(meta or {})})


def total_variation_distance(p: DistributionTable, q: DistributionTable) -> float:
    """``0.5 * sum |p - q|`` over the shared no-collision support."""
    if list(p.configs) != list(q.configs):
        raise ValueError("distribution tables have different supports")
    return 0.5 * float(np.sum(np.abs(np.asarray(p.probs) - np.asarray(q.probs))))


def negative_mass(table: DistributionTable) -> float:
    """``sum max(0, -p)`` over the table."""
    return float(np.sum(np.clip(-np.asarray(table.probs), 0.0, None)))


def ordered_tuple_mass(u, model: FixedPointModel, inputs: Sequence[int]) -> float:
    """Model-weighted double sum added over all M**N ordered output tuples.

    Collisions included, no multiplicity factors; equals N! for unitary U.
    """
    u = as_matrix(u)
    m = u.shape[1]
    n = len(inputs)
    if n != model.n_total:
        raise ValueError(f"model acts on {model.n_total} bosons, got {n} inputs")
    if m**n > DISTRIBUTION_MAX_CONFIGS:
        raise CapacityError(f"{m}**{n} ordered tuples exceeds {DISTRIBUTION_MAX_CONFIGS}")
    rows = u[np.asarray(inputs, dtype=np.intp)]
    cols = np.array(list(itertools.product(range(m), repeat=n)), dtype=np.intp).reshape(-1, n)
    blocks = np.transpose(rows[:, cols], (1, 0, 2))
    return float(np.sum(derangement_sums_batch(blocks) @ _class_weights(model)))
