"""Fixed-point-count distinguishability models and positivity certificates.

A model is a function on S_N that depends only on the number of fixed
points, ``F(sigma) = a[C1(sigma)]``.  Writing ``a`` in the basis of the
pointwise-stabilizer indicators gives the binomial transform

    b[n] = sum_{m <= n} C(n, m) (-1)**(n - m) a[m],
    a[m] = sum_{n <= m} C(m, n) b[n],

and ``b >= 0`` is sufficient (not necessary) for ``F`` to be positive
definite.  Parameters supplied as ``Fraction``, ``int`` or strings such as
``"1/14"`` stay exact; Python floats are accepted but cannot be certified
in exact mode.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence, Union

import numpy as np

from noisybs.config import FLOAT_POSITIVITY_TOL, GRAM_MAX_N, THRESHOLD_BITS
from noisybs.errors import CapacityError, ExactArithmeticError
from noisybs.symgroup import Permutation, fixed_point_count

__all__ = [
    "FixedPointModel",
    "PositivityCertificate",
    "ThresholdResult",
    "parse_parameter",
    "model_uniform",
    "model_cutoff",
    "model_rearranged",
    "model_custom",
    "binomial_transform",
    "reconstruct",
    "gram_matrix",
    "gram_min_eigenvalue",
    "rearranged_b",
    "rearranged_b_rising",
    "rearranged_b_asymptotic",
    "positivity_threshold",
    "evaluate",
]

Number = Union[Fraction, float]


def parse_parameter(x) -> Number:
    """Return ``x`` as a ``Fraction`` when it is exactly rational, else ``float``.

    Strings are parsed exactly: ``"1/14"`` and ``"0.3"`` both become
    fractions.  Python floats stay floats.
    """
    if isinstance(x, bool):
        raise TypeError("boolean is not a model parameter")
    if isinstance(x, (Fraction, int)) or isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError as exc:
            raise ValueError(f"cannot parse {x!r} as p/q or a decimal") from exc
    return float(x)


def _is_exact(v) -> bool:
    return isinstance(v, (Fraction, int))


def _check_unit(x: Number, name: str = "x") -> None:
    if not 0 <= x <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


@dataclass(frozen=True)
class FixedPointModel:
    """``F(sigma) = a[C1(sigma)]`` on S_n with ``n = n_total``.

    ``params`` records the constructor arguments (``x``, ``R``, ``K``, ``N``).
    Models built by :func:`model_rearranged` are not normalized, the
    identity carries the weight ``1 / C(N, K)``; every other family has
    ``a[n_total] == 1``.
    """

    n_total: int
    a: tuple
    label: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = tuple(self.a)
        if len(a) != self.n_total + 1:
            raise ValueError(f"need {self.n_total + 1} coefficients, got {len(a)}")
        object.__setattr__(self, "a", a)
        if self.label != "rearranged" and a[-1] != 1:
            raise ValueError(f"model must satisfy F(identity) = 1, got a[N] = {a[-1]}")

    @property
    def exact(self) -> bool:
        return all(_is_exact(v) for v in self.a)

    @property
    def normalized(self) -> bool:
        return self.a[-1] == 1

    def coefficients(self) -> np.ndarray:
        return np.array([float(v) for v in self.a])

    def __call__(self, p: Permutation):
        return evaluate(self, p)


def _powers(x: Number, n: int):
    return [x ** (n - m) for m in range(n + 1)]


def model_uniform(N: int, x) -> FixedPointModel:
    """``J_N(sigma) = x**(N - C1(sigma))``."""
    x = parse_parameter(x)
    _check_unit(x)
    return FixedPointModel(N, tuple(_powers(x, N)), "uniform", {"N": N, "x": x})


def model_cutoff(N: int, R: int, x) -> FixedPointModel:
    """Uniform model with interference truncated at ``R`` moved points."""
    x = parse_parameter(x)
    _check_unit(x)
    if not 0 <= R <= N:
        raise ValueError(f"need 0 <= R <= N, got R={R}, N={N}")
    zero = Fraction(0) if _is_exact(x) else 0.0
    a = tuple(x ** (N - m) if m >= N - R else zero for m in range(N + 1))
    return FixedPointModel(N, a, "cutoff", {"N": N, "R": R, "x": x})


def model_rearranged(N: int, K: int, R: int, x) -> FixedPointModel:
    """Distinguishability function of the K-boson factor of the rearranged form.

    ``a[m] = x**(K - m) / C(N - K + m, m)`` for ``K - R <= m <= K``, else 0.
    """
    x = parse_parameter(x)
    _check_unit(x)
    if not (0 <= R <= K <= N):
        raise ValueError(f"need 0 <= R <= K <= N, got N={N}, K={K}, R={R}")
    exact = _is_exact(x)
    zero = Fraction(0) if exact else 0.0
    a = []
    for m in range(K + 1):
        if m < K - R:
            a.append(zero)
            continue
        binom = math.comb(N - K + m, m)
        a.append(x ** (K - m) / binom if not exact else Fraction(x ** (K - m)) / binom)
    return FixedPointModel(K, tuple(a), "rearranged", {"N": N, "K": K, "R": R, "x": x})


def model_custom(a: Sequence, label: str = "custom") -> FixedPointModel:
    a = tuple(parse_parameter(v) for v in a)
    return FixedPointModel(len(a) - 1, a, label, {})


def evaluate(model: FixedPointModel, p: Permutation):
    if p.n != model.n_total:
        raise ValueError(f"permutation of {p.n} points for a model on {model.n_total}")
    return model.a[fixed_point_count(p)]


# -- positivity ---------------------------------------------------------------


@dataclass(frozen=True)
class PositivityCertificate:
    b: tuple
    sufficient_pd: bool
    min_b: Number
    exact: bool

    def reconstruct(self) -> tuple:
        return reconstruct(self.b)


def reconstruct(b: Sequence) -> tuple:
    """Inverse binomial transform, ``a[m] = sum_{n<=m} C(m, n) b[n]``."""
    return tuple(sum(math.comb(m, n) * b[n] for n in range(m + 1)) for m in range(len(b)))


def _transform(a: Sequence) -> list:
    return [
        sum(math.comb(n, m) * (-1) ** (n - m) * a[m] for m in range(n + 1)) for n in range(len(a))
    ]


def binomial_transform(model: FixedPointModel, exact: bool | None = None) -> PositivityCertificate:
    """Coefficients ``b`` of ``model`` and the sufficient positivity test.

    ``exact=None`` picks rational arithmetic whenever the model is rational.
    Floating mode classifies ``b[n] < -1e-12`` as negative.
    """
    if exact is None:
        exact = model.exact
    if exact:
        if not model.exact:
            bad = next(v for v in model.a if not _is_exact(v))
            raise ExactArithmeticError(
                f"exact mode needs rational coefficients, got {bad!r}; "
                "pass x as a Fraction or a 'p/q' string (e.g. Fraction(x).limit_denominator())"
            )
        b = _transform([Fraction(v) for v in model.a])
        lo = min(b)
        return PositivityCertificate(tuple(b), lo >= 0, lo, True)
    b = _transform([float(v) for v in model.a])
    lo = min(b)
    return PositivityCertificate(tuple(b), lo >= -FLOAT_POSITIVITY_TOL, lo, False)


def _relative_fixed_points(n: int) -> np.ndarray:
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)
    # C1(s1 s2^-1) equals the number of positions where s1 and s2 agree.
    return (perms[:, None, :] == perms[None, :, :]).sum(axis=-1)


def gram_matrix(model: FixedPointModel) -> np.ndarray:
    """The N! x N! matrix ``F(s1 s2^-1)``, rows in lexicographic order of S_N."""
    n = model.n_total
    if n > GRAM_MAX_N:
        raise CapacityError(f"Gram matrix capped at N={GRAM_MAX_N}, got {n}")
    return model.coefficients()[_relative_fixed_points(n)]


def gram_min_eigenvalue(model: FixedPointModel) -> float:
    """Smallest eigenvalue of :func:`gram_matrix`; negative means not positive definite."""
    return float(np.linalg.eigvalsh(gram_matrix(model))[0])


# -- rearranged-model threshold ------------------------------------------------


def _rising(base: int, m: int) -> int:
    out = 1
    for j in range(m):
        out *= base + j
    return out


def rearranged_b(N: int, K: int, R: int, x) -> tuple:
    """Exact ``b`` of :func:`model_rearranged`; ``b[n] = 0`` for ``n < K - R``."""
    return binomial_transform(model_rearranged(N, K, R, x), exact=_is_exact(parse_parameter(x))).b


def rearranged_b_rising(N: int, K: int, R: int, x) -> tuple:
    """The same coefficients through the rising-factorial form.

    ``b[n] = n! x**(K-n) sum_{s=0}^{n-K+R} (-x)**s / s! / (N-K+1)^(n-s)``.
    """
    x = parse_parameter(x)
    out = []
    for n in range(K + 1):
        top = n - K + R
        if top < 0:
            out.append(Fraction(0) if _is_exact(x) else 0.0)
            continue
        acc = sum(
            (Fraction((-x) ** s, math.factorial(s) * _rising(N - K + 1, n - s)) if _is_exact(x)
             else (-x) ** s / (math.factorial(s) * _rising(N - K + 1, n - s)))
            for s in range(top + 1)
        )
        out.append(math.factorial(n) * x ** (K - n) * acc)
    return tuple(out)


def rearranged_b_asymptotic(N: int, K: int, R: int, x: float) -> tuple:
    """Large ``N - K`` approximation, rising factorials replaced by powers of ``N - K``."""
    x = float(parse_parameter(x))
    d = N - K
    out = []
    for n in range(K + 1):
        top = n - K + R
        if top < 0:
            out.append(0.0)
            continue
        series = sum((-d * x) ** s / math.factorial(s) for s in range(top + 1))
        out.append(math.factorial(n) * x ** (K - n) / d**n * series)
    return tuple(out)


@dataclass(frozen=True)
class ThresholdResult:
    """Outcome of :func:`positivity_threshold`.

    ``x_star`` is the largest probed dyadic rational with all ``b >= 0``;
    ``feasible_at_star`` and ``feasible_above`` are exact re-checks at
    ``x_star`` and ``x_star * (1 + 2**-20)``.  Feasibility is not known to
    be an interval in ``x``; the search assumes it and reports both checks.
    """

    N: int
    K: int
    R: int
    x_star: Fraction
    b_at_star: tuple
    feasible_at_star: bool
    feasible_above: bool
    probes: int

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "K": self.K,
            "R": self.R,
            "x_star": str(self.x_star),
            "x_star_float": float(self.x_star),
            "b_at_star": [str(v) for v in self.b_at_star],
            "feasible_at_star": self.feasible_at_star,
            "feasible_above": self.feasible_above,
            "probes": self.probes,
        }


def _feasible(N: int, K: int, R: int, x: Fraction) -> bool:
    return min(rearranged_b(N, K, R, x)) >= 0


def positivity_threshold(N: int, K: int, R: int, bits: int = THRESHOLD_BITS) -> ThresholdResult:
    """Largest ``x`` in (0, 1] with every exact ``b`` of the rearranged model >= 0.

    Dyadic bisection on [0, 1] down to denominator ``2**bits``, each probe
    an exact sign evaluation.
    """
    if not (0 <= R <= K <= N):
        raise ValueError(f"need 0 <= R <= K <= N, got N={N}, K={K}, R={R}")
    probes = 1
    if _feasible(N, K, R, Fraction(1)):
        x_star = Fraction(1)
    else:
        lo, hi = Fraction(0), Fraction(1)
        for _ in range(bits):
            mid = (lo + hi) / 2
            probes += 1
            if _feasible(N, K, R, mid):
                lo = mid
            else:
                hi = mid
        x_star = lo
    above = min(x_star * (1 + Fraction(1, 2**20)), Fraction(1))
    return ThresholdResult(
        N, K, R, x_star,
        rearranged_b(N, K, R, x_star),
        _feasible(N, K, R, x_star),
        _feasible(N, K, R, above) if above > x_star else True,
        probes,
    )
