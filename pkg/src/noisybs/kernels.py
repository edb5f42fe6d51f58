"""Exponential-time kernels: permanents, interference terms, derangement sums.

Every fast path has a brute-force twin used as an oracle in the tests:

============================  ===============================
fast                          oracle
============================  ===============================
:func:`permanent` (Ryser)     :func:`permanent_naive`, Glynn
:func:`derangement_sums`      :func:`derangement_sum_bruteforce`
:func:`chi_moment`            :func:`chi_moment_bruteforce`
============================  ===============================

Notation.  For a block ``A = U[inputs, outputs]`` the interference term of a
permutation ``sigma`` of the rows is

    T(sigma) = sum_tau prod_c conj(A[sigma(tau(c)), c]) * A[tau(c), c]

and the derangement sum ``U(D_s)`` adds ``T`` over all ``sigma`` that move
exactly ``s`` rows.  ``T(identity)`` is the permanent of ``|A|**2``.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Sequence

import numba
import numpy as np

from noisybs.config import (
    DERANGEMENT_BRUTEFORCE_MAX_N,
    DERANGEMENT_SUM_MAX_N,
    INTERFERENCE_MAX_N,
    PERMANENT_MAX_N,
    PERMANENT_NAIVE_MAX_N,
)
from noisybs.errors import CapacityError, ImaginaryResidueError
from noisybs.symgroup import Permutation, all_permutations, enumerate_derangement_class, fixed_point_count

__all__ = [
    "as_matrix",
    "unitarity_error",
    "is_unitary",
    "submatrix",
    "permanent",
    "permanent_glynn",
    "permanent_naive",
    "interference_term",
    "fixed_point_coefficients",
    "derangement_sums",
    "derangement_sums_batch",
    "permanent_batch",
    "derangement_sum",
    "derangement_sum_bruteforce",
    "magnitude_scale",
    "chi_moment",
    "chi_moment_bruteforce",
    "KERNEL_IMAG_RTOL",
]

# Relative to magnitude_scale(A); see derangement_sums.
KERNEL_IMAG_RTOL = 1e-9


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def unitarity_error(u) -> float:
    """``max |U^dagger U - I|`` over entries."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return math.inf
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def is_unitary(u, tol: float = 1e-10) -> bool:
    return unitarity_error(u) <= tol


def submatrix(u, inputs: Sequence[int], outputs: Sequence[int]) -> np.ndarray:
    """Rows ``inputs`` and columns ``outputs`` of ``u`` (repeats allowed)."""
    u = as_matrix(u)
    rows = np.asarray(inputs, dtype=np.intp)
    cols = np.asarray(outputs, dtype=np.intp)
    if rows.shape != cols.shape:
        raise ValueError(f"{len(rows)} inputs but {len(cols)} outputs")
    return u[np.ix_(rows, cols)]


def _square(a, cap: int, what: str) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} needs a square matrix, got {m.shape}")
    if m.shape[0] > cap:
        raise CapacityError(f"{what} capped at n={cap}, got n={m.shape[0]}")
    return m


# -- permanents ---------------------------------------------------------------


@numba.njit(cache=True)
def _ctz(k):
    c = 0
    while (k & 1) == 0:
        k >>= 1
        c += 1
    return c


@numba.njit(cache=True)
def _ryser_gray(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    rowsum = np.zeros(n, dtype=np.complex128)
    inset = np.zeros(n, dtype=np.bool_)
    total = 0.0 + 0.0j
    size = 0
    for g in range(1, 1 << n):
        j = _ctz(g)
        if inset[j]:
            for i in range(n):
                rowsum[i] -= a[i, j]
            size -= 1
        else:
            for i in range(n):
                rowsum[i] += a[i, j]
            size += 1
        inset[j] = not inset[j]
        prod = 1.0 + 0.0j
        for i in range(n):
            prod *= rowsum[i]
        if (n - size) & 1:
            total -= prod
        else:
            total += prod
    return total


@numba.njit(cache=True)
def _glynn_gray(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    colsum = np.zeros(n, dtype=np.complex128)
    for j in range(n):
        for i in range(n):
            colsum[j] += a[i, j]
    delta = np.ones(n, dtype=np.int8)
    sign = 1
    total = 0.0 + 0.0j
    prod = 1.0 + 0.0j
    for j in range(n):
        prod *= colsum[j]
    total += prod
    for g in range(1, 1 << (n - 1)):
        i = _ctz(g) + 1
        for j in range(n):
            colsum[j] -= 2.0 * delta[i] * a[i, j]
        delta[i] = -delta[i]
        sign = -sign
        prod = 1.0 + 0.0j
        for j in range(n):
            prod *= colsum[j]
        total += sign * prod
    return total / (1 << (n - 1))


def permanent(a) -> complex:
    """Permanent by Ryser's formula with Gray-code column subsets, O(n 2^n)."""
    m = _square(a, PERMANENT_MAX_N, "permanent")
    return complex(_ryser_gray(np.ascontiguousarray(m)))


def permanent_glynn(a) -> complex:
    """Permanent by Glynn's formula with Gray-code sign vectors."""
    m = _square(a, PERMANENT_MAX_N, "permanent")
    return complex(_glynn_gray(np.ascontiguousarray(m)))


def _perm_array(n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0), dtype=np.intp)
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def permanent_naive(a) -> complex:
    """Permanent as the explicit sum over all n! diagonals."""
    m = _square(a, PERMANENT_NAIVE_MAX_N, "permanent_naive")
    n = m.shape[0]
    perms = _perm_array(n)
    return complex(np.sum(np.prod(m[perms, np.arange(n)], axis=1)))


# -- interference terms and derangement sums ------------------------------------


def interference_term(u, sigma: Permutation, inputs: Sequence[int], outputs: Sequence[int]) -> complex:
    """``T(sigma)`` by explicit summation over every ``tau`` in S_n."""
    a = submatrix(u, inputs, outputs)
    n = a.shape[0]
    if sigma.n != n:
        raise ValueError(f"sigma acts on {sigma.n} points but the block is {n}x{n}")
    if n > INTERFERENCE_MAX_N:
        raise CapacityError(f"interference_term capped at n={INTERFERENCE_MAX_N}, got {n}")
    taus = _perm_array(n)
    sig = np.asarray(sigma.mapping, dtype=np.intp)
    cols = np.arange(n)
    terms = np.conj(a[sig[taus], cols]) * a[taus, cols]
    return complex(np.sum(np.prod(terms, axis=1)))


@numba.njit(cache=True)
def _xi_values_ryser(a):
    """``P(xi_q) = sum_sigma xi_q**C1(sigma) T(sigma)`` on the n+1 roots of unity.

    Outer loop: Ryser over column subsets S gives H[j, r] = sum_{c in S}
    conj(a[j, c]) a[r, c].  Inner loop: Ryser over row subsets K of the
    permanent of W(xi), which is H with its diagonal scaled by xi.  Both
    loops walk Gray codes.  The outer accumulation is Kahan-compensated.
    """
    n = a.shape[0]
    nq = n + 1
    xim1 = np.empty(nq, dtype=np.complex128)
    for q in range(nq):
        th = 2.0 * np.pi * q / nq
        xim1[q] = complex(np.cos(th) - 1.0, np.sin(th))
    tot_re = np.zeros(nq)
    tot_im = np.zeros(nq)
    car_re = np.zeros(nq)
    car_im = np.zeros(nq)
    if n == 0:
        tot_re[0] = 1.0
        return tot_re + 1j * tot_im
    h = np.zeros((n, n), dtype=np.complex128)
    ca = np.conj(a)
    col_in = np.zeros(n, dtype=np.bool_)
    row_in = np.zeros(n, dtype=np.bool_)
    acc = np.zeros(n, dtype=np.complex128)
    diag = np.zeros((nq, n), dtype=np.complex128)
    inner = np.zeros(nq, dtype=np.complex128)
    n_cols = 0
    for gs in range(1, 1 << n):
        c = _ctz(gs)
        if col_in[c]:
            for j in range(n):
                for r in range(n):
                    h[j, r] -= ca[j, c] * a[r, c]
            n_cols -= 1
        else:
            for j in range(n):
                for r in range(n):
                    h[j, r] += ca[j, c] * a[r, c]
            n_cols += 1
        col_in[c] = not col_in[c]
        for q in range(nq):
            for r in range(n):
                diag[q, r] = xim1[q] * h[r, r]
        for r in range(n):
            acc[r] = 0.0
            row_in[r] = False
        for q in range(nq):
            inner[q] = 0.0
        n_rows = 0
        for gk in range(1, 1 << n):
            j = _ctz(gk)
            if row_in[j]:
                for r in range(n):
                    acc[r] -= h[j, r]
                n_rows -= 1
            else:
                for r in range(n):
                    acc[r] += h[j, r]
                n_rows += 1
            row_in[j] = not row_in[j]
            neg = ((n - n_rows) & 1) == 1
            for q in range(nq):
                prod = 1.0 + 0.0j
                for r in range(n):
                    if row_in[r]:
                        prod *= acc[r] + diag[q, r]
                    else:
                        prod *= acc[r]
                if neg:
                    inner[q] -= prod
                else:
                    inner[q] += prod
        neg_s = ((n - n_cols) & 1) == 1
        for q in range(nq):
            v = -inner[q] if neg_s else inner[q]
            y = v.real - car_re[q]
            t = tot_re[q] + y
            car_re[q] = (t - tot_re[q]) - y
            tot_re[q] = t
            y = v.imag - car_im[q]
            t = tot_im[q] + y
            car_im[q] = (t - tot_im[q]) - y
            tot_im[q] = t
    return tot_re + 1j * tot_im


@numba.njit(cache=True)
def _xi_values_glynn(a):
    """Same values as :func:`_xi_values_ryser` with Glynn sign vectors in both loops.

    Columns carry signs d_c (d_0 = +1) so that H[j, r] = sum_c d_c conj(a[j, c])
    a[r, c]; rows carry signs e_j (e_0 = +1) for the permanent of W(xi).
    Terms are balanced, so cancellation is far milder than with subsets.
    """
    n = a.shape[0]
    nq = n + 1
    xim1 = np.empty(nq, dtype=np.complex128)
    for q in range(nq):
        th = 2.0 * np.pi * q / nq
        xim1[q] = complex(np.cos(th) - 1.0, np.sin(th))
    tot_re = np.zeros(nq)
    tot_im = np.zeros(nq)
    car_re = np.zeros(nq)
    car_im = np.zeros(nq)
    if n == 0:
        tot_re[0] = 1.0
        return tot_re + 1j * tot_im
    ca = np.conj(a)
    h = np.zeros((n, n), dtype=np.complex128)
    for c in range(n):
        for j in range(n):
            for r in range(n):
                h[j, r] += ca[j, c] * a[r, c]
    dsign = np.ones(n, dtype=np.int8)
    esign = np.ones(n, dtype=np.int8)
    acc = np.zeros(n, dtype=np.complex128)
    diag = np.zeros((nq, n), dtype=np.complex128)
    inner = np.zeros(nq, dtype=np.complex128)
    par_d = 1
    half = 1 << (n - 1)
    for gs in range(half):
        if gs > 0:
            c = _ctz(gs) + 1
            f = -2.0 * dsign[c]
            for j in range(n):
                for r in range(n):
                    h[j, r] += f * ca[j, c] * a[r, c]
            dsign[c] = -dsign[c]
            par_d = -par_d
        for q in range(nq):
            for r in range(n):
                diag[q, r] = xim1[q] * h[r, r]
        for r in range(n):
            esign[r] = 1
            s = 0.0 + 0.0j
            for j in range(n):
                s += h[j, r]
            acc[r] = s
        for q in range(nq):
            inner[q] = 0.0
        par_e = 1
        for gk in range(half):
            if gk > 0:
                j = _ctz(gk) + 1
                f = -2.0 * esign[j]
                for r in range(n):
                    acc[r] += f * h[j, r]
                esign[j] = -esign[j]
                par_e = -par_e
            for q in range(nq):
                prod = 1.0 + 0.0j
                for r in range(n):
                    prod *= acc[r] + esign[r] * diag[q, r]
                if par_e < 0:
                    inner[q] -= prod
                else:
                    inner[q] += prod
        for q in range(nq):
            v = -inner[q] if par_d < 0 else inner[q]
            y = v.real - car_re[q]
            t = tot_re[q] + y
            car_re[q] = (t - tot_re[q]) - y
            tot_re[q] = t
            y = v.imag - car_im[q]
            t = tot_im[q] + y
            car_im[q] = (t - tot_im[q]) - y
            tot_im[q] = t
    norm = float(half) * float(half)
    return (tot_re + 1j * tot_im) / norm


@numba.njit(cache=True, nogil=True)
def _xi_values_batch(stack, glynn):
    b, n = stack.shape[0], stack.shape[1]
    out = np.empty((b, n + 1), dtype=np.complex128)
    for i in range(b):
        if glynn:
            out[i] = _xi_values_glynn(stack[i])
        else:
            out[i] = _xi_values_ryser(stack[i])
    return out


_METHODS = ("glynn", "ryser")


def _xi_values(a: np.ndarray, method: str) -> np.ndarray:
    if method not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}, got {method!r}")
    a = np.ascontiguousarray(a)
    return _xi_values_glynn(a) if method == "glynn" else _xi_values_ryser(a)


def _coefficients_from_values(vals: np.ndarray) -> np.ndarray:
    """Taylor coefficients of a degree-n polynomial from its n+1 root-of-unity values."""
    nq = vals.shape[-1]
    q = np.arange(nq)
    phase = np.exp(-2j * np.pi * np.outer(q, q) / nq)  # [m, q]
    return vals @ phase.T / nq


def fixed_point_coefficients(a, method: str = "glynn") -> np.ndarray:
    """Complex ``c_m = sum over sigma with m fixed points of T(sigma)``, m = 0..n."""
    m = _square(a, DERANGEMENT_SUM_MAX_N, "derangement_sum")
    return _coefficients_from_values(_xi_values(m, method))


def magnitude_scale(a) -> float:
    """Reference magnitude ``per(|A|)**2 / n! + per(|A|**2)`` for tolerances.

    ``per(|A|)**2`` bounds the sum of absolute values of all (n!)**2 terms;
    dividing by n! gives the size of a sum of that many random-phase
    terms, and the classical term is added so the scale never vanishes.
    """
    m = np.asarray(a, dtype=np.complex128)
    return float(_scales_batch(np.ascontiguousarray(m[None, :, :]))[0])


def _s_indices(n: int, s_set: Iterable[int] | None) -> np.ndarray:
    s = np.arange(n + 1) if s_set is None else np.asarray(list(s_set), dtype=np.intp)
    if np.any(s < 0) or np.any(s > n):
        raise ValueError(f"class indices must lie in 0..{n}: {s.tolist()}")
    return s


def _check_real(values: np.ndarray, scale: np.ndarray | float, what: str) -> None:
    residue = np.abs(values.imag)
    bound = KERNEL_IMAG_RTOL * (np.abs(values.real) + scale)
    if np.any(residue > bound):
        raise ImaginaryResidueError(what, float(np.max(residue)))


def derangement_sums(
    u,
    inputs: Sequence[int],
    outputs: Sequence[int],
    s_set: Iterable[int] | None = None,
    method: str = "glynn",
) -> np.ndarray:
    """Derangement sums ``U(D_s)`` for every ``s`` in ``s_set`` (default 0..n).

    One pass of a double inclusion-exclusion evaluates the polynomial
    ``P(xi) = sum_sigma xi**C1(sigma) T(sigma)`` at the n+1 roots of unity;
    ``U(D_s)`` is its coefficient of ``xi**(n-s)``, read off with the phase
    weights ``exp(-2 pi i q (n-s)/(n+1))``.  The phases for the requested
    classes are combined before contracting with the q-values, so the cost
    does not grow with ``len(s_set)``.

    ``method="ryser"`` runs subset inclusion-exclusion over columns and
    rows, O(n**2 4**n).  ``method="glynn"`` (default) uses sign vectors in
    both loops: four times fewer terms and, because the terms do not share
    a sign pattern, roughly five orders of magnitude less cancellation at
    n = 12.

    Raises :class:`ImaginaryResidueError` when a result is not real to
    ``KERNEL_IMAG_RTOL`` relative to :func:`magnitude_scale`.
    """
    a = _square(submatrix(u, inputs, outputs), DERANGEMENT_SUM_MAX_N, "derangement_sum")
    n = a.shape[0]
    s = _s_indices(n, s_set)
    vals = _xi_values(a, method)
    q = np.arange(n + 1)
    weights = np.exp(-2j * np.pi * np.outer(n - s, q) / (n + 1)) / (n + 1)
    out = weights @ vals
    _check_real(out, magnitude_scale(a), "derangement sum is not real")
    return out.real


@numba.njit(cache=True, nogil=True)
def _scales_batch(stack):
    b, n = stack.shape[0], stack.shape[1]
    out = np.empty(b)
    fact = 1.0
    for k in range(2, n + 1):
        fact *= k
    absm = np.empty((n, n), dtype=np.complex128)
    sq = np.empty((n, n), dtype=np.complex128)
    for i in range(b):
        for r in range(n):
            for c in range(n):
                v = abs(stack[i, r, c])
                absm[r, c] = v
                sq[r, c] = v * v
        out[i] = abs(_ryser_gray(absm)) ** 2 / fact + abs(_ryser_gray(sq))
    return out


@numba.njit(cache=True, nogil=True)
def _ryser_batch(stack):
    b = stack.shape[0]
    out = np.empty(b, dtype=np.complex128)
    for i in range(b):
        out[i] = _ryser_gray(stack[i])
    return out


def permanent_batch(blocks) -> np.ndarray:
    """Ryser permanents of a (B, n, n) stack."""
    stack = np.ascontiguousarray(np.asarray(blocks, dtype=np.complex128))
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValueError(f"expected a (B, n, n) stack, got {stack.shape}")
    if stack.shape[1] > PERMANENT_MAX_N:
        raise CapacityError(f"permanent capped at n={PERMANENT_MAX_N}, got n={stack.shape[1]}")
    return _ryser_batch(stack)


def derangement_sums_batch(blocks, method: str = "glynn") -> np.ndarray:
    """All ``U(D_s)``, s = 0..n, for a stack of n x n blocks; shape (B, n+1)."""
    stack = np.ascontiguousarray(np.asarray(blocks, dtype=np.complex128))
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValueError(f"expected a (B, n, n) stack, got {stack.shape}")
    n = stack.shape[1]
    if n > DERANGEMENT_SUM_MAX_N:
        raise CapacityError(f"derangement_sum capped at n={DERANGEMENT_SUM_MAX_N}, got {n}")
    if not np.all(np.isfinite(stack)):
        raise ValueError("matrix has non-finite entries")
    if method not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}, got {method!r}")
    if stack.shape[0] == 0:
        return np.zeros((0, n + 1))
    coeffs = _coefficients_from_values(_xi_values_batch(stack, method == "glynn"))
    out = coeffs[:, ::-1]  # coefficient of xi**(n-s) -> column s
    _check_real(out, _scales_batch(stack)[:, None], "derangement sum is not real")
    return np.ascontiguousarray(out.real)


def derangement_sum(u, inputs: Sequence[int], outputs: Sequence[int], s: int, method: str = "glynn") -> float:
    """Single derangement sum ``U(D_s)``; see :func:`derangement_sums`."""
    return float(derangement_sums(u, inputs, outputs, [s], method=method)[0])


def derangement_sum_bruteforce(u, inputs: Sequence[int], outputs: Sequence[int], s: int) -> float:
    """``U(D_s)`` as the literal double sum over the class and over S_n."""
    a = submatrix(u, inputs, outputs)
    n = a.shape[0]
    if n > DERANGEMENT_BRUTEFORCE_MAX_N:
        raise CapacityError(f"derangement_sum_bruteforce capped at n={DERANGEMENT_BRUTEFORCE_MAX_N}, got {n}")
    if not 0 <= s <= n:
        raise ValueError(f"class index must lie in 0..{n}, got {s}")
    rows = list(range(n))
    total = sum((interference_term(a, sigma, rows, rows) for sigma in enumerate_derangement_class(n, s)), 0j)
    scale = magnitude_scale(a) if n else 1.0
    _check_real(np.array([total]), scale, "brute-force derangement sum is not real")
    return float(total.real)


# -- chi(n) -------------------------------------------------------------------


def chi_moment(n: int) -> int:
    """``chi(n) = n! * sum_{k<=n} 1/k!``, exactly."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return sum(math.factorial(n) // math.factorial(k) for k in range(n + 1))


def chi_moment_bruteforce(n: int) -> int:
    """``sum over pi in S_n of 2**C1(pi)``, by enumeration."""
    if n > DERANGEMENT_BRUTEFORCE_MAX_N + 2:
        raise CapacityError(f"chi_moment_bruteforce capped at n={DERANGEMENT_BRUTEFORCE_MAX_N + 2}")
    return sum(2 ** fixed_point_count(p) for p in all_permutations(n))
