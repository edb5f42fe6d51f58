"""Random-matrix ensembles, seeded experiments and samplers.

Every trial draws from its own Philox substream keyed by
``(master_seed, trial_index)``, so a report depends only on its
configuration and not on how the trials were scheduled across threads.
Normal variates come from Box-Muller on those uniforms.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from noisybs import __version__
from noisybs.config import (
    MOMENT_MAX_N,
    NEGATIVITY_MAX_N,
    SAMPLE_MODEL_MAX_N,
    TVD_MAX_CONFIGS,
    TVD_MAX_N,
    UNITARY_TOL,
)
from noisybs.errors import CapacityError
from noisybs.kernels import as_matrix, chi_moment, derangement_sums_batch, permanent_batch
from noisybs.models import model_cutoff, model_uniform, parse_parameter
from noisybs.probability import (
    DistributionTable,
    derangement_table,
    distribution_from_sums,
    total_variation_distance,
)
from noisybs.symgroup import Permutation, fixed_point_count

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "stream",
    "ginibre",
    "haar_unitary",
    "negativity_experiment",
    "moment_experiment",
    "tvd_experiment",
    "bound_tvd",
    "sample_distinguishable",
    "sample_model",
    "empirical_tvd",
    "default_workers",
]

ENSEMBLES = ("ginibre", "haar")
REPORT_SCHEMA = "noisybs.experiment_report/1"

# Histogram ranges used when the configuration does not declare one.
_DEFAULT_RANGES = {
    "negativity": (-2.0, 8.0),
    "moments": (0.0, 5.0),
    "tvd": (0.0, 0.5),
}

# Trials are processed in blocks of this size; fixed so that results do not
# depend on the worker count.
_TRIAL_BLOCK = 64


# -- random streams -----------------------------------------------------------


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for ``(master_seed, *key)``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed or a Generator is required")
    return stream(seed)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller: standard complex normals with ``E|z|^2 = 1``."""
    u1 = 1.0 - rng.random(shape)  # in (0, 1], keeps log finite
    u2 = rng.random(shape)
    radius = np.sqrt(-np.log(u1))
    return radius * np.exp(2j * np.pi * u2)


def ginibre(rows: int, cols: int, variance: float, seed) -> np.ndarray:
    """i.i.d. complex Gaussian entries; real and imaginary parts each ``variance / 2``."""
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    return math.sqrt(variance) * _complex_normal(_rng(seed), (rows, cols))


def haar_unitary(M: int, seed) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    if M < 1:
        raise ValueError("M must be at least 1")
    z = _complex_normal(_rng(seed), (M, M))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def default_workers() -> int:
    """Thread count from ``NOISYBS_THREADS``, else 1."""
    value = os.environ.get("NOISYBS_THREADS", "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _map_blocks(fn: Callable[[int, int], np.ndarray], trials: int, workers: int | None) -> np.ndarray:
    """Apply ``fn(start, stop)`` to fixed trial blocks and concatenate in order."""
    blocks = [(s, min(s + _TRIAL_BLOCK, trials)) for s in range(0, trials, _TRIAL_BLOCK)]
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(blocks) == 1:
        parts = [fn(s, e) for s, e in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: fn(*b), blocks))
    return np.concatenate(parts, axis=0)


# -- configuration and reports ------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment.  ``n`` doubles as ``N``."""

    master_seed: int
    trials: int
    n: int
    M: int | None = None
    R: int | None = None
    K: int | None = None
    x: object = None
    ensemble: str = "ginibre"
    hist_range: tuple[float, float] | None = None
    hist_bins: int = 50

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"ensemble must be one of {ENSEMBLES}, got {self.ensemble!r}")
        if self.M is not None and self.M < 1:
            raise ValueError("M must be at least 1")
        if self.hist_bins < 1:
            raise ValueError("hist_bins must be at least 1")
        if self.hist_range is not None:
            lo, hi = map(float, self.hist_range)
            if not lo < hi:
                raise ValueError(f"empty histogram range {self.hist_range}")
            object.__setattr__(self, "hist_range", (lo, hi))
        if self.x is not None:
            object.__setattr__(self, "x", parse_parameter(self.x))

    @property
    def N(self) -> int:
        return self.n

    def edges(self, kind: str) -> np.ndarray:
        lo, hi = self.hist_range or _DEFAULT_RANGES[kind]
        return np.linspace(lo, hi, self.hist_bins + 1)

    def as_dict(self) -> dict:
        doc = asdict(self)
        if isinstance(self.x, Fraction):
            doc["x"] = str(self.x)
        if self.hist_range is not None:
            doc["hist_range"] = list(self.hist_range)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if doc.get("hist_range") is not None:
            doc["hist_range"] = tuple(doc["hist_range"])
        return cls(**doc)


def histogram(values: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Counts on fixed edges; outliers go to the end bins so counts sum to len(values)."""
    below = int(np.sum(values < edges[0]))
    above = int(np.sum(values > edges[-1]))
    clipped = np.clip(values, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    return counts.astype(np.int64), below, above


def _summary(values: np.ndarray) -> dict:
    t = len(values)
    sd = float(np.std(values, ddof=1)) if t > 1 else 0.0
    return {
        "trials": t,
        "mean": float(np.mean(values)),
        "std": sd,
        "se": sd / math.sqrt(t),
        "min": float(np.min(values)),
        "max": float(np.max(values)),
    }


@dataclass
class ExperimentReport:
    kind: str
    config: ExperimentConfig
    values: np.ndarray
    edges: np.ndarray
    counts: np.ndarray
    summary: dict
    wall_time: float = 0.0
    version: str = __version__
    extra: dict = field(default_factory=dict)

    def canonical(self) -> dict:
        """Everything except the wall time; identical for identical configs."""
        return {
            "schema": REPORT_SCHEMA,
            "kind": self.kind,
            "version": self.version,
            "config": self.config.as_dict(),
            "summary": self.summary,
            "histogram": {"edges": [float(e) for e in self.edges], "counts": [int(c) for c in self.counts]},
            "values": [float(v) for v in self.values],
            "extra": self.extra,
        }

    def to_dict(self) -> dict:
        return {**self.canonical(), "wall_time": self.wall_time}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        doc = json.loads(text)
        if doc.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unexpected schema {doc.get('schema')!r}")
        return cls(
            kind=doc["kind"],
            config=ExperimentConfig.from_dict(doc["config"]),
            values=np.asarray(doc["values"], dtype=float),
            edges=np.asarray(doc["histogram"]["edges"], dtype=float),
            counts=np.asarray(doc["histogram"]["counts"], dtype=np.int64),
            summary=doc["summary"],
            wall_time=doc.get("wall_time", 0.0),
            version=doc.get("version", __version__),
            extra=doc.get("extra", {}),
        )

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# kind: {self.kind}\n# version: {self.version}\n")
        buf.write(f"# config: {json.dumps(self.config.as_dict(), sort_keys=True)}\n")
        buf.write(f"# wall_time: {self.wall_time:.17g}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            writer.writerow([f"{lo:.17g}", f"{hi:.17g}", int(c)])
        return buf.getvalue()

    def to_svg(self, width: int = 640, height: int = 320) -> str:
        """Bar chart of the histogram as plain SVG rectangles."""
        pad = 30
        bins = len(self.counts)
        top = max(1, int(np.max(self.counts)))
        bar_w = (width - 2 * pad) / bins
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<text x="{pad}" y="18" font-size="12">{escape(self.kind)}: '
            f"{self.summary.get('trials', len(self.values))} trials</text>",
        ]
        for i, c in enumerate(self.counts):
            h = (height - 2 * pad) * int(c) / top
            x = pad + i * bar_w
            y = height - pad - h
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{h:.2f}" fill="steelblue"/>'
            )
        base = height - pad
        parts.append(f'<line x1="{pad}" y1="{base}" x2="{width - pad}" y2="{base}" stroke="black"/>')
        parts.append(f'<text x="{pad}" y="{height - 10}" font-size="10">{self.edges[0]:.3g}</text>')
        parts.append(
            f'<text x="{width - pad}" y="{height - 10}" font-size="10" text-anchor="end">{self.edges[-1]:.3g}</text>'
        )
        if self.edges[0] < 0 < self.edges[-1]:
            zx = pad + (width - 2 * pad) * (0 - self.edges[0]) / (self.edges[-1] - self.edges[0])
            parts.append(f'<line x1="{zx:.2f}" y1="{pad}" x2="{zx:.2f}" y2="{base}" stroke="red"/>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def _report(kind, cfg, values, summary, start, extra=None) -> ExperimentReport:
    edges = cfg.edges(kind)
    counts, below, above = histogram(values, edges)
    summary = {**summary, "clipped_below": below, "clipped_above": above}
    return ExperimentReport(kind, cfg, values, edges, counts, summary, time.perf_counter() - start, extra=extra or {})


def _sample_matrix(cfg: ExperimentConfig, trial: int, rows: int, cols: int, M: int) -> np.ndarray:
    rng = stream(cfg.master_seed, trial)
    if cfg.ensemble == "haar":
        return haar_unitary(M, rng)[:rows, :cols]
    return ginibre(rows, cols, 1.0 / M, rng)


# -- experiments --------------------------------------------------------------


def haar_mean_probability(n: int, M: int) -> float:
    """``E|per U[n x n]|^2`` over the Haar measure: ``n! (M-1)! / (M+n-1)!``."""
    return math.exp(math.lgamma(n + 1) + math.lgamma(M) - math.lgamma(M + n))


def negativity_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """Cut-off quantum factor ``sum_{s<=R} U(D^(n)_s)`` over random n x n blocks.

    Values are divided by the ensemble mean of ``|per|**2`` (``n!/M**n``
    for Ginibre with variance ``1/M``, the exact Haar moment otherwise).
    ``M`` defaults to ``n**2``.
    """
    start = time.perf_counter()
    n, R = cfg.n, cfg.R
    if R is None or R < 0:
        raise ValueError("negativity_experiment needs R >= 0")
    if n < 1:
        raise ValueError("negativity_experiment needs n >= 1")
    if n > NEGATIVITY_MAX_N:
        raise CapacityError(f"negativity_experiment capped at n={NEGATIVITY_MAX_N}, got {n}")
    M = cfg.M or n * n
    if cfg.ensemble == "haar" and M < n:
        raise ValueError(f"Haar blocks need M >= n, got M={M}")
    scale = haar_mean_probability(n, M) if cfg.ensemble == "haar" else math.factorial(n) / M**n
    keep = min(R, n) + 1

    def block(s, e):
        mats = np.stack([_sample_matrix(cfg, t, n, n, M) for t in range(s, e)])
        return derangement_sums_batch(mats)[:, :keep].sum(axis=1) / scale

    values = _map_blocks(block, cfg.trials, workers)
    summary = _summary(values)
    summary["fraction_negative"] = float(np.mean(values < 0))
    summary["normalization"] = scale
    summary["M"] = M
    return _report("negativity", cfg, values, summary, start)


def _ratio_estimate(est: float, se: float, target: float) -> dict:
    z = (est - target) / se if se > 0 else (0.0 if est == target else math.inf)
    return {"estimate": est, "se": se, "target": target, "z": z}


def _mean_estimate(v: np.ndarray, target: float, scale: float = 1.0) -> dict:
    v = np.asarray(v, dtype=float) * scale
    return _ratio_estimate(float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(len(v))), target)


def _interference_batch(a: np.ndarray, sigma: Permutation, taus: np.ndarray) -> np.ndarray:
    """``T(sigma)`` for a stack of square blocks, shape (B,)."""
    n = a.shape[1]
    sig = np.asarray(sigma.mapping, dtype=np.intp)
    cols = np.arange(n)
    left = np.conj(a[:, sig[taus], cols])
    right = a[:, taus, cols]
    return np.prod(left * right, axis=2).sum(axis=1)


def moment_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """First and second moments of ``p = |per A|**2`` and of ``T(sigma)``.

    ``A`` is N x N Ginibre with variance ``1/M``.  Checks ``<T(I)> = N!/M**N``,
    ``<p**2>/<p>**2 = N+1``, ``<T(sigma)> = 0`` for a transposition and a
    3-cycle, and ``<|T(sigma)|**2> = N! chi(C1(sigma)) / M**(2N)``.
    The per-trial values are ``T(I) M**N / N!``.
    """
    start = time.perf_counter()
    N = cfg.n
    M = cfg.M
    if M is None:
        raise ValueError("moment_experiment needs M")
    if not 1 <= N <= MOMENT_MAX_N:
        raise CapacityError(f"moment_experiment needs 1 <= N <= {MOMENT_MAX_N}, got {N}")
    if cfg.ensemble != "ginibre":
        raise ValueError("moment_experiment uses the Ginibre ensemble")
    if cfg.trials < 2:
        raise ValueError("moment_experiment needs at least 2 trials")
    taus = np.array(list(itertools.permutations(range(N))), dtype=np.intp)
    sigmas = {"identity": Permutation.identity(N)}
    if N >= 2:
        sigmas["transposition"] = Permutation.from_cycles(N, (0, 1))
    if N >= 3:
        sigmas["three_cycle"] = Permutation.from_cycles(N, (0, 1, 2))
    names = list(sigmas)

    def block(s, e):
        mats = np.stack([_sample_matrix(cfg, t, N, N, M) for t in range(s, e)])
        p = np.abs(permanent_batch(mats)) ** 2
        cols = [p.astype(complex)] + [_interference_batch(mats, sigmas[k], taus) for k in names]
        return np.stack(cols, axis=1)

    data = _map_blocks(block, cfg.trials, workers)
    p = data[:, 0].real
    t_vals = {k: data[:, 1 + i] for i, k in enumerate(names)}
    unit = math.factorial(N) / M**N
    trials = len(p)

    m1, m2 = float(np.mean(p)), float(np.mean(p**2))
    cov = np.cov(np.stack([p, p**2]), ddof=1) / trials
    ratio = m2 / m1**2
    grad = np.array([-2 * m2 / m1**3, 1 / m1**2])
    ratio_se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))

    checks = {
        "T_identity_ratio": _mean_estimate(t_vals["identity"].real, 1.0, 1 / unit),
        "p_mean_ratio": _mean_estimate(p, 1.0, 1 / unit),
        "p2_over_p_squared": _ratio_estimate(ratio, ratio_se, N + 1.0),
    }
    for k in names[1:]:
        checks[f"T_{k}_real"] = _mean_estimate(t_vals[k].real, 0.0, 1 / unit)
        checks[f"T_{k}_imag"] = _mean_estimate(t_vals[k].imag, 0.0, 1 / unit)
    for k in names:
        c1 = fixed_point_count(sigmas[k])
        target = math.factorial(N) * chi_moment(c1) / M ** (2 * N)
        checks[f"T_{k}_abs2_ratio"] = _mean_estimate(np.abs(t_vals[k]) ** 2, 1.0, 1 / target)
    values = t_vals["identity"].real / unit
    summary = _summary(values)
    summary["checks"] = checks
    return _report("moments", cfg, values, summary, start)


def bound_tvd(x, R: int) -> float:
    """``0.5 sqrt(1 + e/(R+2)!) x**(R+1) / sqrt(1 - x**2)``."""
    x = float(x)
    if not 0 <= x < 1:
        raise ValueError(f"bound_tvd needs 0 <= x < 1, got {x}")
    if R < 0:
        raise ValueError("R must be non-negative")
    return 0.5 * math.sqrt(1 + math.e / math.factorial(R + 2)) * x ** (R + 1) / math.sqrt(1 - x * x)


def tvd_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """Exact TVD between the uniform and cut-off no-collision tables per trial.

    Each trial draws an M x M unitary (Haar by default from the config),
    tabulates every no-collision output once and applies both models.
    The raw TVD is the per-trial value; the TVD of the tables renormalized
    to unit mass is reported alongside.
    """
    start = time.perf_counter()
    N, M, R, x = cfg.n, cfg.M, cfg.R, cfg.x
    if M is None or R is None or x is None:
        raise ValueError("tvd_experiment needs M, R and x")
    if not 1 <= N <= TVD_MAX_N:
        raise CapacityError(f"tvd_experiment needs 1 <= N <= {TVD_MAX_N}, got {N}")
    if M < N:
        raise ValueError(f"need M >= N, got M={M}")
    if math.comb(M, N) > TVD_MAX_CONFIGS:
        raise CapacityError(f"C({M},{N}) = {math.comb(M, N)} exceeds {TVD_MAX_CONFIGS}")
    if not 0 <= R <= N:
        raise ValueError(f"need 0 <= R <= N, got R={R}")
    full, cut = model_uniform(N, x), model_cutoff(N, R, x)
    inputs = list(range(N))

    def block(s, e):
        out = []
        for t in range(s, e):
            rng = stream(cfg.master_seed, t)
            u = haar_unitary(M, rng) if cfg.ensemble == "haar" else ginibre(M, M, 1.0 / M, rng)
            configs, sums = derangement_table(u, inputs)
            p = distribution_from_sums(configs, sums, full)
            q = distribution_from_sums(configs, sums, cut)
            out.append(
                [
                    total_variation_distance(p, q),
                    total_variation_distance(p.renormalized(), q.renormalized()),
                    q.negative_mass(),
                    p.total(),
                ]
            )
        return np.asarray(out)

    data = _map_blocks(block, cfg.trials, workers)
    values = data[:, 0]
    summary = _summary(values)
    bound = bound_tvd(x, R)
    renorm = data[:, 1]
    summary.update(
        {
            "bound": bound,
            "mean_over_bound": summary["mean"] / bound if bound > 0 else (0.0 if summary["mean"] == 0 else math.inf),
            "renormalized_mean": float(np.mean(renorm)),
            "renormalized_se": float(np.std(renorm, ddof=1) / math.sqrt(len(renorm))) if len(renorm) > 1 else 0.0,
            "mean_negative_mass": float(np.mean(data[:, 2])),
            "mean_no_collision_mass": float(np.mean(data[:, 3])),
        }
    )
    return _report("tvd", cfg, values, summary, start, extra={"renormalized_values": [float(v) for v in renorm]})


# -- samplers -----------------------------------------------------------------


def _input_rows(u, inputs: Sequence[int]) -> np.ndarray:
    u = as_matrix(u)
    rows = u[np.asarray(list(inputs), dtype=np.intp)]
    norms = np.sum(np.abs(rows) ** 2, axis=1)
    bad = np.abs(norms - 1.0) > UNITARY_TOL
    if np.any(bad):
        raise ValueError(f"rows {np.nonzero(bad)[0].tolist()} of U are not normalized (non-unitary U)")
    return rows


def _categorical(cdf: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf, uniforms * cdf[-1], side="right")
    return np.minimum(idx, len(cdf) - 1)


def sample_distinguishable(u, inputs: Sequence[int], shots: int, seed) -> np.ndarray:
    """Send the particles one at a time; shape (shots, N), each row sorted."""
    rows = _input_rows(u, inputs)
    rng = _rng(seed)
    cdfs = np.cumsum(np.abs(rows) ** 2, axis=1)
    uni = rng.random((shots, len(rows)))
    out = np.empty((shots, len(rows)), dtype=np.int64)
    for k, cdf in enumerate(cdfs):
        out[:, k] = _categorical(cdf, uni[:, k])
    return np.sort(out, axis=1)


def _block_table(rows: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """All size-n output multisets with their exact boson sampling probabilities."""
    m = rows.shape[1]
    multisets = np.array(list(itertools.combinations_with_replacement(range(m), n)), dtype=np.intp)
    blocks = np.transpose(rows[:, multisets], (1, 0, 2))
    probs = np.abs(permanent_batch(blocks)) ** 2
    mult = np.ones(len(multisets))
    for ms_idx, ms in enumerate(multisets):
        _, reps = np.unique(ms, return_counts=True)
        mult[ms_idx] = float(np.prod([math.factorial(r) for r in reps]))
    return multisets, probs / mult


def _binomial_cdf(N: int, x) -> np.ndarray:
    x = parse_parameter(x)
    if isinstance(x, Fraction):
        pmf = [math.comb(N, k) * x**k * (1 - x) ** (N - k) for k in range(N + 1)]
        partial = list(itertools.accumulate(pmf))
        return np.array([float(v) for v in partial])
    pmf = [math.comb(N, k) * x**k * (1 - x) ** (N - k) for k in range(N + 1)]
    return np.cumsum(pmf)


def sample_model(u, N: int, x, shots: int, seed, inputs: Sequence[int] | None = None) -> np.ndarray:
    """Sampler for the uniform model through its binomial mixture.

    Per shot: ``n ~ Binomial(N, x)``, a uniformly random n-subset of the
    inputs behaves as indistinguishable bosons and is drawn from its exact
    ``|per|**2 / prod(m!)`` table over output multisets, the remaining
    particles are drawn classically.  Returns sorted rows of shape (shots, N).
    """
    inputs = list(range(N)) if inputs is None else list(inputs)
    if len(inputs) != N:
        raise ValueError(f"N={N} but {len(inputs)} inputs were given")
    if N > SAMPLE_MODEL_MAX_N:
        raise CapacityError(f"sample_model capped at N={SAMPLE_MODEL_MAX_N}, got {N}")
    x_val = parse_parameter(x)
    if not 0 <= x_val <= 1:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    rows = _input_rows(u, inputs)
    rng = _rng(seed)
    cdf_n = _binomial_cdf(N, x_val)
    u_n = rng.random(shots)
    keys = rng.random((shots, N))
    u_block = rng.random(shots)
    u_class = rng.random((shots, N))

    sizes = _categorical(cdf_n, u_n)
    order = np.argsort(keys, axis=1, kind="stable")
    chosen = np.zeros((shots, N), dtype=bool)
    for s in range(shots):
        chosen[s, order[s, : sizes[s]]] = True
    masks = chosen @ (1 << np.arange(N))
    class_cdfs = np.cumsum(np.abs(rows) ** 2, axis=1)

    out = np.empty((shots, N), dtype=np.int64)
    for mask in np.unique(masks):
        sel = np.nonzero(masks == mask)[0]
        members = [k for k in range(N) if mask >> k & 1]
        others = [k for k in range(N) if not mask >> k & 1]
        col = 0
        if members:
            multisets, probs = _block_table(rows[members], len(members))
            picks = _categorical(np.cumsum(probs), u_block[sel])
            out[np.ix_(sel, range(len(members)))] = multisets[picks]
            col = len(members)
        for k in others:
            out[sel, col] = _categorical(class_cdfs[k], u_class[sel, k])
            col += 1
    return np.sort(out, axis=1)


def empirical_tvd(samples: np.ndarray, table: DistributionTable) -> float:
    """TVD between sample frequencies and a no-collision table.

    All collision outcomes are pooled into one extra cell whose exact mass
    is ``1 - table.total()``.
    """
    samples = np.asarray(samples)
    shots = len(samples)
    index = {tuple(c): i for i, c in enumerate(table.configs)}
    counts = np.zeros(len(table.configs))
    collisions = 0
    for row in map(tuple, samples.tolist()):
        i = index.get(row)
        if i is None:
            collisions += 1
        else:
            counts[i] += 1
    freq = counts / shots
    probs = np.asarray(table.probs)
    pooled = abs(collisions / shots - (1.0 - float(np.sum(probs))))
    return 0.5 * (float(np.sum(np.abs(freq - probs))) + pooled)
