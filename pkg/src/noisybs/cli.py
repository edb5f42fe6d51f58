"""Command-line front end.

Every output carries the parsed configuration, the master seed, the
library version and the wall time, so a result can be regenerated from
its own header.  Exit codes: 0 success, 2 invalid input, 3 capacity cap
exceeded, 4 numerical invariant violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import secrets
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from noisybs import __version__
from noisybs.characters import decompose_trace_Ln, expand_class_function, to_class_function
from noisybs.errors import CapacityError, ExactArithmeticError, InvariantError
from noisybs.kernels import unitarity_error
from noisybs.models import (
    binomial_transform,
    gram_min_eigenvalue,
    model_cutoff,
    model_rearranged,
    model_uniform,
    parse_parameter,
    positivity_threshold,
)
from noisybs.montecarlo import (
    ExperimentConfig,
    ginibre,
    haar_unitary,
    moment_experiment,
    negativity_experiment,
    sample_distinguishable,
    sample_model,
    stream,
    tvd_experiment,
)
from noisybs.probability import (
    OutputConfiguration,
    convex_sum_probability,
    enumerate_distribution,
    probability_bruteforce,
    probability_expansion,
    probability_from_model,
    rearranged_probability,
)

log = logging.getLogger("noisybs")

EXIT_OK, EXIT_INVALID, EXIT_CAPACITY, EXIT_INVARIANT = 0, 2, 3, 4
CLI_SCHEMA = "noisybs.cli/1"

# Substream keys for matrices and samples drawn outside the trial loop.
_MATRIX_KEY = 1 << 32
_SAMPLE_KEY = (1 << 32) + 1

ROUTE_TOL = 1e-9


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _fraction(text: str):
    try:
        return parse_parameter(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not p/q or a decimal") from exc


def _port_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace("-", ",").split(",") if t != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not a list of ports") from exc


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not 'lo,hi'") from exc
    return lo, hi


def _encode(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {str(k): _encode(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(w) for w in v]
    if isinstance(v, np.ndarray):
        return [_encode(w) for w in v.tolist()]
    return v


def _g(v: float) -> str:
    return f"{v:.17g}"


# -- argument parsing ---------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, formats=("json",)) -> None:
    p.add_argument("--seed", type=int, help="master seed; drawn from entropy and printed when omitted")
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--output", "-o", type=Path, help="output file (default: standard output)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_unitary(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--unitary", choices=["identity"], help="use the M x M identity")
    src.add_argument("--unitary-file", type=Path, help="JSON nested arrays of [re, im] pairs")
    src.add_argument("--ensemble", choices=["haar", "ginibre"], help="draw the matrix at random")
    p.add_argument("--M", type=int, help="number of modes (default N)")
    p.add_argument("--inputs", type=_port_list, help="input ports, e.g. 0,1,2 (default 0..N-1)")


def _add_experiment(p: argparse.ArgumentParser, ensemble: str) -> None:
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--ensemble", choices=["haar", "ginibre"], default=ensemble)
    p.add_argument("--bins", type=int, default=50, help="histogram bin count")
    p.add_argument("--range", type=_range, dest="hist_range", help="histogram range 'lo,hi'")
    p.add_argument("--workers", type=int, help="threads (default from NOISYBS_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="noisybs", description="Partially distinguishable boson sampling toolkit.")
    parser.add_argument("--version", action="version", version=f"noisybs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("probability", help="output probability of one configuration")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", type=_fraction, required=True)
    p.add_argument("--R", type=int, help="cut-off (default: no cut-off)")
    p.add_argument("--outputs", type=_port_list, help="output ports (default 0..N-1)")
    p.add_argument(
        "--route",
        choices=["model", "bruteforce", "expansion", "convex", "rearranged"],
        default="model",
    )
    p.add_argument("--K", type=int, help="block size for the rearranged route")
    _add_unitary(p)
    _add_common(p, ("json", "csv"))

    p = sub.add_parser("expansion-check", help="compare every probability route")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", type=_fraction, required=True)
    p.add_argument("--R", type=int, help="cut-off (default N)")
    p.add_argument("--outputs", type=_port_list)
    _add_unitary(p)
    _add_common(p)

    p = sub.add_parser("negativity", help="cut-off quantum factor histogram")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--M", type=int, help="modes (default n**2)")
    _add_experiment(p, "ginibre")
    _add_common(p, ("json", "csv", "svg"))

    p = sub.add_parser("moments", help="Ginibre moment identities")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    _add_experiment(p, "ginibre")
    _add_common(p, ("json", "csv", "svg"))

    p = sub.add_parser("tvd", help="TVD between the uniform and cut-off models")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--x", type=_fraction, required=True)
    p.add_argument("--R", type=int, required=True)
    _add_experiment(p, "haar")
    _add_common(p, ("json", "csv", "svg"))

    p = sub.add_parser("positivity", help="binomial-transform certificate of a model")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--model", choices=["uniform", "cutoff", "rearranged"], default="uniform")
    p.add_argument("--x", type=_fraction, required=True)
    p.add_argument("--R", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--gram", action="store_true", help="also compute the Gram minimum eigenvalue")
    _add_common(p)

    p = sub.add_parser("threshold", help="positivity threshold of the rearranged model")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--bits", type=int, default=40)
    _add_common(p)

    p = sub.add_parser("characters", help="irreducible-character weights of the uniform model")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", type=_fraction, help="distinguishability parameter")
    p.add_argument("--trace-n", type=int, help="decompose the trace of the n-particle stabilizer instead")
    _add_common(p)

    p = sub.add_parser("sample", help="draw output samples")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", type=_fraction, default=Fraction(1))
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--mode", choices=["model", "distinguishable"], default="model")
    _add_unitary(p)
    _add_common(p, ("json", "csv"))

    p = sub.add_parser("table", help="full no-collision probability table")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", type=_fraction, required=True)
    p.add_argument("--R", type=int, help="cut-off (default: no cut-off)")
    _add_unitary(p)
    _add_common(p, ("json", "csv"))
    return parser


# -- helpers ------------------------------------------------------------------


def _load_unitary_file(path: Path) -> np.ndarray:
    data = json.loads(path.read_text())
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: expected nested arrays of [re, im] pairs") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"{path}: expected shape (rows, cols, 2), got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _matrix(args, N: int) -> tuple[np.ndarray, dict]:
    M = args.M or N
    if args.unitary_file is not None:
        u = _load_unitary_file(args.unitary_file)
        return u, {"source": str(args.unitary_file), "unitarity_error": unitarity_error(u) if u.shape[0] == u.shape[1] else None}
    if args.ensemble == "haar":
        return haar_unitary(M, stream(args.seed, _MATRIX_KEY)), {"source": "haar", "M": M}
    if args.ensemble == "ginibre":
        return ginibre(M, M, 1.0 / M, stream(args.seed, _MATRIX_KEY)), {"source": "ginibre", "M": M}
    return np.eye(M, dtype=complex), {"source": "identity", "M": M}


def _inputs(args, N: int) -> list[int]:
    inputs = args.inputs if args.inputs is not None else list(range(N))
    if len(inputs) != N:
        raise ValueError(f"--inputs lists {len(inputs)} ports, N={N}")
    return inputs


def _outputs(args, N: int) -> tuple[int, ...]:
    ports = args.outputs if args.outputs is not None else list(range(N))
    return OutputConfiguration(tuple(ports)).ports


def _model(N: int, x, R):
    return model_uniform(N, x) if R is None or R >= N else model_cutoff(N, R, x)


def _config_echo(args) -> dict:
    skip = {"verbose", "output", "format", "workers"}
    return {k: _encode(str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}


def _envelope(args, result: dict, wall: float) -> dict:
    return {
        "schema": CLI_SCHEMA,
        "command": args.command,
        "version": __version__,
        "seed": args.seed,
        "config": _config_echo(args),
        "wall_time": wall,
        "result": _encode(result),
    }


def _header_lines(doc: dict) -> str:
    keys = ("schema", "command", "version", "seed", "wall_time")
    lines = [f"# {k}: {doc[k]}" for k in keys]
    lines.append(f"# config: {json.dumps(doc['config'], sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _emit(args, text: str, path: Path | None = None) -> None:
    path = path or args.output
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _summary_path(args) -> Path | None:
    return None if args.output is None else args.output.with_suffix(".summary.json")


# -- commands -----------------------------------------------------------------


def _cmd_probability(args) -> dict:
    N = args.N
    u, source = _matrix(args, N)
    inputs, out = _inputs(args, N), _outputs(args, N)
    if len(out) != N:
        raise ValueError(f"--outputs lists {len(out)} ports, N={N}")
    R = args.R
    route = args.route
    if route == "model":
        value = probability_from_model(u, _model(N, args.x, R), inputs, out)
    elif route == "bruteforce":
        value = probability_bruteforce(u, _model(N, args.x, R), inputs, out)
    elif route == "expansion":
        value = probability_expansion(u, N, N if R is None else R, args.x, inputs, out)
    elif route == "convex":
        value = convex_sum_probability(u, N, args.x, inputs, out, cutoff=R)
    else:
        value = rearranged_probability(u, N, N if args.K is None else args.K, N if R is None else R, args.x, inputs, out)
    return {"probability": value, "route": route, "outputs": list(out), "inputs": inputs, "matrix": source}


def _cmd_expansion_check(args) -> dict:
    N = args.N
    R = N if args.R is None else args.R
    u, source = _matrix(args, N)
    inputs, out = _inputs(args, N), _outputs(args, N)
    model = _model(N, args.x, R)
    routes = {
        "model": probability_from_model(u, model, inputs, out),
        "expansion": probability_expansion(u, N, R, args.x, inputs, out),
        "convex": convex_sum_probability(u, N, args.x, inputs, out, cutoff=R),
        "rearranged": rearranged_probability(u, N, N, R, args.x, inputs, out),
    }
    if N <= 7:
        routes["bruteforce"] = probability_bruteforce(u, model, inputs, out)
    ref = routes.get("bruteforce", routes["model"])
    scale = max(abs(ref), 1e-300)
    spread = max(abs(v - ref) for v in routes.values()) / scale
    result = {"routes": routes, "max_relative_difference": spread, "agree": spread <= ROUTE_TOL, "matrix": source}
    if spread > ROUTE_TOL:
        raise InvariantError(f"probability routes disagree by {spread:.3e} relative: {json.dumps(routes)}")
    return result


def _experiment_config(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        master_seed=args.seed,
        trials=args.trials,
        ensemble=args.ensemble,
        hist_range=args.hist_range,
        hist_bins=args.bins,
        **extra,
    )


def _emit_report(args, report, wall: float) -> None:
    doc = _envelope(args, report.to_dict(), wall)
    if args.format == "json":
        _emit(args, json.dumps(doc, indent=1) + "\n")
        return
    summary = json.dumps({k: v for k, v in doc.items() if k != "result"} | {"summary": _encode(report.summary)}, indent=1)
    body = report.histogram_csv() if args.format == "csv" else report.to_svg()
    if args.format == "csv":
        body = _header_lines(doc) + body
    else:
        body = body.replace("<svg ", "<!-- " + _header_lines(doc).replace("--", "- -") + "-->\n<svg ", 1)
    _emit(args, body)
    path = _summary_path(args)
    if path is None:
        sys.stderr.write(summary + "\n")
    else:
        path.write_text(summary + "\n")


def _cmd_positivity(args) -> dict:
    N, x = args.N, args.x
    if args.model == "uniform":
        model = model_uniform(N, x)
    elif args.model == "cutoff":
        if args.R is None:
            raise ValueError("--model cutoff needs --R")
        model = model_cutoff(N, args.R, x)
    else:
        if args.R is None or args.K is None:
            raise ValueError("--model rearranged needs --K and --R")
        model = model_rearranged(N, args.K, args.R, x)
    cert = binomial_transform(model)
    result = {
        "model": model.label,
        "a": list(model.a),
        "b": list(cert.b),
        "sufficient_pd": cert.sufficient_pd,
        "min_b": cert.min_b,
        "exact": cert.exact,
    }
    if args.gram:
        result["gram_min_eigenvalue"] = gram_min_eigenvalue(model)
    return result


def _cmd_threshold(args) -> dict:
    res = positivity_threshold(args.N, args.K, args.R, bits=args.bits)
    return res.as_dict() | {"reference_1_over_N_minus_K": str(Fraction(1, args.N - args.K)) if args.N > args.K else None}


def _cmd_characters(args) -> dict:
    N = args.N
    if args.trace_n is not None:
        mult = decompose_trace_Ln(N, args.trace_n)
        return {
            "N": N,
            "n": args.trace_n,
            "multiplicities": {str(k): v for k, v in mult.items()},
            "integral": all(v.denominator == 1 for v in mult.values()),
        }
    if args.x is None:
        raise ValueError("characters needs --x or --trace-n")
    expansion = expand_class_function(to_class_function(model_uniform(N, args.x)), x=args.x)
    q = expansion.as_dict()
    return {"N": N, "x": args.x, "exact": expansion.exact, "q": q, "sum_q": sum(q.values())}


def _cmd_sample(args) -> tuple[dict, np.ndarray]:
    N = args.N
    u, source = _matrix(args, N)
    inputs = _inputs(args, N)
    rng = stream(args.seed, _SAMPLE_KEY)
    if args.mode == "distinguishable":
        samples = sample_distinguishable(u, inputs, args.shots, rng)
    else:
        samples = sample_model(u, N, args.x, args.shots, rng, inputs=inputs)
    return {"mode": args.mode, "shots": args.shots, "matrix": source, "samples": samples.tolist()}, samples


def _cmd_table(args):
    N = args.N
    u, source = _matrix(args, N)
    inputs = _inputs(args, N)
    table = enumerate_distribution(u, _model(N, args.x, args.R), inputs, meta={"seed": args.seed, "matrix": source["source"]})
    return table


def _needs_seed(args) -> bool:
    if args.command in ("negativity", "moments", "tvd", "sample"):
        return True
    return getattr(args, "ensemble", None) in ("haar", "ginibre") and args.command in ("probability", "expansion-check", "table")


def _run(args) -> None:
    if _needs_seed(args) and args.seed is None:
        args.seed = secrets.randbits(63)
        sys.stderr.write(f"seed: {args.seed}\n")
    start = time.perf_counter()
    cmd = args.command
    if cmd in ("negativity", "moments", "tvd"):
        if cmd == "negativity":
            report = negativity_experiment(_experiment_config(args, n=args.n, R=args.R, M=args.M), args.workers)
        elif cmd == "moments":
            report = moment_experiment(_experiment_config(args, n=args.N, M=args.M), args.workers)
        else:
            report = tvd_experiment(_experiment_config(args, n=args.N, M=args.M, R=args.R, x=args.x), args.workers)
        _emit_report(args, report, time.perf_counter() - start)
        return
    if cmd == "table":
        table = _cmd_table(args)
        wall = time.perf_counter() - start
        table.meta["wall_time"] = wall
        table.meta["config"] = json.dumps(_config_echo(args), sort_keys=True)
        _emit(args, table.to_csv() if args.format == "csv" else table.to_json() + "\n")
        return
    handlers = {
        "probability": _cmd_probability,
        "expansion-check": _cmd_expansion_check,
        "positivity": _cmd_positivity,
        "threshold": _cmd_threshold,
        "characters": _cmd_characters,
    }
    if cmd == "sample":
        result, samples = _cmd_sample(args)
    else:
        result, samples = handlers[cmd](args), None
    doc = _envelope(args, result, time.perf_counter() - start)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if samples is not None:
            writer.writerow([f"port_{k}" for k in range(samples.shape[1])])
            writer.writerows(samples.tolist())
        else:
            writer.writerow(["outputs", "probability"])
            writer.writerow(["-".join(map(str, result["outputs"])), _g(result["probability"])])
        _emit(args, _header_lines(doc) + buf.getvalue())
    else:
        _emit(args, json.dumps(doc, indent=1) + "\n")


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INVALID
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except CapacityError as exc:
        sys.stderr.write(f"capacity exceeded: {exc}\n")
        return EXIT_CAPACITY
    except InvariantError as exc:
        sys.stderr.write(f"invariant violated: {exc}\n")
        return EXIT_INVARIANT
    except (ValueError, ExactArithmeticError, TypeError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
