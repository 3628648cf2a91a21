"""Command-line driver: index-set reports, transforms, approximation
studies, and activity-score runs.

Four subcommands (``indexset``, ``transform``, ``approximate``,
``activity``) cover the library surface.  Every run is deterministic under
a fixed ``--seed``; numbers print with 6 significant digits while file
outputs keep full precision.  Failures exit nonzero with a single
``error: <kind>: <message>`` line on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .mindex import PNorm, build_index_set, cardinality_bounds, write_index_set
from .models import get_model, registry
from .nodes import NODE_FAMILIES, build_grid, make_node_system
from .sensitivity import activity_pipeline
from .transform import (BINARY_MAGIC, OpCounter, evaluate_batch, fnt_forward,
                        fnt_inverse, naive_solve, plan,
                        read_coefficients_binary, read_coefficients_csv,
                        write_coefficients_binary, write_coefficients_csv)
from .tubes import tube_decomposition

__all__ = ["RunConfig", "build_parser", "main"]


class CliError(Exception):
    """Error with a short machine-parsable kind (usage, value, io, runtime)."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit with multi-line usage
        raise CliError("usage", message)


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Validated execution plan for one invocation; unknown config keys
    are rejected before anything runs."""

    command: str
    m: int | None = None
    n: int | None = None
    p: PNorm | None = None
    model: str | None = None
    nodes: str = "chebyshev_lobatto"
    test_points: int = 10_000
    seed: int = 0
    input: str | None = None
    out: str | None = None
    format: str = "csv"
    threads: int = 1
    inverse: bool = False
    naive: bool = False
    dump: str | None = None
    plot: bool = False
    sweep: tuple[int, int] | None = None
    mc: tuple[int, int] | None = None
    k: str = "gap"


_FORMATS = {
    "indexset": ("csv",),
    "transform": ("csv", "binary"),
    "approximate": ("csv",),
    "activity": ("json",),
}

_CONFIG_KEYS = {
    "indexset": {"m", "n", "p", "out", "format"},
    "transform": {"m", "n", "p", "nodes", "out", "format", "threads"},
    "approximate": {"model", "n", "p", "nodes", "test_points", "seed",
                    "out", "format", "sweep", "threads"},
    "activity": {"model", "n", "p", "nodes", "k", "mc", "seed",
                 "out", "format", "threads"},
}


def _parse_p(text) -> PNorm:
    try:
        return PNorm.of(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_pair(text: str, sep: str, flag: str) -> tuple[int, int]:
    parts = str(text).split(sep)
    try:
        a, b = (int(v) for v in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{flag} expects two integers as A{sep}B, got {text!r}") from None
    return a, b


def _parse_sweep(text):
    return _parse_pair(text, ":", "--sweep")


def _parse_mc(text):
    return _parse_pair(text, ",", "--mc")


def _resolve_threads(value) -> int:
    if value is None:
        env = os.environ.get("LPFNT_THREADS", "").strip()
        if env:
            try:
                value = int(env)
            except ValueError:
                raise CliError("value",
                               f"LPFNT_THREADS must be an integer, got {env!r}") from None
        else:
            return os.cpu_count() or 1
    if value < 1:
        raise CliError("usage", f"--threads must be >= 1, got {value}")
    return value


def _apply_config(args: argparse.Namespace) -> None:
    """Fill unset flags from the JSON config; explicit flags win."""
    if args.config is None:
        return
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError("value", f"config {args.config}: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError("value", f"config {args.config}: expected a JSON object")
    allowed = _CONFIG_KEYS[args.command]
    converters = {"m": int, "n": int, "test_points": int, "seed": int,
                  "threads": int, "p": PNorm.of, "sweep": _parse_sweep,
                  "mc": _parse_mc}
    for key, raw in doc.items():
        if key not in allowed:
            raise CliError("value", f"config {args.config}: unknown key {key!r} "
                                    f"for command {args.command!r}")
        if getattr(args, key) is None:
            try:
                value = converters.get(key, str)(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise CliError("value", f"config key {key!r}: {exc}") from None
            setattr(args, key, value)


def _to_config(args: argparse.Namespace) -> RunConfig:
    _apply_config(args)
    names = {f.name for f in fields(RunConfig)}
    values = {k: v for k, v in vars(args).items()
              if k in names and v is not None}
    values.setdefault("format", _FORMATS[args.command][0])
    values["threads"] = _resolve_threads(vars(args).get("threads"))
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) is None:
            raise CliError("usage", f"{cfg.command} requires --{name.replace('_', '-')}")


def _validate(cfg: RunConfig) -> None:
    if cfg.format not in _FORMATS[cfg.command]:
        raise CliError("usage", f"{cfg.command} supports --format "
                                f"{'|'.join(_FORMATS[cfg.command])}, got {cfg.format!r}")
    if cfg.nodes not in NODE_FAMILIES:
        raise CliError("usage", f"--nodes must be one of {', '.join(NODE_FAMILIES)}")
    if cfg.plot and cfg.out is None:
        raise CliError("usage", "--plot derives the figure name from --out; add --out")
    if cfg.model is not None and cfg.model not in registry():
        raise CliError("value", f"unknown model {cfg.model!r}, expected one of "
                                f"{', '.join(sorted(registry()))}")
    if cfg.command == "indexset":
        _require(cfg, "m", "n", "p")
    elif cfg.command == "transform":
        _require(cfg, "out")
        if cfg.naive and cfg.inverse:
            raise CliError("usage", "--naive is a forward-only oracle, drop --inverse")
    elif cfg.command == "approximate":
        _require(cfg, "model")
        if cfg.sweep is None:
            _require(cfg, "n")
        else:
            lo, hi = cfg.sweep
            if not 1 <= lo <= hi:
                raise CliError("usage", f"--sweep needs 1 <= n1 <= n2, got {lo}:{hi}")
            if cfg.p is not None:
                raise CliError("usage", "--sweep runs p in {1, 2, inf}; drop --p")
        if cfg.test_points < 1:
            raise CliError("usage", "--test-points must be >= 1")
    elif cfg.command == "activity":
        _require(cfg, "model", "n")
        if not (cfg.k in ("gap", "all") or cfg.k.startswith("fixed:")):
            raise CliError("usage", f"--k must be gap, all, or fixed:K, got {cfg.k!r}")
        if cfg.k.startswith("fixed:"):
            try:
                int(cfg.k.split(":", 1)[1])
            except ValueError:
                raise CliError("usage", f"--k fixed:K needs an integer K, got {cfg.k!r}") from None
        if cfg.mc is not None and (cfg.mc[0] < 2 or cfg.mc[1] < 1):
            raise CliError("usage", "--mc N,R needs N >= 2 and R >= 1")


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def _figure_path(out: str) -> Path:
    return Path(out).with_suffix(".png")


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _read_value_column(path) -> np.ndarray:
    """One float per row; tolerates a header line and extra leading columns."""
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            text = line.strip()
            if not text:
                continue
            cell = text.split(",")[-1]
            try:
                values.append(float(cell))
            except ValueError:
                if lineno == 0:
                    continue
                raise CliError("value", f"{path}: line {lineno + 1} is not numeric") from None
    if not values:
        raise CliError("value", f"{path}: no numeric rows")
    return np.array(values)


def _write_value_column(path, values: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("value\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")


# ---------------------------------------------------------------------------
# indexset
# ---------------------------------------------------------------------------

def cmd_indexset(cfg: RunConfig) -> int:
    A = build_index_set(cfg.m, cfg.n, cfg.p)
    tubes = tube_decomposition(A)
    bounds = cardinality_bounds(cfg.m, cfg.n, cfg.p, index_set=A) if cfg.n >= 1 else None
    dens = len(A) / float((cfg.n + 1) ** cfg.m)
    kappa = sum(A.dim_cardinalities) / len(A)
    print(f"index set m {A.m}  n {A.n}  p {A.p}")
    print(f"cardinality {len(A)}")
    print(f"density {_fmt(dens)}")
    print(f"lower_bound {_fmt(bounds.lower if bounds else None)}")
    print(f"upper_bound {_fmt(bounds.upper if bounds else None)}")
    print(f"memory_bound {_fmt(bounds.memory_bound if bounds else None)}")
    print(f"carry_count {_fmt(kappa)}")
    print("entropy " + " ".join(str(int(e)) for e in tubes.entropy))
    if cfg.dump == "-":
        print(f"{A.m} {A.n} {A.p}")
        for row in A.indices:
            print(" ".join(str(int(v)) for v in row))
    elif cfg.dump is not None:
        write_index_set(A, cfg.dump)
        print(f"dump {cfg.dump}")
    if cfg.out:
        _write_indexset_report(cfg.out, A, tubes, bounds, dens, kappa)
        print(f"wrote {cfg.out}")
    if cfg.plot:
        path = _figure_path(cfg.out)
        _plot_indexset(path, A, tubes)
        print(f"figure {path}")
    return 0


def _write_indexset_report(path, A, tubes, bounds, dens, kappa) -> None:
    def cell(x):
        return "" if x is None else repr(x)

    with open(path, "w") as fh:
        fh.write(f"m,{A.m}\n")
        fh.write(f"n,{A.n}\n")
        fh.write(f"p,{A.p}\n")
        fh.write(f"cardinality,{len(A)}\n")
        fh.write(f"density,{dens!r}\n")
        fh.write(f"lower_bound,{cell(bounds.lower if bounds else None)}\n")
        fh.write(f"upper_bound,{cell(bounds.upper if bounds else None)}\n")
        fh.write(f"memory_bound,{cell(bounds.memory_bound if bounds else None)}\n")
        fh.write(f"carry_count,{kappa!r}\n")
        fh.write("tube," + ",".join(str(int(t)) for t in tubes.t1) + "\n")
        fh.write("entropy," + ",".join(str(int(e)) for e in tubes.entropy) + "\n")


def _plot_indexset(path, A, tubes) -> None:
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    top = int(tubes.t1.max())
    ax1.hist(tubes.t1, bins=np.arange(0.5, top + 1.5), color="tab:blue")
    ax1.set_xlabel("tube length")
    ax1.set_ylabel("count")
    ax1.set_title(f"tube lengths, m={A.m} n={A.n} p={A.p}")
    dims = np.arange(1, A.m + 1)
    ax2.bar(dims, tubes.entropy, color="tab:orange")
    ax2.set_xticks(dims)
    ax2.set_xlabel("dimension")
    ax2.set_title("entropy vector")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------

def _load_coefficients(cfg: RunConfig):
    with open(cfg.input, "rb") as fh:
        magic = fh.read(len(BINARY_MAGIC))
    if magic == BINARY_MAGIC:
        m, n, p, coeffs = read_coefficients_binary(cfg.input)
        for flag, got in (("m", m), ("n", n)):
            want = getattr(cfg, flag)
            if want is not None and want != got:
                raise CliError("value", f"--{flag} {want} disagrees with the "
                                        f"file header value {got}")
        if cfg.p is not None and float(cfg.p) != float(p):
            raise CliError("value", f"--p {cfg.p} disagrees with the file header value {p}")
        A = build_index_set(m, n, p)
        if coeffs.shape[0] != len(A):
            raise CliError("value", f"{cfg.input}: {coeffs.shape[0]} coefficients "
                                    f"but |A| = {len(A)}")
        return A, coeffs
    if cfg.m is None or cfg.n is None or cfg.p is None:
        raise CliError("usage", "CSV coefficient input needs --m, --n and --p")
    A = build_index_set(cfg.m, cfg.n, cfg.p)
    return A, read_coefficients_csv(cfg.input, A)


def cmd_transform(cfg: RunConfig) -> int:
    if cfg.inverse:
        A, coeffs = _load_coefficients(cfg)
        nodes = make_node_system(A.n, cfg.nodes)
        values = fnt_inverse(coeffs, plan(A), nodes.vandermonde(), threads=cfg.threads)
        _write_value_column(cfg.out, values)
        print(f"wrote {values.shape[0]} samples to {cfg.out}")
        return 0
    if cfg.m is None or cfg.n is None or cfg.p is None:
        raise CliError("usage", "forward transform requires --m, --n and --p")
    A = build_index_set(cfg.m, cfg.n, cfg.p)
    samples = _read_value_column(cfg.input)
    if samples.shape[0] != len(A):
        raise CliError("value", f"{cfg.input}: {samples.shape[0]} samples but |A| = {len(A)}")
    nodes = make_node_system(cfg.n, cfg.nodes)
    if cfg.naive:
        interp = naive_solve(samples, A, nodes.vandermonde())
    else:
        counter = OpCounter()
        interp = fnt_forward(samples, plan(A), nodes.vandermonde(),
                             counter=counter, threads=cfg.threads)
    if cfg.format == "binary":
        write_coefficients_binary(interp, cfg.out)
    else:
        write_coefficients_csv(interp, cfg.out)
    print(f"wrote {len(A)} coefficients to {cfg.out}")
    if not cfg.naive:
        print(f"madds {counter.madds}")
    return 0


# ---------------------------------------------------------------------------
# approximate
# ---------------------------------------------------------------------------

def _model_rmse(model, n, p, family, X, truth, threads) -> float:
    A = build_index_set(model.m, n, p)
    nodes = make_node_system(n, family)
    samples = model.evaluate_reference(build_grid(A, nodes))
    interp = fnt_forward(samples, plan(A), nodes.vandermonde(), threads=threads)
    pred = evaluate_batch(interp, X)
    return math.sqrt(float(np.mean((pred - truth) ** 2)))


def cmd_approximate(cfg: RunConfig) -> int:
    model = get_model(cfg.model)
    rng = np.random.default_rng(cfg.seed)
    X = rng.uniform(-1.0, 1.0, size=(cfg.test_points, model.m))
    truth = model.evaluate_reference(X)
    if cfg.sweep is not None:
        lo, hi = cfg.sweep
        cases = [(n, p) for p in (PNorm.of(1), PNorm.of(2), PNorm.of("inf"))
                 for n in range(lo, hi + 1)]
    else:
        cases = [(cfg.n, cfg.p if cfg.p is not None else PNorm.of(2))]
    rows = []
    for n, p in cases:
        rmse = _model_rmse(model, n, p, cfg.nodes, X, truth, cfg.threads)
        rows.append((n, p, rmse))
        print(f"n {n}  p {p}  rmse {rmse:.6g}")
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write("n,p,rmse\n")
            for n, p, rmse in rows:
                fh.write(f"{n},{p},{rmse!r}\n")
        print(f"wrote {cfg.out}")
    if cfg.plot:
        path = _figure_path(cfg.out)
        _plot_rmse(path, rows, model.name)
        print(f"figure {path}")
    return 0


def _plot_rmse(path, rows, title) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    by_p: dict = {}
    for n, p, rmse in rows:
        by_p.setdefault(str(p), []).append((n, rmse))
    for label, pts in by_p.items():
        pts.sort()
        ax.semilogy([n for n, _ in pts], [r for _, r in pts],
                    marker="o", label=f"p = {label}")
    ax.set_xlabel("degree n")
    ax.set_ylabel("RMSE")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# activity
# ---------------------------------------------------------------------------

def cmd_activity(cfg: RunConfig) -> int:
    model = get_model(cfg.model)
    p = cfg.p if cfg.p is not None else PNorm.of(2)
    report = activity_pipeline(model, cfg.n, p, node_family=cfg.nodes,
                               k_strategy=cfg.k, mc=cfg.mc,
                               seed=cfg.seed, threads=cfg.threads)
    names = model.domain.names
    print(f"model {report.model}  m {report.m}  n {report.n}  p {report.p}  "
          f"coefficients {report.cardinality}")
    print(f"subspace k {report.k}")
    print("eigenvalues " + " ".join(f"{v:.6g}" for v in report.eigenvalues))
    header = f"{'variable':<12}{'theta':>14}"
    if report.mc is not None:
        header += f"{'mc_mean':>14}{'mc_std':>12}"
    print(header)
    for i in range(report.m):
        line = f"{names[i]:<12}{report.theta[i]:>14.6g}"
        if report.mc is not None:
            line += f"{report.mc.mean[i]:>14.6g}{report.mc.std[i]:>12.6g}"
        print(line)
    print("ranking " + " > ".join(names[i] for i in report.ranking))
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(report.to_json() + "\n")
        print(f"wrote {cfg.out}")
    if cfg.plot:
        path = _figure_path(cfg.out)
        _plot_activity(path, report, names)
        print(f"figure {path}")
    return 0


def _plot_activity(path, report, names) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    pos = np.arange(report.m)
    ax.bar(pos, np.maximum(report.theta, 1e-300), color="tab:blue",
           label=f"surrogate (k = {report.k})")
    if report.mc is not None:
        ax.errorbar(pos + 0.12, np.maximum(report.mc.mean, 1e-300),
                    yerr=3.0 * report.mc.std, fmt="x", color="tab:red",
                    label="Monte Carlo (3 std)")
    ax.set_yscale("log")
    ax.set_xticks(pos, names, rotation=30, ha="right")
    ax.set_ylabel("activity score")
    ax.set_title(report.model)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lpfnt",
                     description="Polynomial interpolation in lp-degree spaces "
                                 "and activity-score sensitivity analysis.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, *, threads=True):
        sp.add_argument("--config", help="JSON file with flag defaults; "
                                         "explicit flags win, unknown keys are rejected")
        if threads:
            sp.add_argument("--threads", type=int,
                            help="worker threads (default: LPFNT_THREADS or all cores)")

    sp = sub.add_parser("indexset", help="report an lp-degree index set")
    sp.add_argument("--m", type=int, help="number of dimensions")
    sp.add_argument("--n", type=int, help="degree bound")
    sp.add_argument("--p", type=_parse_p, help="lp-degree parameter (number or inf)")
    sp.add_argument("--out", help="CSV report path")
    sp.add_argument("--format", choices=_FORMATS["indexset"])
    sp.add_argument("--dump", nargs="?", const="-",
                    help="dump the full index list (to stdout, or to PATH)")
    sp.add_argument("--plot", action="store_true",
                    help="render a PNG figure next to --out")
    common(sp, threads=False)

    sp = sub.add_parser("transform", help="run the transform on a sample file")
    sp.add_argument("input", help="samples CSV (forward) or coefficients file (--inverse)")
    sp.add_argument("--m", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=_parse_p)
    sp.add_argument("--nodes", choices=NODE_FAMILIES)
    sp.add_argument("--out", help="output path")
    sp.add_argument("--format", choices=_FORMATS["transform"])
    sp.add_argument("--inverse", action="store_true",
                    help="coefficients to grid samples instead")
    sp.add_argument("--naive", action="store_true",
                    help="use the quadratic-cost reference solve")
    common(sp)

    sp = sub.add_parser("approximate", help="RMSE of a model surrogate")
    sp.add_argument("--model", help="benchmark model name")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=_parse_p)
    sp.add_argument("--nodes", choices=NODE_FAMILIES)
    sp.add_argument("--sweep", type=_parse_sweep, metavar="N1:N2",
                    help="degree sweep over p in {1, 2, inf}")
    sp.add_argument("--test-points", type=int, dest="test_points")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="CSV output path")
    sp.add_argument("--format", choices=_FORMATS["approximate"])
    sp.add_argument("--plot", action="store_true")
    common(sp)

    sp = sub.add_parser("activity", help="activity-score sensitivity pipeline")
    sp.add_argument("--model")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=_parse_p)
    sp.add_argument("--nodes", choices=NODE_FAMILIES)
    sp.add_argument("--k", help="subspace rule: gap, all, or fixed:K")
    sp.add_argument("--mc", type=_parse_mc, metavar="N,R",
                    help="Monte Carlo reference: N samples, R replications")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="JSON report path")
    sp.add_argument("--format", choices=_FORMATS["activity"])
    sp.add_argument("--plot", action="store_true")
    common(sp)

    return parser


_COMMANDS = {
    "indexset": cmd_indexset,
    "transform": cmd_transform,
    "approximate": cmd_approximate,
    "activity": cmd_activity,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _to_config(args)
        return _COMMANDS[cfg.command](cfg)
    except CliError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 2 if exc.kind == "usage" else 1
    except FileNotFoundError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: value: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
