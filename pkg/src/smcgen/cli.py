"""Command-line experiment runner.

Subcommands: simulate, genealogy, validate, kingman-table, compare-timescales.
Settings come from an optional flat key=value config file; flags override it.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import AncestryMatrix, MalformedInputError, SizeError, fmt_float, make_rng
from .diagnostics import (chi_square_block_counts, expected_pair_merger_rate, ks_exp1)
from .genealogy import (extract_genealogy, pair_coalescence_time, rescaled_block_counts,
                        sample_terminal)
from .experiments import replicate_genealogy
from .kingman import block_count_marginal
from .models import ModelParameterError, parse_model
from .resampling import Scheme
from .smc import DegenerateWeightsError, ImmortalPath, export_trace, run_csmc, run_smc
from .validation import SUITES

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "neutral"
    scheme: str = "multinomial"
    N: int = 100
    T: int = 100
    n: int = 2
    reps: int = 1
    seed: int = 0
    grid: tuple = (0.5, 1.0, 2.0)
    alpha: float = 0.001
    csmc: bool = False
    out: str = "out"
    workers: int = 0    # 0 = all available cores

    # fields that do not change any output value
    _RUNTIME = ("out", "workers")

    def validate(self) -> "ExperimentConfig":
        if self.N < 2:
            raise ConfigError("N must be >= 2")
        if self.T < 0:
            raise ConfigError("T must be >= 0")
        if not 1 <= self.n <= self.N:
            raise ConfigError(f"n must lie in 1..N (got n={self.n}, N={self.N})")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if list(self.grid) != sorted(self.grid) or any(t < 0 for t in self.grid):
            raise ConfigError("grid must be sorted and non-negative")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        try:
            Scheme.parse(self.scheme)
            parse_model(self.model)
        except (ValueError, OSError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.csmc and Scheme.parse(self.scheme) is not Scheme.MULTINOMIAL:
            raise ConfigError("conditional SMC requires scheme=multinomial")
        return self

    def emit(self, include_runtime: bool = True) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if not include_runtime and f.name in self._RUNTIME:
                continue
            lines.append(f"{f.name}={_fmt_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        values = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"config line {raw!r} is not key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _parse_value(key, val, types[key])
        return dataclasses.replace(base or cls(), **values)

    def config_hash(self) -> str:
        return hashlib.sha256(self.emit(include_runtime=False).encode()).hexdigest()[:16]

    def header(self) -> str:
        return f"seed={self.seed} config_hash={self.config_hash()}"


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, tuple):
        return ",".join(fmt_float(x) for x in v)
    return str(v)


def _parse_value(key, val, typ):
    try:
        if typ in ("int", int):
            return int(val)
        if typ in ("float", float):
            return float(val)
        if typ in ("bool", bool):
            if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return val.lower() in ("true", "1", "yes")
        if typ in ("tuple", tuple):
            return tuple(float(x) for x in val.split(",") if x.strip())
        return val
    except ValueError:
        raise ConfigError(f"bad value for {key}: {val!r}") from None


# ---------------------------------------------------------------- replicate workers

def _rep_dir(out: Path, r: int) -> Path:
    return out / f"rep_{r:05d}"


def _simulate_one(cfg: ExperimentConfig, r: int):
    model = parse_model(cfg.model)
    rng = make_rng(cfg.seed, r)
    if cfg.csmc:
        ref = run_smc(model, cfg.N, cfg.T, Scheme.MULTINOMIAL, rng)
        immortal = ImmortalPath.from_trace(ref, int(rng.integers(cfg.N)))
        return run_csmc(model, cfg.N, cfg.T, immortal, rng)
    return run_smc(model, cfg.N, cfg.T, cfg.scheme, rng)


def _genealogy_inline(cfg: ExperimentConfig, r: int):
    model = parse_model(cfg.model)
    return replicate_genealogy(model, cfg.scheme, cfg.N, cfg.T, cfg.n, cfg.seed, r)


def _genealogy_from_trace(cfg: ExperimentConfig, trace_dir: str, r: int):
    path = _rep_dir(Path(trace_dir), r) / "ancestry.csv"
    anc = AncestryMatrix.from_csv(path.read_text())
    if cfg.n > anc.N:
        raise ConfigError(f"n={cfg.n} exceeds the {anc.N} particles of {path}")
    # terminal sample drawn from a child of the replicate stream
    rng = make_rng(cfg.seed, r).spawn(1)[0]
    return extract_genealogy(anc, sample_terminal(anc.N, cfg.n, rng))


def _run_pool(fn, args_list, workers: int):
    """Map fn over args in replicate order, in-process when one worker is requested."""
    if workers <= 1 or len(args_list) <= 1:
        for args in args_list:
            yield fn(*args)
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        yield from ex.map(fn, *zip(*args_list), chunksize=max(1, len(args_list) // (8 * workers)))


def _workers(cfg: ExperimentConfig) -> int:
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------- subcommands

def cmd_simulate(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(f"# {cfg.header()}\n" + cfg.emit())
    summary = [f"# {cfg.header()}", "replicate,Zhat"]
    try:
        traces = _run_pool(_simulate_one, [(cfg, r) for r in range(cfg.reps)], _workers(cfg))
        for r, trace in enumerate(traces):
            export_trace(trace, _rep_dir(out, r), cfg.seed, cfg.config_hash(),
                         extra={"replicate": r, "csmc": cfg.csmc})
            z = float(np.exp(np.sum(np.log(trace.likelihood_factors))))
            summary.append(f"{r},{fmt_float(z)}")
    except DegenerateWeightsError as exc:
        print(f"error: degenerate weights: all potentials zero at generation {exc.generation}",
              file=sys.stderr)
        return EXIT_DEGENERATE
    (out / "summary.csv").write_text("\n".join(summary) + "\n")
    print(f"wrote {cfg.reps} replicate(s) to {out}")
    return EXIT_OK


def _na(v) -> str:
    return "NA" if v is None else (fmt_float(v) if isinstance(v, float) else str(v))


def cmd_genealogy(cfg: ExperimentConfig, trace_dir: Optional[str], inline: bool,
                  per_replicate: bool = True) -> int:
    out = Path(cfg.out)
    if inline:
        jobs = [(cfg, r) for r in range(cfg.reps)]
        fn = _genealogy_inline
    else:
        src = Path(trace_dir or cfg.out)
        missing = [r for r in range(cfg.reps)
                   if not (_rep_dir(src, r) / "ancestry.csv").is_file()]
        if missing:
            print(f"error: no trace for replicate {missing[0]} under {src} "
                  "(run simulate first or pass --simulate-inline)", file=sys.stderr)
            return EXIT_USAGE
        jobs = [(cfg, str(src), r) for r in range(cfg.reps)]
        fn = _genealogy_from_trace
    out.mkdir(parents=True, exist_ok=True)
    head = f"# {cfg.header()}"
    grid = tuple(cfg.grid)
    pooled = [head, "replicate," + ",".join(f"blocks_t{fmt_float(t)}" for t in grid)
              + (",pair_time" if cfg.n == 2 else "")]
    table = np.zeros((len(grid), cfg.n), dtype=np.int64)
    times = []
    for r, path in enumerate(_run_pool(fn, jobs, _workers(cfg))):
        counts = rescaled_block_counts(path, grid).block_counts
        for i, k in enumerate(counts):
            if k is not None:
                table[i, k - 1] += 1
        row = [str(r)] + [_na(k) for k in counts]
        if cfg.n == 2:
            t2 = pair_coalescence_time(path)
            times.append(t2)
            row.append(_na(t2))
        pooled.append(",".join(row))
        if per_replicate:
            d = _rep_dir(out, r)
            d.mkdir(parents=True, exist_ok=True)
            (d / "genealogy.csv").write_text(path.to_csv(cfg.header()))
            (d / "rescaled.csv").write_text(
                "\n".join([head, "t,n_blocks"] + [f"{fmt_float(t)},{_na(k)}"
                                                  for t, k in zip(grid, counts)]) + "\n")
    (out / "genealogy_pooled.csv").write_text("\n".join(pooled) + "\n")

    for i, t in enumerate(grid):
        got = int(table[i].sum())
        line = f"t={fmt_float(t)}: {got}/{cfg.reps} uncensored"
        if got:
            rep = chi_square_block_counts(table[i], block_count_marginal(cfg.n, t)
                                          if cfg.n <= 12 else
                                          block_count_marginal(cfg.n, t, method="ode"),
                                          cfg.alpha, label=f"Kingman n={cfg.n}")
            line += " | " + rep.line()
        print(line)
    if cfg.n == 2:
        done = np.array([t for t in times if t is not None])
        msg = f"pair times: {done.size}/{cfg.reps} coalesced"
        if done.size:
            msg += f", mean {done.mean():.4f}"
        if done.size > 1:
            msg += f" (SE {done.std(ddof=1) / math.sqrt(done.size):.4f})"
        print(msg)
        if done.size >= 30:
            print(ks_exp1(done, cfg.alpha).line())
    return EXIT_OK


def cmd_validate(suite: str, seed: int) -> int:
    names = list(SUITES) if suite == "all" else [suite]
    if any(s not in SUITES for s in names):
        print(f"error: unknown suite {suite!r} (known: {', '.join(SUITES)}, all)", file=sys.stderr)
        return EXIT_USAGE
    ok = True
    for name in names:
        for check in SUITES[name](seed):
            print(f"[{name}] {check.line()}")
            ok &= check.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_kingman_table(cfg: ExperimentConfig, method: str, to_stdout: bool) -> int:
    chunks = []
    for t in cfg.grid:
        p = block_count_marginal(cfg.n, t, method=method)
        body = "k,prob\n" + "".join(f"{k},{fmt_float(v)}\n" for k, v in enumerate(p, start=1))
        chunks.append((t, f"# {cfg.header()} n={cfg.n} t={fmt_float(t)}\n" + body))
    if to_stdout:
        sys.stdout.write("".join(c for _, c in chunks))
        return EXIT_OK
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for t, text in chunks:
        (out / f"kingman_n{cfg.n}_t{fmt_float(t)}.csv").write_text(text)
    print(f"wrote {len(chunks)} table(s) to {out}")
    return EXIT_OK


def cmd_compare_timescales(cfg: ExperimentConfig, to_stdout: bool) -> int:
    """Per-generation E[c_N | w_t] under multinomial and stochastic rounding along one run."""
    try:
        trace = _simulate_one(cfg, 0)
    except DegenerateWeightsError as exc:
        print(f"error: degenerate weights at generation {exc.generation}", file=sys.stderr)
        return EXIT_DEGENERATE
    lines = [f"# {cfg.header()}",
             "t,cN_multinomial,cN_stochastic_rounding,delta,clock_multinomial,"
             "clock_stochastic_rounding"]
    cm = cs = 0.0
    for t, w in enumerate(trace.weights[:-1]):
        m = expected_pair_merger_rate(w, "multinomial")
        s = expected_pair_merger_rate(w, "stochastic_rounding")
        cm += m
        cs += s
        lines.append(",".join([str(t), fmt_float(m), fmt_float(s), fmt_float(m - s),
                               fmt_float(cm), fmt_float(cs)]))
    text = "\n".join(lines) + "\n"
    if to_stdout:
        sys.stdout.write(text)
    else:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "timescales.csv").write_text(text)
        print(f"multinomial clock {cm:.6g}, stochastic-rounding clock {cs:.6g} "
              f"over {trace.T} generations -> {out / 'timescales.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file (flags override it)")
    p.add_argument("--seed", type=int)
    p.add_argument("--scheme")
    p.add_argument("--model")
    p.add_argument("--N", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--grid", help="comma-separated rescaled times")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smcgen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run SMC replicates and export traces")
    _common(p)
    p.add_argument("--csmc", action="store_true", default=None,
                   help="conditional SMC with an immortal trajectory")

    p = sub.add_parser("genealogy", help="extract genealogies and rescaled block counts")
    _common(p)
    p.add_argument("--trace", help="directory of simulate output (default: --out)")
    p.add_argument("--simulate-inline", action="store_true",
                   help="simulate replicates in-process instead of reading traces")
    p.add_argument("--pooled-only", action="store_true",
                   help="skip per-replicate genealogy files")

    p = sub.add_parser("validate", help="run a named validation suite")
    p.add_argument("suite", help=f"one of {', '.join(SUITES)}, all")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("kingman-table", help="exact block-count marginals as k,prob CSV")
    _common(p)
    p.add_argument("--method", choices=("spectral", "ode"), default="spectral")
    p.add_argument("--stdout", action="store_true")

    p = sub.add_parser("compare-timescales",
                       help="expected pair merger rates under multinomial vs stochastic rounding")
    _common(p)
    p.add_argument("--stdout", action="store_true")
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = ExperimentConfig.parse(text)
    overrides = {}
    for key in ("seed", "scheme", "model", "N", "T", "n", "reps", "out", "workers", "alpha",
                "csmc"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "grid", None):
        overrides["grid"] = _parse_value("grid", args.grid, tuple)
    return dataclasses.replace(cfg, **overrides).validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args.suite, args.seed)
    try:
        cfg = config_from_args(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "genealogy":
            return cmd_genealogy(cfg, args.trace, args.simulate_inline, not args.pooled_only)
        if args.command == "kingman-table":
            return cmd_kingman_table(cfg, args.method, args.stdout)
        return cmd_compare_timescales(cfg, args.stdout)
    except (ConfigError, ModelParameterError, MalformedInputError, SizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
