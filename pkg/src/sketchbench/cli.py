"""Benchmark harness: deterministic experiment sweeps with CSV output.

Usage:
    sketchbench <command> [--config FILE] [--profile NAME] [--seed N]
                [--out FILE] [--threads N]

Commands: distortion-sweep, lowrank-sweep, lsq-bench, verify-graph,
magical-delta, gen.

Configuration is a flat ``key = value`` text file ('#' starts a comment).
Later sources override earlier ones: built-in defaults, then the selected
profile, then the config file, then the SKETCHBENCH_SEED environment
variable, then command-line flags.

Every CSV cell except wall_time_ms is a pure function of (command, config,
seed).  Each work unit draws its randomness from a child stream keyed by a
hash of (command, method label, m, trial), so adding methods or m values to
a sweep never changes the rows that were already there, and thread count
never affects output: rows are emitted in (method, m, trial) order no
matter which worker finishes first.

Method specs are colon-separated: ``graph:s=2``, ``graph:s=4:gamma=8``,
``countsketch`` (same as graph:s=1), ``gaussian``.  Graph methods round m
up to the nearest multiple of s; both the requested and the effective m
appear in the output.

Input specs are MatrixMarket paths or generators:
``gen:gaussian:<n>x<d>`` and ``gen:lowrank:<n>x<d>:<k>:<sigma>``.

Exit codes: 0 success, 2 configuration problem, 3 iteration failure inside
a numerical kernel, 4 rank deficiency or an exhausted enumeration budget.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import BudgetExceededError, estimate_magical_delta, verify_expansion
from .linalg import ConvergenceError, RankDeficiencyError, thin_qr
from .matrices import (
    densify,
    gen_gaussian,
    gen_low_rank_plus_noise,
    read_matrix_market,
    write_matrix_market,
)
from .metrics import distortion_via_basis
from .pipelines import lowrank_approx, sketch_and_solve_lsq
from .rng import Prng
from .sketch import gaussian_sketch_new, graph_sketch_new, sketch_to_graph

COMMANDS = (
    "distortion-sweep",
    "lowrank-sweep",
    "lsq-bench",
    "verify-graph",
    "magical-delta",
    "gen",
)

CSV_HEADER = (
    "command,dataset,method,n,d,s,gamma,m_requested,m_effective,"
    "k,trial,seed,metric_name,metric_value,wall_time_ms"
)

_CONFIG_KEYS = {
    "input": str,
    "methods": str,
    "m_values": str,
    "k": int,
    "eps": float,
    "delta": float,
    "trials": int,
    "seed": int,
    "output": str,
    "threads": int,
    "row_mode": str,
    "n": int,
    "s": int,
}

_DEFAULTS = {
    "input": None,
    "methods": "graph:s=2",
    "m_values": None,
    "k": 10,
    "eps": 0.5,
    "delta": 0.1,
    "trials": 10,
    "seed": 12345,
    "output": None,
    "threads": 1,
    "row_mode": "block",
    "n": None,
    "s": None,
}

_SWEEP_METHODS = "graph:s=1,graph:s=2,graph:s=4,gaussian"

PROFILES = {
    # paper-scale sweep: slow, meant for overnight runs
    "fig1": {
        "input": "gen:gaussian:4096x1000",
        "methods": _SWEEP_METHODS,
        "m_values": "1500,2000,3000,4000,6000",
        "k": "1000",
        "trials": "10",
    },
    # same shape scaled to run in minutes
    "desk": {
        "input": "gen:gaussian:1024x100",
        "methods": _SWEEP_METHODS,
        "m_values": "200,400,800,1600",
        "k": "100",
        "trials": "10",
    },
    "fig3-lowrank": {
        "input": "gen:lowrank:4096x1000:10:0.01",
        "methods": _SWEEP_METHODS,
        "m_values": "20,40,80,160,320,640",
        "k": "10",
        "trials": "10",
    },
    "desk-lowrank": {
        "input": "gen:lowrank:1024x100:10:0.01",
        "methods": _SWEEP_METHODS,
        "m_values": "20,40,80",
        "k": "10",
        "trials": "10",
    },
}


class ConfigError(ValueError):
    """Bad command line, config file, profile, or parameter combination."""


@dataclass(frozen=True)
class MethodSpec:
    """Parsed operator spec: kind plus degree and independence."""

    label: str
    kind: str            # "graph" or "gaussian"
    s: int               # 0 for gaussian
    gamma: int | None

    @property
    def gamma_text(self) -> str:
        return "full" if self.gamma is None else str(self.gamma)

    def effective_m(self, m: int) -> int:
        if self.kind == "gaussian" or self.s <= 1:
            return m
        return ((m + self.s - 1) // self.s) * self.s

    def build(self, n: int, m_eff: int, rng: Prng, row_mode: str):
        if self.kind == "gaussian":
            return gaussian_sketch_new(n, m_eff, rng)
        return graph_sketch_new(n, m_eff, self.s, rng, gamma=self.gamma, row_mode=row_mode)


def parse_method(spec: str) -> MethodSpec:
    parts = spec.strip().split(":")
    name = parts[0]
    opts: dict[str, str] = {}
    for part in parts[1:]:
        if "=" not in part:
            raise ConfigError(f"method option {part!r} in {spec!r} must be key=value")
        key, val = part.split("=", 1)
        opts[key] = val
    if name == "gaussian":
        if opts:
            raise ConfigError(f"gaussian method takes no options, got {spec!r}")
        return MethodSpec(label=spec.strip(), kind="gaussian", s=0, gamma=None)
    if name == "countsketch":
        if opts:
            raise ConfigError(f"countsketch method takes no options, got {spec!r}")
        return MethodSpec(label=spec.strip(), kind="graph", s=1, gamma=None)
    if name == "graph":
        unknown = set(opts) - {"s", "gamma"}
        if unknown:
            raise ConfigError(f"unknown graph options {sorted(unknown)} in {spec!r}")
        try:
            s = int(opts.get("s", "2"))
            gamma = int(opts["gamma"]) if "gamma" in opts else None
        except ValueError:
            raise ConfigError(f"non-integer option value in {spec!r}") from None
        if s < 1:
            raise ConfigError(f"graph degree s must be >= 1 in {spec!r}")
        if gamma is not None and gamma < 1:
            raise ConfigError(f"gamma must be >= 1 in {spec!r}")
        return MethodSpec(label=spec.strip(), kind="graph", s=s, gamma=gamma)
    raise ConfigError(f"unknown method {name!r} (expected graph, countsketch, or gaussian)")


@dataclass
class ExperimentConfig:
    command: str
    input: str | None
    methods: tuple[MethodSpec, ...]
    m_values: tuple[int, ...]
    k: int
    eps: float
    delta: float
    trials: int
    seed: int
    output: str | None
    threads: int
    row_mode: str
    n: int | None
    s: int | None


@dataclass
class SweepRow:
    command: str
    dataset: str
    method: str
    n: int
    d: int
    s: int
    gamma: str
    m_requested: int
    m_effective: int
    k: int
    trial: int
    seed: int
    metric_name: str
    metric_value: float
    wall_time_ms: float

    def to_line(self) -> str:
        value = repr(float(self.metric_value))
        return (
            f"{self.command},{self.dataset},{self.method},{self.n},{self.d},"
            f"{self.s},{self.gamma},{self.m_requested},{self.m_effective},"
            f"{self.k},{self.trial},{self.seed},{self.metric_name},"
            f"{value},{self.wall_time_ms:.3f}"
        )


# ---------------------------------------------------------------------------
# configuration assembly


def _parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = val
    return out


def _coerce(key: str, raw) -> object:
    if raw is None:
        return None
    if isinstance(raw, (int, float)):
        return raw
    caster = _CONFIG_KEYS[key]
    try:
        return caster(raw)
    except ValueError:
        raise ConfigError(f"config key {key}={raw!r} is not a valid {caster.__name__}") from None


def _parse_m_values(raw: str | None) -> tuple[int, ...]:
    if raw is None or str(raw).strip() == "":
        return ()
    try:
        values = tuple(int(part.strip()) for part in str(raw).split(","))
    except ValueError:
        raise ConfigError(f"m_values must be comma-separated integers, got {raw!r}") from None
    if any(v < 1 for v in values):
        raise ConfigError(f"m_values must be positive, got {raw!r}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"m_values must be strictly ascending, got {raw!r}")
    return values


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    merged: dict[str, object] = dict(_DEFAULTS)
    if args.profile is not None:
        if args.profile not in PROFILES:
            raise ConfigError(
                f"unknown profile {args.profile!r}; available: {', '.join(sorted(PROFILES))}"
            )
        merged.update(PROFILES[args.profile])
    if args.config is not None:
        merged.update(_parse_config_file(args.config))
    env_seed = os.environ.get("SKETCHBENCH_SEED")
    if env_seed is not None:
        merged["seed"] = env_seed
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.out is not None:
        merged["output"] = args.out
    if args.threads is not None:
        merged["threads"] = args.threads

    typed = {key: _coerce(key, merged[key]) for key in _CONFIG_KEYS}
    methods = tuple(parse_method(part) for part in str(typed["methods"]).split(",") if part.strip())
    if not methods:
        raise ConfigError("at least one method is required")
    cfg = ExperimentConfig(
        command=args.command,
        input=typed["input"],
        methods=methods,
        m_values=_parse_m_values(typed["m_values"]),
        k=int(typed["k"]),
        eps=float(typed["eps"]),
        delta=float(typed["delta"]),
        trials=int(typed["trials"]),
        seed=int(typed["seed"]),
        output=typed["output"],
        threads=int(typed["threads"]),
        row_mode=str(typed["row_mode"]),
        n=typed["n"],
        s=typed["s"],
    )
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: ExperimentConfig) -> None:
    if cfg.trials < 1:
        raise ConfigError(f"trials must be >= 1, got {cfg.trials}")
    if cfg.threads < 1:
        raise ConfigError(f"threads must be >= 1, got {cfg.threads}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {cfg.seed}")
    if cfg.row_mode not in ("block", "subset"):
        raise ConfigError(f"row_mode must be block or subset, got {cfg.row_mode!r}")
    if cfg.command in ("distortion-sweep", "lowrank-sweep", "lsq-bench", "gen"):
        if cfg.input is None:
            raise ConfigError(f"{cfg.command} requires an input spec or path")
    if cfg.command in ("distortion-sweep", "lowrank-sweep", "lsq-bench", "verify-graph", "magical-delta"):
        if not cfg.m_values:
            raise ConfigError(f"{cfg.command} requires m_values")
    if cfg.command in ("verify-graph", "magical-delta"):
        if cfg.n is None or cfg.s is None:
            raise ConfigError(f"{cfg.command} requires the n and s config keys")
        if not 1 <= cfg.k <= cfg.n:
            raise ConfigError(f"need 1 <= k <= n, got k={cfg.k}, n={cfg.n}")
    if cfg.command == "gen" and cfg.output is None:
        raise ConfigError("gen requires --out (the .mtx destination)")


# ---------------------------------------------------------------------------
# datasets and streams


@dataclass
class Dataset:
    spec: str
    matrix: object  # ndarray or CsrMatrix
    n: int
    d: int


def _mix_stream_id(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _trial_stream(master: Prng, command: str, method: str, m: int, trial: int) -> Prng:
    return master.split(_mix_stream_id(command, method, m, trial))


def load_dataset(spec: str, master: Prng) -> Dataset:
    if spec.startswith("gen:"):
        parts = spec.split(":")
        stream = master.split(_mix_stream_id("dataset", spec))
        try:
            if parts[1] == "gaussian" and len(parts) == 3:
                n, d = (int(x) for x in parts[2].split("x"))
                return Dataset(spec, gen_gaussian(n, d, stream), n, d)
            if parts[1] == "lowrank" and len(parts) == 5:
                n, d = (int(x) for x in parts[2].split("x"))
                k = int(parts[3])
                sigma = float(parts[4])
                return Dataset(spec, gen_low_rank_plus_noise(n, d, k, sigma, stream), n, d)
        except ValueError as exc:
            raise ConfigError(f"bad generator spec {spec!r}: {exc}") from None
        raise ConfigError(
            f"bad generator spec {spec!r} "
            "(expected gen:gaussian:<n>x<d> or gen:lowrank:<n>x<d>:<k>:<sigma>)"
        )
    matrix = read_matrix_market(spec)
    n, d = matrix.shape
    return Dataset(spec, matrix, n, d)


def _pool_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# commands


def run_distortion_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    master = Prng(cfg.seed)
    data = load_dataset(cfg.input, master)
    a = densify(data.matrix)
    if a.shape[0] < a.shape[1]:
        raise RankDeficiencyError(
            f"input is {a.shape[0]}x{a.shape[1]} (wide): cannot have full column rank"
        )
    basis, r = thin_qr(a)
    diag = np.abs(np.diag(r))
    if diag.max() == 0.0 or diag.min() <= 1e-10 * diag.max():
        raise RankDeficiencyError("input matrix is rank deficient; distortion is undefined")

    items = [
        (method, m, trial)
        for method in cfg.methods
        for m in cfg.m_values
        for trial in range(cfg.trials)
    ]

    def work(item):
        method, m, trial = item
        t0 = time.perf_counter()
        m_eff = method.effective_m(m)
        stream = _trial_stream(master, cfg.command, method.label, m, trial)
        op = method.build(data.n, m_eff, stream, cfg.row_mode)
        eta = distortion_via_basis(basis, op).eta
        ms = (time.perf_counter() - t0) * 1000.0
        return SweepRow(
            command=cfg.command, dataset=data.spec, method=method.label,
            n=data.n, d=data.d, s=method.s, gamma=method.gamma_text,
            m_requested=m, m_effective=m_eff, k=data.d, trial=trial,
            seed=cfg.seed, metric_name="distortion", metric_value=eta,
            wall_time_ms=ms,
        )

    return _pool_map(work, items, cfg.threads)


def run_lowrank_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    master = Prng(cfg.seed)
    data = load_dataset(cfg.input, master)
    if not 1 <= cfg.k <= min(data.n, data.d):
        raise ConfigError(f"k={cfg.k} out of range for {data.n}x{data.d} input")

    items = [
        (method, m, trial)
        for method in cfg.methods
        for m in cfg.m_values
        for trial in range(cfg.trials)
    ]

    def work(item):
        method, m, trial = item
        t0 = time.perf_counter()
        m_eff = method.effective_m(m)
        common = dict(
            command=cfg.command, dataset=data.spec, method=method.label,
            n=data.n, d=data.d, s=method.s, gamma=method.gamma_text,
            m_requested=m, m_effective=m_eff, k=cfg.k, trial=trial, seed=cfg.seed,
        )
        if m_eff < cfg.k:
            # too few sketch rows to capture a rank-k subspace; emit a
            # warning row instead of aborting the sweep
            ms = (time.perf_counter() - t0) * 1000.0
            return SweepRow(
                metric_name="skipped_m_below_k", metric_value=1.0,
                wall_time_ms=ms, **common,
            )
        stream = _trial_stream(master, cfg.command, method.label, m, trial)
        op = method.build(data.n, m_eff, stream, cfg.row_mode)
        res = lowrank_approx(data.matrix, cfg.k, op)
        ms = (time.perf_counter() - t0) * 1000.0
        return SweepRow(
            metric_name="lowrank_ratio", metric_value=res.ratio,
            wall_time_ms=ms, **common,
        )

    return _pool_map(work, items, cfg.threads)


def run_lsq_bench(cfg: ExperimentConfig) -> list[SweepRow]:
    master = Prng(cfg.seed)
    data = load_dataset(cfg.input, master)
    a = densify(data.matrix)
    if a.shape[0] < a.shape[1]:
        raise RankDeficiencyError(
            f"least squares needs a tall input, got {a.shape[0]}x{a.shape[1]}"
        )

    items = [
        (method, m, trial)
        for method in cfg.methods
        for m in cfg.m_values
        for trial in range(cfg.trials)
    ]

    def work(item):
        method, m, trial = item
        t0 = time.perf_counter()
        m_eff = method.effective_m(m)
        stream = _trial_stream(master, cfg.command, method.label, m, trial)
        op = method.build(data.n, m_eff, stream.split(0), cfg.row_mode)
        # per-trial noisy consistent system: b = A x0 + 0.1 z
        x0 = stream.split(1).normal(data.d)
        noise = stream.split(2).normal(data.n)
        b = a @ x0 + 0.1 * noise
        res = sketch_and_solve_lsq(a, b, op)
        ms = (time.perf_counter() - t0) * 1000.0
        return SweepRow(
            command=cfg.command, dataset=data.spec, method=method.label,
            n=data.n, d=data.d, s=method.s, gamma=method.gamma_text,
            m_requested=m, m_effective=m_eff, k=data.d, trial=trial,
            seed=cfg.seed, metric_name="lsq_ratio", metric_value=res.ratio,
            wall_time_ms=ms,
        )

    return _pool_map(work, items, cfg.threads)


def run_verify_graph(cfg: ExperimentConfig) -> list[SweepRow]:
    master = Prng(cfg.seed)
    method = cfg.methods[0]
    if method.kind != "graph":
        raise ConfigError("verify-graph needs a graph method")
    spec = f"graph:n={cfg.n}:s={cfg.s}"
    rows: list[SweepRow] = []
    witnesses: list[str] = []
    for m in cfg.m_values:
        m_eff = ((m + cfg.s - 1) // cfg.s) * cfg.s
        for trial in range(cfg.trials):
            t0 = time.perf_counter()
            stream = _trial_stream(master, cfg.command, spec, m, trial)
            g = sketch_to_graph(
                graph_sketch_new(cfg.n, m_eff, cfg.s, stream, row_mode=cfg.row_mode)
            )
            res = verify_expansion(g, cfg.k, cfg.eps)
            if res.witness is not None:
                witnesses.append(f"m={m} trial={trial} witness={list(res.witness)}")
            ms = (time.perf_counter() - t0) * 1000.0
            rows.append(SweepRow(
                command=cfg.command, dataset=spec, method=spec,
                n=cfg.n, d=0, s=cfg.s, gamma="full",
                m_requested=m, m_effective=m_eff, k=cfg.k, trial=trial,
                seed=cfg.seed, metric_name="expansion_holds",
                metric_value=1.0 if res.holds else 0.0, wall_time_ms=ms,
            ))
    if witnesses:
        text = "\n".join(witnesses) + "\n"
        if cfg.output is not None:
            Path(cfg.output + ".witness.txt").write_text(text)
        else:
            sys.stderr.write(text)
    return rows


def run_magical_delta(cfg: ExperimentConfig) -> list[SweepRow]:
    master = Prng(cfg.seed)
    spec = f"graph:n={cfg.n}:s={cfg.s}"
    rows: list[SweepRow] = []
    for m in cfg.m_values:
        t0 = time.perf_counter()
        m_eff = ((m + cfg.s - 1) // cfg.s) * cfg.s
        stream = _trial_stream(master, cfg.command, spec, m, 0)
        rate = estimate_magical_delta(cfg.n, m_eff, cfg.s, cfg.k, cfg.trials, stream)
        ms = (time.perf_counter() - t0) * 1000.0
        rows.append(SweepRow(
            command=cfg.command, dataset=spec, method=spec,
            n=cfg.n, d=0, s=cfg.s, gamma="full",
            m_requested=m, m_effective=m_eff, k=cfg.k, trial=0,
            seed=cfg.seed, metric_name="failure_rate", metric_value=rate,
            wall_time_ms=ms,
        ))
    return rows


def run_gen(cfg: ExperimentConfig) -> list[SweepRow]:
    if not cfg.input.startswith("gen:"):
        raise ConfigError("gen needs a gen:... input spec")
    master = Prng(cfg.seed)
    data = load_dataset(cfg.input, master)
    write_matrix_market(data.matrix, cfg.output)
    sys.stderr.write(f"wrote {data.n}x{data.d} matrix to {cfg.output}\n")
    return []


_RUNNERS = {
    "distortion-sweep": run_distortion_sweep,
    "lowrank-sweep": run_lowrank_sweep,
    "lsq-bench": run_lsq_bench,
    "verify-graph": run_verify_graph,
    "magical-delta": run_magical_delta,
    "gen": run_gen,
}


# ---------------------------------------------------------------------------
# entry points


def write_csv(rows: list[SweepRow], output: str | None) -> None:
    lines = [CSV_HEADER] + [row.to_line() for row in rows]
    text = "\n".join(lines) + "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchbench",
        description="sketch-operator benchmark sweeps with deterministic CSV output",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--profile", help=f"built-in defaults: {', '.join(sorted(PROFILES))}")
    parser.add_argument("--seed", type=int, help="master seed (overrides config and env)")
    parser.add_argument("--out", help="output CSV path (default: stdout)")
    parser.add_argument("--threads", type=int, help="worker threads for sweep trials")
    return parser


def main(argv=None) -> int:
    try:
        args = _arg_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = build_config(args)
        rows = _RUNNERS[cfg.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except (RankDeficiencyError, BudgetExceededError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 4
    except ConvergenceError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return 3
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    if cfg.command != "gen":
        write_csv(rows, cfg.output)
    return 0


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
