"""Seeded Monte Carlo ISI experiments and the ``sdmma`` command line.

Every run ``k`` draws its symbols and noise from
``SeedSequence(base_seed + k).generate_state(2, uint64)``: word 0 seeds the
symbol stream, word 1 the noise stream.  All algorithms of an experiment
see the same received sequence in run ``k``, so curves are paired.

The fixed-point equalizer is iteration-indexed rather than sample-indexed;
its ensemble goes to its own CSV whose index column is ``iter``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import BUILTIN_CHANNELS, NoiseSpec, builtin_channel, transmit
from .constellation import draw_symbols, make_square_qam
from .equalizer import DivergenceError
from .estimators import FPMMAEqualizer, MMAEqualizer, SDMMAEqualizer
from .metrics import IsiTrajectory, combined_response, isi_ratio
from .tensorops import ForgettingPolicy

__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentResult",
    "RunResult",
    "UsageError",
    "emit_csv",
    "main",
    "parse_cli",
    "run_experiment",
    "run_single",
]

logger = logging.getLogger(__name__)

ALGORITHMS = ("mma", "sd-mma", "fp-mma")
DEFAULT_MU = {"mma": 1e-4, "sd-mma": 1e-4, "fp-mma": 5e-3}
DEFAULT_RUNS = {"mma": 400, "sd-mma": 50, "fp-mma": 50}


class UsageError(ValueError):
    """Invalid command line or configuration value."""


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    channel_id: str = "channel-1"
    constellation_order: int = 16
    n_taps: int = 15
    init_index: int | None = None
    algorithms: tuple = ("mma", "sd-mma")
    mu: dict = field(default_factory=lambda: dict(DEFAULT_MU))
    forgetting: ForgettingPolicy = field(default_factory=ForgettingPolicy)
    snr_db: float | None = 30.0
    num_symbols: int = 20_000
    num_runs: dict = field(default_factory=lambda: dict(DEFAULT_RUNS))
    base_seed: int = 0
    record_every: int = 50
    output_path: str | None = "isi.csv"
    plot_script: str | None = None
    workers: int = 1
    fp_max_iter: int = 2000
    fp_tol: float = 1e-8

    def __post_init__(self):
        if self.channel_id not in BUILTIN_CHANNELS:
            raise UsageError(f"--channel: unknown channel {self.channel_id!r}")
        try:
            make_square_qam(self.constellation_order)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"--qam: {exc}") from None
        if self.n_taps < 1:
            raise UsageError("--equalizer-length: must be >= 1")
        if self.init_index is None:
            object.__setattr__(self, "init_index", self.n_taps // 2)
        if not 0 <= self.init_index < self.n_taps:
            raise UsageError(f"--init-index: must lie in [0, {self.n_taps})")
        if not self.algorithms:
            raise UsageError("--algo: select at least one algorithm")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise UsageError(f"--algo: unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise UsageError("--algo: duplicate algorithm")
        for a in self.algorithms:
            mu = self.mu.get(a)
            if mu is None or not np.isfinite(mu) or mu <= 0:
                raise UsageError(f"--mu: step size for {a} must be positive")
            runs = self.num_runs.get(a)
            if runs is None or runs < 1:
                raise UsageError(f"--runs: run count for {a} must be >= 1")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise UsageError("--snr-db: must be finite or 'off'")
        if self.num_symbols < self.n_taps:
            raise UsageError("--symbols: must be at least the equalizer length")
        if self.record_every < 1:
            raise UsageError("--record-every: must be >= 1")
        if self.workers < 1:
            raise UsageError("--workers: must be >= 1")
        if self.fp_max_iter < 1:
            raise UsageError("--fp-iters: must be >= 1")
        if not self.fp_tol > 0:
            raise UsageError("--fp-tol: must be positive")

    def seeds(self, run_index: int) -> tuple[int, int]:
        """``(symbol_seed, noise_seed)`` of run ``run_index``."""
        words = np.random.SeedSequence(self.base_seed + run_index).generate_state(2, np.uint64)
        return int(words[0]), int(words[1])

    def as_items(self) -> list[tuple[str, str]]:
        """Resolved configuration as ``(flag, value)`` pairs, in CLI spelling."""
        algos = self.algorithms
        return [
            ("channel", self.channel_id),
            ("qam", str(self.constellation_order)),
            ("algo", ",".join(algos)),
            ("equalizer-length", str(self.n_taps)),
            ("init-index", str(self.init_index)),
            ("mu", ",".join(f"{a}={self.mu[a]!r}" for a in algos)),
            ("lambda", str(self.forgetting)),
            ("snr-db", "off" if self.snr_db is None else repr(float(self.snr_db))),
            ("symbols", str(self.num_symbols)),
            ("runs", ",".join(f"{a}={self.num_runs[a]}" for a in algos)),
            ("seed", str(self.base_seed)),
            ("record-every", str(self.record_every)),
            ("fp-iters", str(self.fp_max_iter)),
            ("fp-tol", repr(self.fp_tol)),
        ]


@dataclass
class RunResult:
    algorithm: str
    run_index: int
    indices: np.ndarray
    ratios: np.ndarray
    final_taps: np.ndarray
    diverged: bool = False


def _received(cfg: ExperimentConfig, run_index: int):
    qam = make_square_qam(cfg.constellation_order)
    channel = builtin_channel(cfg.channel_id)
    sym_seed, noise_seed = cfg.seeds(run_index)
    symbols = draw_symbols(qam, cfg.num_symbols, sym_seed)
    noise = NoiseSpec.off() if cfg.snr_db is None else NoiseSpec(cfg.snr_db, noise_seed)
    return channel, transmit(symbols, channel, noise, symbol_power=qam.energy)


def _make_estimator(cfg: ExperimentConfig, algo: str):
    common = dict(
        n_taps=cfg.n_taps,
        mu=cfg.mu[algo],
        constellation_order=cfg.constellation_order,
        init_index=cfg.init_index,
        record_every=cfg.record_every,
    )
    if algo == "mma":
        return MMAEqualizer(**common)
    if algo == "sd-mma":
        return SDMMAEqualizer(forgetting=cfg.forgetting, **common)
    return FPMMAEqualizer(tol=cfg.fp_tol, max_iter=cfg.fp_max_iter, **common)


def index_grid(cfg: ExperimentConfig, algo: str) -> np.ndarray:
    """Recorded indices: samples for adaptive runs, iterations for ``fp-mma``."""
    last = cfg.fp_max_iter if algo == "fp-mma" else cfg.num_symbols
    return np.arange(0, last + 1, cfg.record_every)


def run_single(cfg: ExperimentConfig, algo: str, run_index: int) -> RunResult:
    """Run one algorithm on the received sequence of run ``run_index``.

    A diverging run returns ``diverged=True`` with the trajectory cut at the
    last finite record.  A fixed-point run that converges before
    ``fp_max_iter`` holds its final ratio for the remaining indices.
    """
    if algo not in cfg.algorithms:
        raise ValueError(f"{algo!r} is not part of this experiment")
    channel, received = _received(cfg, run_index)
    est = _make_estimator(cfg, algo)
    diverged = False
    try:
        est.fit(received)
    except DivergenceError:
        diverged = True
    taps = est.taps_history_
    with np.errstate(over="ignore", invalid="ignore"):
        ratios = np.array([isi_ratio(combined_response(channel, w)) for w in taps])
    indices = est.history_index_
    if diverged:
        # taps can stay finite while their squares overflow just before blow-up
        bad = np.flatnonzero(~np.isfinite(ratios))
        if bad.size:
            ratios, indices = ratios[: bad[0]], indices[: bad[0]]
    grid = index_grid(cfg, algo)
    if algo == "fp-mma" and not diverged and indices.size < grid.size:
        final = isi_ratio(combined_response(channel, est.taps_))
        ratios = np.concatenate([ratios, np.full(grid.size - indices.size, final)])
        indices = grid
    return RunResult(algo, run_index, indices, ratios, np.array(est.taps_), diverged)


def _run_task(args):
    return run_single(*args)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: dict
    trajectories: dict
    diverged: dict

    def db(self, algo: str) -> np.ndarray:
        return self.trajectories[algo].db


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Execute every run of every algorithm and aggregate the ISI ensembles.

    Diverged runs are left out of the ensemble and counted.  With
    ``write=True`` and an output path the CSV files, the ``.meta`` sidecar
    and the optional plot script are written.
    """
    tasks = [(cfg, a, k) for a in cfg.algorithms for k in range(cfg.num_runs[a])]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        results = [_run_task(t) for t in tasks]

    runs, trajectories, diverged = {}, {}, {}
    for algo in cfg.algorithms:
        mine = sorted((r for r in results if r.algorithm == algo), key=lambda r: r.run_index)
        runs[algo] = mine
        good = [r for r in mine if not r.diverged]
        diverged[algo] = len(mine) - len(good)
        if not good:
            raise ExperimentError(f"all {len(mine)} runs of {algo} diverged")
        trajectories[algo] = IsiTrajectory(index_grid(cfg, algo), np.array([r.ratios for r in good]))
        logger.info("%s: %d runs, %d diverged", algo, len(mine), diverged[algo])

    result = ExperimentResult(cfg, runs, trajectories, diverged)
    if write and cfg.output_path:
        write_outputs(result)
    return result


def emit_csv(indices, columns: dict, path, index_label: str = "n") -> None:
    """Write ``index_label,isi_db_<algo>,...`` rows with 6-decimal dB values."""
    if not columns or len(indices) == 0:
        raise ValueError("nothing to write")
    lines = [",".join([index_label] + [f"isi_db_{name}" for name in columns])]
    cols = list(columns.values())
    order = np.argsort(indices, kind="stable")
    for i in order:
        lines.append(",".join([str(int(indices[i]))] + [f"{c[i]:.6f}" for c in cols]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def output_paths(cfg: ExperimentConfig) -> dict:
    """Where each file of an experiment goes: ``csv``, ``fp_csv``, ``meta``, ``plot``."""
    out = Path(cfg.output_path)
    paths = {"meta": out.with_suffix(".meta")}
    sampled = [a for a in cfg.algorithms if a != "fp-mma"]
    if sampled:
        paths["csv"] = out
    if "fp-mma" in cfg.algorithms:
        paths["fp_csv"] = out if not sampled else out.with_name(out.stem + ".fp-mma.csv")
    if cfg.plot_script:
        paths["plot"] = Path(cfg.plot_script)
    return paths


def write_outputs(result: ExperimentResult) -> dict:
    cfg = result.config
    paths = output_paths(cfg)
    sampled = [a for a in cfg.algorithms if a != "fp-mma"]
    if "csv" in paths:
        emit_csv(
            index_grid(cfg, sampled[0]),
            {a: result.db(a) for a in sampled},
            paths["csv"],
        )
    if "fp_csv" in paths:
        emit_csv(index_grid(cfg, "fp-mma"), {"fp-mma": result.db("fp-mma")}, paths["fp_csv"], "iter")
    items = cfg.as_items()
    items += [(f"diverged-{a}", str(result.diverged[a])) for a in cfg.algorithms]
    with open(paths["meta"], "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{k}={v}\n" for k, v in items)
    if "plot" in paths:
        _write_plot_script(paths, cfg)
    return paths


def _write_plot_script(paths: dict, cfg: ExperimentConfig) -> None:
    lines = [
        "# gnuplot script",
        'set datafile separator ","',
        "set key autotitle columnhead",
        'set ylabel "ISI (dB)"',
        "set grid",
    ]
    for key, xlabel in (("csv", "symbols"), ("fp_csv", "iterations")):
        if key in paths:
            ncols = 1 + (1 if key == "fp_csv" else sum(a != "fp-mma" for a in cfg.algorithms))
            lines += [
                f'set xlabel "{xlabel}"',
                f'plot for [col=2:{ncols}] "{paths[key]}" using 1:col with lines',
                "pause -1",
            ]
    with open(paths["plot"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------- CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _per_algo(values: list[str], flag: str, cast, defaults: dict) -> dict:
    out = dict(defaults)
    for value in values or []:
        for part in value.split(","):
            part = part.strip()
            if not part:
                continue
            name, sep, num = part.rpartition("=")
            try:
                parsed = cast(num)
            except ValueError:
                raise UsageError(f"{flag}: cannot parse {num!r}") from None
            if not sep:
                out = {a: parsed for a in ALGORITHMS}
            elif name not in ALGORITHMS:
                raise UsageError(f"{flag}: unknown algorithm {name!r}")
            else:
                out[name] = parsed
    return out


def _forgetting(text: str) -> ForgettingPolicy:
    if text == "harmonic":
        return ForgettingPolicy()
    mode, _, lam = text.partition(":")
    try:
        if mode != "fixed":
            raise ValueError
        return ForgettingPolicy.fixed(float(lam))
    except ValueError:
        raise UsageError(f"--lambda: expected 'harmonic' or 'fixed:<float in (0,1]>', got {text!r}") from None


def _snr(text: str):
    if text.lower() == "off":
        return None
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--snr-db: expected a number or 'off', got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="sdmma",
        description="Monte Carlo ISI convergence of blind MMA2-2 equalizers.",
    )
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--channel", default="channel-1", choices=sorted(BUILTIN_CHANNELS))
    p.add_argument("--qam", type=int, default=16, help="square QAM order")
    p.add_argument("--algo", default="mma,sd-mma", help="comma list of mma, sd-mma, fp-mma")
    p.add_argument("--equalizer-length", type=int, default=15)
    p.add_argument("--init-index", type=int, default=None, help="center-spike position")
    p.add_argument("--mu", action="append", help="<float> or <algo>=<float>, repeatable")
    p.add_argument("--lambda", dest="lam", default="harmonic", help="harmonic | fixed:<float>")
    p.add_argument("--snr-db", default="30", help="<float> or off")
    p.add_argument("--symbols", type=int, default=20_000)
    p.add_argument("--runs", action="append", help="<int> or <algo>=<int>, repeatable")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record-every", type=int, default=50)
    p.add_argument("--fp-iters", type=int, default=2000, help="fixed-point iteration cap")
    p.add_argument("--fp-tol", type=float, default=1e-8)
    p.add_argument("--out", default="isi.csv")
    p.add_argument("--plot-script", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _read_config_file(path: str) -> list[str]:
    argv = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--config: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"--config: line {lineno} is not key=value")
        key = key.strip()
        if key.startswith("diverged-"):
            continue
        argv += [f"--{key}", value.strip()]
    return argv


def _namespace(args) -> argparse.Namespace:
    parser = _build_parser()
    ns = parser.parse_args(args)
    if ns.config:
        # file values first so that command-line flags win; repeatable
        # per-algorithm flags accumulate in the same order
        ns = parser.parse_args(_read_config_file(ns.config) + list(args))
    return ns


def parse_cli(args=None) -> ExperimentConfig:
    """Turn command-line arguments into a validated :class:`ExperimentConfig`.

    Raises :class:`UsageError` naming the offending flag.
    """
    ns = _namespace(sys.argv[1:] if args is None else list(args))
    return ExperimentConfig(
        channel_id=ns.channel,
        constellation_order=ns.qam,
        n_taps=ns.equalizer_length,
        init_index=ns.init_index,
        algorithms=tuple(a.strip() for a in ns.algo.split(",") if a.strip()),
        mu=_per_algo(ns.mu, "--mu", float, DEFAULT_MU),
        forgetting=_forgetting(ns.lam),
        snr_db=_snr(ns.snr_db),
        num_symbols=ns.symbols,
        num_runs=_per_algo(ns.runs, "--runs", int, DEFAULT_RUNS),
        base_seed=ns.seed,
        record_every=ns.record_every,
        output_path=ns.out,
        plot_script=ns.plot_script,
        workers=ns.workers,
        fp_max_iter=ns.fp_iters,
        fp_tol=ns.fp_tol,
    )


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = parse_cli(argv)
        result = run_experiment(cfg)
    except UsageError as exc:
        _build_parser().print_usage(sys.stderr)
        print(f"sdmma: error: {exc}", file=sys.stderr)
        return 2
    except ExperimentError as exc:
        print(f"sdmma: experiment failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"sdmma: cannot write output: {exc}", file=sys.stderr)
        return 1
    for algo in cfg.algorithms:
        db = result.db(algo)
        tail = db[-max(1, db.size // 10):]
        print(
            f"{algo}: runs={cfg.num_runs[algo]} diverged={result.diverged[algo]} "
            f"final_isi_db={db[-1]:.2f} steady_state_db={tail.mean():.2f}"
        )
    for name, path in output_paths(cfg).items():
        print(f"wrote {path}")
    return 0
