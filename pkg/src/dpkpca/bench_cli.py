"""Seeded benchmark driver: parameter sweeps, trial loops, CSV persistence.

Configs come from a small key-value file format or named presets matching the
standard experiment setups (utility versus sample size, dimension, eigengap,
and noise level).  Every cell of the sweep derives its own seed from the base
seed and the cell coordinates, so runs are reproducible row by row and safe to
execute concurrently.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import math
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, dp_pca, metrics
from .baselines import ClipThresholds
from .datagen import SampleStream, spiked_rankk
from .dp_primitives import PrivacyBudget
from .errors import DpPcaError, UsageError
from .linalg import orthonormalize, sym_eig
from .rng import stable_seed, substream

ALGORITHMS = ("k-DP-PCA", "k-DP-Ojas", "DP-Gauss-1", "DP-Gauss-2", "DP-Power-Method")

CSV_COLUMNS = (
    "generator", "algorithm", "n", "d", "k", "sigma", "gap", "epsilon", "delta",
    "trial", "seed", "zeta2", "captured_energy", "optimal_energy", "sine",
    "frob_sq", "status", "diag_retries", "diag_bottoms", "ms",
)


@dataclass(frozen=True)
class ExperimentConfig:
    generator: str = "spiked_rankk"
    lambda1: float = 10.0
    algorithms: tuple = ALGORITHMS
    n_grid: tuple = (1000,)
    d_grid: tuple = (100,)
    k_grid: tuple = (2,)
    sigma_grid: tuple = (0.025,)
    gap_grid: tuple = (5.0,)
    epsilon_grid: tuple = (1.0,)
    delta: float = 0.01
    trials: int = 1
    base_seed: int = 0
    out: str = "results.csv"
    clip_confidence: float = 0.01
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        if not (0.0 < self.delta < 1.0):
            raise UsageError("delta must lie in (0, 1)")
        for name in ("n_grid", "d_grid", "k_grid", "sigma_grid", "gap_grid", "epsilon_grid"):
            if not getattr(self, name):
                raise UsageError(f"{name} must be nonempty")
        for alg in self.algorithms:
            if alg != "exact" and alg not in ALGORITHMS:
                raise UsageError(f"unknown algorithm {alg!r}; known: {', '.join(ALGORITHMS)}")

    def cells(self):
        for n in self.n_grid:
            for d in self.d_grid:
                for k in self.k_grid:
                    for sigma in self.sigma_grid:
                        for gap in self.gap_grid:
                            for eps in self.epsilon_grid:
                                yield (int(n), int(d), int(k), float(sigma), float(gap), float(eps))


@dataclass(frozen=True)
class ResultRecord:
    generator: str
    algorithm: str
    n: int
    d: int
    k: int
    sigma: float
    gap: float
    epsilon: float
    delta: float
    trial: int
    seed: int
    zeta2: float
    captured_energy: float
    optimal_energy: float
    sine: float
    frob_sq: float
    status: str
    diag_retries: int
    diag_bottoms: int
    ms: float

    def row(self) -> str:
        vals = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            vals.append(repr(v) if isinstance(v, float) else str(v))
        return ",".join(vals)


def _eigenvalues(lambda1: float, gap: float, k: int) -> tuple:
    """Descending spike spectrum from lambda1 down to `gap`.

    `gap` is the smallest spike eigenvalue, i.e. the separation between the
    retained subspace and the isotropic noise floor (the quantity the
    gap-privatizing baseline's noise scale depends on); the k spike values
    interpolate linearly between lambda1 and gap.
    """
    if not 0.0 < gap <= lambda1:
        raise UsageError(f"need 0 < gap <= lambda1: lambda1={lambda1}, gap={gap}")
    if k == 1:
        return (lambda1,)
    return tuple(gap + (lambda1 - gap) * (k - 1 - i) / (k - 1) for i in range(k))


def _make_stream(cfg: ExperimentConfig, cell, seed: int) -> SampleStream:
    n, d, k, sigma, gap, eps = cell
    if cfg.generator == "spiked_rankk":
        return spiked_rankk(d, k, _eigenvalues(cfg.lambda1, gap, k), sigma, seed=seed)
    raise UsageError(f"unknown generator {cfg.generator!r}")


def _oracle_config(cfg: ExperimentConfig, alg: str, stream: SampleStream) -> dp_pca.OracleConfig:
    over = cfg.overrides.get(alg, {})
    kwargs = dict(model=stream.params)
    for key in ("B", "b_divisor", "tau", "K", "a", "gamma", "c1", "c_clip", "c_noise",
                "reuse_first_half", "theoretical_B", "autogrow_batch", "strict_histograms"):
        if key in over:
            kwargs[key] = over[key]
    return dp_pca.OracleConfig(**kwargs)


def run_cell(cfg: ExperimentConfig, alg: str, cell, trial: int) -> ResultRecord:
    n, d, k, sigma, gap, eps = cell
    seed = stable_seed(cfg.base_seed, alg, n, d, k, sigma, gap, eps, trial)
    stream = _make_stream(cfg, cell, stable_seed(seed, "stream"))
    rng = substream(seed, "algorithm")
    budget = PrivacyBudget(eps, cfg.delta)
    diag: dict = {}
    status = "ok"
    u = None
    t0 = time.perf_counter()
    try:
        if alg == "exact":
            u = dp_pca.k_dp_pca(stream.sample(n), k, budget,
                                dp_pca.OracleConfig(model=stream.params),
                                dp_pca.exact_epca_oracle(stream.params.sigma_matrix),
                                rng, diag=diag)
        elif alg in ("k-DP-PCA", "k-DP-Ojas"):
            ocfg = _oracle_config(cfg, alg, stream)
            oracle = dp_pca.modified_dp_pca if alg == "k-DP-PCA" else dp_pca.dp_ojas
            u = dp_pca.k_dp_pca(stream.sample(n), k, budget, ocfg, oracle, rng, diag=diag)
        else:
            clips = ClipThresholds.for_stream(
                d, cfg.lambda1, stream.params.noise_sigma, n,
                confidence=cfg.clip_confidence)
            batch = stream.sample(n)
            if alg == "DP-Gauss-1":
                u = baselines.dp_gauss_1(batch, k, budget, clips, rng)
            elif alg == "DP-Gauss-2":
                u = baselines.dp_gauss_2(batch, k, budget, clips, rng, diag=diag)
            elif alg == "DP-Power-Method":
                u = baselines.dp_power_method(batch, k, budget, clips, rng)
    except UsageError:
        raise
    except DpPcaError as exc:
        status = type(exc).__name__
    except RuntimeError as exc:
        status = f"failed:{exc}"
    ms = (time.perf_counter() - t0) * 1000.0
    if u is not None:
        rep = metrics.zeta_utility(u, stream.params.sigma_matrix, k)
    else:
        rep = metrics.UtilityReport(math.nan, math.nan, math.nan, math.nan, math.nan)
    return ResultRecord(
        generator=cfg.generator, algorithm=alg, n=n, d=d, k=k, sigma=sigma,
        gap=gap, epsilon=eps, delta=cfg.delta, trial=trial, seed=seed,
        zeta2=rep.zeta2, captured_energy=rep.captured_energy,
        optimal_energy=rep.optimal_energy, sine=rep.sine, frob_sq=rep.frob_sq,
        status=status, diag_retries=int(diag.get("retries", 0)),
        diag_bottoms=int(diag.get("bottoms", 0)), ms=ms)


def _task(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, threads: int = 1,
                   progress: bool = False) -> list:
    """Run the full sweep, write the CSV, and return all records in row order."""
    tasks = [(cfg, alg, cell, trial)
             for cell in cfg.cells()
             for alg in cfg.algorithms
             for trial in range(cfg.trials)]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            records = []
            for i, rec in enumerate(pool.map(_task, tasks, chunksize=1)):
                records.append(rec)
                if progress and (i + 1) % 25 == 0:
                    print(f"  {i + 1}/{len(tasks)} cells done", file=sys.stderr)
    else:
        records = []
        for i, t in enumerate(tasks):
            records.append(_task(t))
            if progress and (i + 1) % 25 == 0:
                print(f"  {i + 1}/{len(tasks)} cells done", file=sys.stderr)
    cell_order = {cell: i for i, cell in enumerate(cfg.cells())}
    alg_order = {alg: i for i, alg in enumerate(cfg.algorithms)}
    records.sort(key=lambda r: (cell_order[(r.n, r.d, r.k, r.sigma, r.gap, r.epsilon)],
                                alg_order.get(r.algorithm, -1), r.trial))
    write_csv(cfg.out, records)
    return records


def write_csv(path: str, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(rec.row() + "\n")


# ---------------------------------------------------------------------------
# config file parsing

_LIST_KEYS = {"algorithms", "n_grid", "d_grid", "k_grid", "sigma_grid",
              "gap_grid", "epsilon_grid"}
_INT_KEYS = {"trials", "base_seed"}
_FLOAT_KEYS = {"lambda1", "delta", "clip_confidence"}


def _coerce_scalar(raw: str):
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse the `key = value` config grammar.

    Lines are `key = value`; `#` starts a comment; lists are comma separated;
    a `[algorithm.NAME]` section collects per-algorithm overrides.
    """
    top: dict = {}
    section: dict | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name.startswith("algorithm."):
                raise UsageError(f"line {lineno}: unknown section [{name}]")
            section = top.setdefault("overrides", {}).setdefault(name[len("algorithm."):], {})
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected `key = value`")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if section is not None:
            section[key] = _coerce_scalar(raw)
        elif key in _LIST_KEYS:
            items = [p.strip() for p in raw.split(",") if p.strip()]
            if key == "algorithms":
                top[key] = tuple(items)
            elif key in ("n_grid", "d_grid", "k_grid"):
                top[key] = tuple(int(p) for p in items)
            else:
                top[key] = tuple(float(p) for p in items)
        elif key in _INT_KEYS:
            top[key] = int(raw)
        elif key in _FLOAT_KEYS:
            top[key] = float(raw)
        elif key in ("generator", "out"):
            top[key] = raw
        else:
            raise UsageError(f"line {lineno}: unknown key {key!r}")
    try:
        return ExperimentConfig(**top)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# presets

_PAPER_SCALE = dict(d_grid=(200,), k_grid=(2,), lambda1=10.0, epsilon_grid=(1.0,),
                    delta=0.01, trials=50,
                    overrides={"k-DP-PCA": {"b_divisor": 12}})
_N_GRID = tuple(1000 * 2 ** j for j in range(7))

_PRESETS = {
    # utility versus sample size at moderate noise
    "fig1a": dict(_PAPER_SCALE, n_grid=_N_GRID, sigma_grid=(0.025,), gap_grid=(5.0,)),
    # utility versus sample size in the low-noise regime
    "fig1b": dict(_PAPER_SCALE, n_grid=_N_GRID, sigma_grid=(0.001,), gap_grid=(5.0,)),
    # utility versus growing ambient dimension at fixed n
    "fig1c": dict(_PAPER_SCALE, n_grid=(16000,), d_grid=(50, 100, 200, 400),
                  sigma_grid=(0.025,), gap_grid=(5.0,)),
    # utility versus eigengap
    "fig2a": dict(_PAPER_SCALE, n_grid=(16000,), sigma_grid=(0.025,),
                  gap_grid=tuple(float(g) for g in range(1, 10))),
    # utility versus noise level
    "fig2b": dict(_PAPER_SCALE, n_grid=(16000,),
                  sigma_grid=(0.001, 0.005, 0.025, 0.1, 0.25), gap_grid=(5.0,)),
    # all five algorithms versus sample size at moderate noise
    "fig2c": dict(_PAPER_SCALE, n_grid=_N_GRID, sigma_grid=(0.025,), gap_grid=(5.0,)),
}


def preset(name: str) -> ExperimentConfig:
    if name not in _PRESETS:
        raise UsageError(f"unknown preset {name!r}; available: {', '.join(sorted(_PRESETS))}")
    return ExperimentConfig(out=f"{name}.csv", **_PRESETS[name])


# ---------------------------------------------------------------------------
# verification sweeps

def run_verification(instances: int = 1000, seed: int = 0, tol: float = 1e-9) -> bool:
    """Property-sweep the utility lemma checkers on random instances."""
    rng = substream(seed, "verify")
    ok = True
    worst = {"reduction": math.inf, "sin_to_epca": math.inf,
             "trace_vs_frobenius": math.inf, "eigengap": math.inf}
    for _ in range(instances):
        d = int(rng.integers(3, 12))
        k = int(rng.integers(1, d))
        g = rng.standard_normal((d, d))
        sigma = g @ g.T / d
        u = orthonormalize(rng.standard_normal((d, k)))
        worst["reduction"] = min(worst["reduction"], metrics.check_reduction_lemma(u, sigma, k).slack)
        worst["trace_vs_frobenius"] = min(worst["trace_vs_frobenius"],
                                          metrics.check_trace_vs_frobenius(u, sigma, k).slack)
        w = orthonormalize(rng.standard_normal((d, 1)))[:, 0]
        v = sym_eig(sigma).eigenvectors[:, 0]
        worst["sin_to_epca"] = min(worst["sin_to_epca"], metrics.check_sin_to_epca(w, v, sigma).slack)
        pairs = sym_eig(sigma)
        xi = float(rng.uniform(0.0, 0.2))
        t = math.sqrt(xi)
        vec = math.sqrt(max(0.0, 1 - t * t)) * pairs.eigenvectors[:, 0]
        if d > 1:
            vec = vec + t * pairs.eigenvectors[:, 1]
        vec = vec / np.linalg.norm(vec)
        wit = metrics.check_eigengap_perturbation(sigma, vec, xi)
        worst["eigengap"] = min(worst["eigengap"],
                                float(np.min(wit["shift_slacks"])), wit["gap_slack"])
    for name, slack in sorted(worst.items()):
        passed = slack >= -tol
        ok = ok and passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: worst slack {slack:.3e} over {instances} instances")
    return ok


# ---------------------------------------------------------------------------
# CLI

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="run a sweep from a config file or preset")
    p_run.add_argument("--config", help="path to a key = value config file")
    p_run.add_argument("--preset", help="named preset (see `bench presets`)")
    p_run.add_argument("--out", help="output CSV path (overrides config)")
    p_run.add_argument("--seed", type=int, help="base seed (overrides config)")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--trials", type=int, help="trial count (overrides config)")
    sub.add_parser("presets", help="list available presets")
    p_ver = sub.add_parser("verify", help="run the lemma-checker property sweeps")
    p_ver.add_argument("--instances", type=int, default=1000)
    p_ver.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if args.command == "presets":
        for name in sorted(_PRESETS):
            cfg = preset(name)
            print(f"{name}: generator={cfg.generator} n={list(cfg.n_grid)} d={list(cfg.d_grid)} "
                  f"sigma={list(cfg.sigma_grid)} gap={list(cfg.gap_grid)} trials={cfg.trials}")
        return 0
    if args.command == "verify":
        return 0 if run_verification(args.instances, args.seed) else 3
    if args.command == "run":
        try:
            if bool(args.config) == bool(args.preset):
                raise UsageError("exactly one of --config or --preset is required")
            if args.config:
                with open(args.config, "r", encoding="utf-8") as fh:
                    cfg = parse_config(fh.read())
            else:
                cfg = preset(args.preset)
            if args.out is not None:
                cfg = replace(cfg, out=args.out)
            if args.seed is not None:
                cfg = replace(cfg, base_seed=args.seed)
            if args.trials is not None:
                cfg = replace(cfg, trials=args.trials)
        except (UsageError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        records = run_experiment(cfg, threads=max(1, args.threads), progress=True)
        n_fail = sum(1 for r in records if r.status != "ok")
        print(f"wrote {len(records)} rows to {cfg.out} ({n_fail} failed cells)")
        return 0
    parser.print_help(sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
