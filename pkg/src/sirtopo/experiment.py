"""Resampled experiment driver: simulate, estimate, score, aggregate.

One experiment fixes a network, sweeps horizons and resamples, runs the
configured estimators on each simulated trajectory, and aggregates
sensitivity/specificity/probability-of-error per (method, horizon).
Child seeds derive deterministically from (master_seed, T, r), so a
rerun of the same config reproduces every file byte for byte; no
timestamps are written.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baseline_lr import estimate_topology_lr
from .errors import NumericalError, ValidationError
from .evaluate import (
    DegreeBreakdown,
    confusion,
    edge_frequency,
    per_degree_stats,
    roc,
    save_degree_csv,
    save_roc,
)
from .likelihood import build_indicators
from .model_select import AUTO_GLOBAL, AUTO_PER_NODE, lambda_grid, estimate_topology
from .netgen import GenSpec, Topology, save_topology
from .optimize import FitConfig
from .simulate import EpidemicParams, simulate

METHODS = ("sir-global", "sir-per-node", "lr")


@dataclass(frozen=True)
class GridParams:
    n_points: int = 30
    decades: float = 3.0


@dataclass(frozen=True)
class RocRequest:
    """Optional ROC sweep on one (horizon, resample) trajectory."""

    methods: tuple = ("sir", "lr")
    horizon: int = 1000
    resample: int = 0
    n_points: int = 30
    decades: float = 3.0


@dataclass(frozen=True)
class ExperimentConfig:
    network: GenSpec = field(default_factory=lambda: GenSpec(model="scale-free", p=200))
    params: EpidemicParams = field(
        default_factory=lambda: EpidemicParams(omega=0.273, alpha=0.250, gamma=0.100)
    )
    horizons: tuple = (1000,)
    n_resamples: int = 1
    init_infected: int = 40
    methods: tuple = ("sir-global",)
    grid: GridParams = field(default_factory=GridParams)
    fit: FitConfig = field(default_factory=FitConfig)
    master_seed: int = 0
    lr_lambda: float | None = None
    fix_initial_infected: bool = False
    warm_start: bool = True
    roc_request: RocRequest | None = None

    def __post_init__(self):
        if not self.horizons:
            raise ValidationError("horizons must be nonempty")
        if any(int(t) < 2 for t in self.horizons):
            raise ValidationError("every horizon must be >= 2")
        if self.n_resamples < 1:
            raise ValidationError(f"n_resamples must be >= 1, got {self.n_resamples}")
        for m in self.methods:
            if m not in METHODS:
                raise ValidationError(f"unknown method {m!r}; choose from {METHODS}")
        if not self.methods:
            raise ValidationError("methods must be nonempty")
        if "lr" in self.methods and self.lr_lambda is None:
            raise ValidationError(
                "method 'lr' needs lr_lambda (the baseline has no BIC rule)"
            )
        object.__setattr__(self, "horizons", tuple(int(t) for t in self.horizons))
        object.__setattr__(self, "methods", tuple(self.methods))


_CONFIG_KEYS = {
    "network", "params", "horizons", "n_resamples", "init_infected", "methods",
    "grid", "fit", "master_seed", "lr_lambda", "fix_initial_infected",
    "warm_start", "roc",
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from parsed JSON, rejecting unknown keys."""
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    if "network" in raw:
        kwargs["network"] = GenSpec(**raw["network"])
    if "params" in raw:
        kwargs["params"] = EpidemicParams(**raw["params"])
    if "grid" in raw:
        kwargs["grid"] = GridParams(**raw["grid"])
    if "fit" in raw:
        kwargs["fit"] = FitConfig(**raw["fit"])
    if "roc" in raw and raw["roc"] is not None:
        roc_raw = dict(raw["roc"])
        if "methods" in roc_raw:
            roc_raw["methods"] = tuple(roc_raw["methods"])
        kwargs["roc_request"] = RocRequest(**roc_raw)
    for key in (
        "horizons", "n_resamples", "init_infected", "methods", "master_seed",
        "lr_lambda", "fix_initial_infected", "warm_start",
    ):
        if key in raw:
            kwargs[key] = raw[key]
    if "methods" in kwargs:
        kwargs["methods"] = tuple(kwargs["methods"])
    if "horizons" in kwargs:
        kwargs["horizons"] = tuple(kwargs["horizons"])
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return config_from_dict(raw)


def child_seed(master_seed: int, T: int, r: int) -> int:
    """Deterministic per-(horizon, resample) seed."""
    ss = np.random.SeedSequence([int(master_seed), int(T), int(r)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class CellRecord:
    T: int
    resample: int
    method: str
    seed: int
    status: str  # "ok" or an error message
    stats: dict | None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    truth: Topology
    cells: list
    tables: list  # row dicts in tables.csv order
    freq: dict  # (method, T) -> p x p matrix
    degree: dict  # (method, T) -> DegreeBreakdown of resample-averaged rates
    roc_curves: dict  # (method, T) -> RocCurve
    seeds: dict  # (T, r) -> child seed


def _estimate(method, traj, cfg):
    if method == "lr":
        return estimate_topology_lr(traj, float(cfg.lr_lambda), cfg.fit.tol_zero)
    cache = build_indicators(traj)
    grid = lambda_grid(
        cache, cfg.params.omega, n_points=cfg.grid.n_points, decades=cfg.grid.decades
    )
    mode = AUTO_GLOBAL if method == "sir-global" else AUTO_PER_NODE
    est = estimate_topology(
        traj, cfg.params.omega, selection=mode, config=cfg.fit, grid=grid,
        warm_start=cfg.warm_start,
    )
    return est.adjacency


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the full sweep; per-cell failures are recorded, not raised."""
    truth = config.network.generate()
    p = truth.p
    if not 0 < config.init_infected <= p:
        raise ValidationError(
            f"init_infected must be in 1..{p}, got {config.init_infected}"
        )
    fixed_init = None
    if config.fix_initial_infected:
        rng = np.random.default_rng(np.random.SeedSequence([config.master_seed]))
        fixed_init = rng.choice(p, size=config.init_infected, replace=False)

    seeds: dict = {}
    seen = set()
    for T in config.horizons:
        for r in range(config.n_resamples):
            s = child_seed(config.master_seed, T, r)
            if s in seen:
                raise NumericalError(
                    f"child seed collision at (T={T}, r={r}); change master_seed"
                )
            seen.add(s)
            seeds[(T, r)] = s

    cells = []
    per_cell_rates: dict = {(m, T): [] for m in config.methods for T in config.horizons}
    estimates: dict = {(m, T): [] for m in config.methods for T in config.horizons}
    node_rates: dict = {
        (m, T): [np.zeros(p), np.zeros(p), np.zeros(p), 0]
        for m in config.methods
        for T in config.horizons
    }
    for T in config.horizons:
        for r in range(config.n_resamples):
            traj = simulate(
                truth,
                config.params,
                config.init_infected,
                T,
                seeds[(T, r)],
                init_infected_nodes=fixed_init,
            )
            for method in config.methods:
                try:
                    est = _estimate(method, traj, config)
                except (ValidationError, NumericalError) as exc:
                    cells.append(
                        CellRecord(T, r, method, seeds[(T, r)], f"error: {exc}", None)
                    )
                    continue
                stats = confusion(est, truth)
                cells.append(
                    CellRecord(T, r, method, seeds[(T, r)], "ok", stats.to_dict())
                )
                per_cell_rates[(method, T)].append(
                    (stats.sensitivity, stats.specificity, stats.prob_error)
                )
                estimates[(method, T)].append(est)
                pd = per_degree_stats(est, truth)
                acc = node_rates[(method, T)]
                acc[0] += pd.sens
                acc[1] += pd.spec
                acc[2] += pd.pe
                acc[3] += 1

    tables = []
    freq = {}
    degree = {}
    for method in config.methods:
        for T in config.horizons:
            rates = per_cell_rates[(method, T)]
            if rates:
                arr = np.array(rates)
                means = arr.mean(axis=0)
                sds = arr.std(axis=0, ddof=1) if len(rates) > 1 else np.zeros(3)
            else:
                means = np.full(3, np.nan)
                sds = np.full(3, np.nan)
            tables.append(
                {
                    "method": method,
                    "T": T,
                    "n_ok": len(rates),
                    "sens_mean": float(means[0]),
                    "sens_sd": float(sds[0]),
                    "spec_mean": float(means[1]),
                    "spec_sd": float(sds[1]),
                    "pe_mean": float(means[2]),
                    "pe_sd": float(sds[2]),
                }
            )
            if estimates[(method, T)]:
                freq[(method, T)] = edge_frequency(estimates[(method, T)])
                acc = node_rates[(method, T)]
                degree[(method, T)] = DegreeBreakdown(
                    degrees=truth.degrees(),
                    sens=acc[0] / acc[3],
                    spec=acc[1] / acc[3],
                    pe=acc[2] / acc[3],
                )

    roc_curves = {}
    req = config.roc_request
    if req is not None:
        T, r = int(req.horizon), int(req.resample)
        s = seeds.get((T, r), child_seed(config.master_seed, T, r))
        traj = simulate(
            truth, config.params, config.init_infected, T, s,
            init_infected_nodes=fixed_init,
        )
        for method in req.methods:
            if method == "sir":
                cache = build_indicators(traj)
                grid = lambda_grid(
                    cache, config.params.omega, n_points=req.n_points,
                    decades=req.decades,
                )
            else:
                from .baseline_lr import lambda_grid_lr

                grid = lambda_grid_lr(traj, n_points=req.n_points, decades=req.decades)
            roc_curves[(method, T)] = roc(
                traj, truth, method, grid, config.params.omega, config.fit
            )

    return ExperimentResult(
        config=config,
        truth=truth,
        cells=cells,
        tables=tables,
        freq=freq,
        degree=degree,
        roc_curves=roc_curves,
        seeds=seeds,
    )


def _config_echo(config: ExperimentConfig) -> dict:
    echo = {
        "network": asdict(config.network),
        "params": asdict(config.params),
        "horizons": list(config.horizons),
        "n_resamples": config.n_resamples,
        "init_infected": config.init_infected,
        "methods": list(config.methods),
        "grid": asdict(config.grid),
        "fit": asdict(config.fit),
        "master_seed": config.master_seed,
        "lr_lambda": config.lr_lambda,
        "fix_initial_infected": config.fix_initial_infected,
        "warm_start": config.warm_start,
    }
    if config.roc_request is not None:
        req = asdict(config.roc_request)
        req["methods"] = list(req["methods"])
        echo["roc"] = req
    return echo


def emit_reports(result: ExperimentResult, output_dir) -> None:
    """Write tables.csv, per-cell frequency/degree files, ROC CSVs and the
    run manifest into output_dir.  Reruns produce identical bytes."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    save_topology(result.truth, out / "truth_topology.csv")

    lines = ["method,T,sens_mean,sens_sd,spec_mean,spec_sd,pe_mean,pe_sd"]
    for row in result.tables:
        lines.append(
            "{method},{T},{sens_mean:.17g},{sens_sd:.17g},{spec_mean:.17g},"
            "{spec_sd:.17g},{pe_mean:.17g},{pe_sd:.17g}".format(**row)
        )
    (out / "tables.csv").write_text("\n".join(lines) + "\n")

    for (method, T), mat in sorted(result.freq.items()):
        np.savetxt(out / f"freq_{method}_T{T}.csv", mat, delimiter=",", fmt="%.17g")
    for (method, T), bd in sorted(result.degree.items()):
        save_degree_csv(bd, out / f"degree_{method}_T{T}.csv")
    for (method, T), curve in sorted(result.roc_curves.items()):
        save_roc(curve, out / f"roc_{method}_T{T}.csv")

    manifest = {
        "config": _config_echo(result.config),
        "versions": {"sirtopo": __version__, "numpy": np.__version__},
        "child_seeds": [
            {"T": T, "resample": r, "seed": s}
            for (T, r), s in sorted(result.seeds.items())
        ],
        "cells": [
            {
                "T": c.T,
                "resample": c.resample,
                "method": c.method,
                "status": c.status,
                "stats": c.stats,
            }
            for c in result.cells
        ],
        "n_failed_cells": sum(1 for c in result.cells if c.status != "ok"),
    }
    (out / "run-manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
