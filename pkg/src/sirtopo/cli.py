"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .baseline_lr import estimate_topology_lr, lambda_grid_lr
from .errors import NumericalError, ValidationError
from .evaluate import confusion, per_degree_stats, roc, save_degree_csv, save_roc
from .likelihood import build_indicators, save_theta_matrix
from .model_select import AUTO_GLOBAL, AUTO_PER_NODE, estimate_topology, lambda_grid
from .netgen import (
    GenSpec,
    load_topology,
    save_topology,
)
from .optimize import FitConfig, PriorConstraints
from .simulate import EpidemicParams, load_trajectory, save_trajectory, simulate
from .experiment import emit_reports, load_config, run_experiment


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="sirtopo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_gen = sub.add_parser("gen", help="generate a synthetic contact network")
    p_gen.add_argument("--model", required=True, choices=["scale-free", "small-world"])
    p_gen.add_argument("--nodes", required=True, type=int)
    p_gen.add_argument("--exponent", type=float, default=2.2,
                       help="power-law exponent (scale-free)")
    p_gen.add_argument("--k", type=int, default=4,
                       help="mean degree of the ring lattice (small-world)")
    p_gen.add_argument("--rewire", type=float, default=0.1,
                       help="rewiring probability (small-world)")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="simulate an epidemic trajectory")
    p_sim.add_argument("--topo", required=True)
    p_sim.add_argument("--omega", type=float, default=0.273)
    p_sim.add_argument("--alpha", type=float, default=0.250)
    p_sim.add_argument("--gamma", type=float, default=0.100)
    p_sim.add_argument("--horizon", required=True, type=int)
    p_sim.add_argument("--init-infected", type=int, default=40)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)

    p_fit = sub.add_parser("fit", help="estimate the topology from a trajectory")
    p_fit.add_argument("--traj", required=True)
    p_fit.add_argument("--omega", type=float, default=0.273)
    p_fit.add_argument("--lambda", dest="lam", required=True,
                       help="penalty value, or auto-bic / auto-bic-per-node")
    p_fit.add_argument("--priors", default=None,
                       help="JSON file with known_edges / known_non_edges pair lists")
    p_fit.add_argument("--grid-points", type=int, default=30,
                       help="penalty grid size for the auto modes")
    p_fit.add_argument("--cold-start", action="store_true",
                       help="refit from zero at every grid penalty")
    p_fit.add_argument("--out-theta", required=True)
    p_fit.add_argument("--out-edges", required=True)
    p_fit.add_argument("--report", required=True)

    p_lr = sub.add_parser("baseline-lr", help="logistic-regression baseline estimate")
    p_lr.add_argument("--traj", required=True)
    p_lr.add_argument("--lambda", dest="lam", required=True, type=float)
    p_lr.add_argument("--out-edges", required=True)

    p_eval = sub.add_parser("eval", help="score an estimate against ground truth")
    p_eval.add_argument("--est", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--degree", default=None,
                        help="also write per-degree stats to this CSV")

    p_roc = sub.add_parser("roc", help="ROC sweep over the penalty grid")
    p_roc.add_argument("--traj", required=True)
    p_roc.add_argument("--truth", required=True)
    p_roc.add_argument("--method", required=True, choices=["sir", "lr"])
    p_roc.add_argument("--omega", type=float, default=0.273)
    p_roc.add_argument("--grid-points", type=int, default=30)
    p_roc.add_argument("--out", required=True)

    p_exp = sub.add_parser("experiment", help="run a resampled experiment from JSON")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", required=True)

    return parser


def _load_priors(path) -> PriorConstraints:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid priors JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: priors must be a JSON object")
    unknown = set(raw) - {"known_edges", "known_non_edges"}
    if unknown:
        raise ValidationError(f"{path}: unknown priors keys {sorted(unknown)}")

    def pairs(key):
        out = []
        for item in raw.get(key, []):
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ValidationError(f"{path}: {key} entries must be [i, j] pairs")
            out.append((int(item[0]), int(item[1])))
        return frozenset(out)

    return PriorConstraints(
        known_edges=pairs("known_edges"), known_non_edges=pairs("known_non_edges")
    )


def _cmd_gen(args) -> None:
    spec = GenSpec(
        model=args.model,
        p=args.nodes,
        exponent=args.exponent,
        mean_degree_k=args.k,
        rewire_p=args.rewire,
        seed=args.seed,
    )
    save_topology(spec.generate(), args.out)


def _cmd_simulate(args) -> None:
    topo = load_topology(args.topo)
    params = EpidemicParams(omega=args.omega, alpha=args.alpha, gamma=args.gamma)
    traj = simulate(topo, params, args.init_infected, args.horizon, args.seed)
    save_trajectory(traj, args.out)


def _cmd_fit(args) -> None:
    traj = load_trajectory(args.traj)
    priors = _load_priors(args.priors) if args.priors else None
    if args.lam == "auto-bic":
        selection = AUTO_GLOBAL
    elif args.lam == "auto-bic-per-node":
        selection = AUTO_PER_NODE
    else:
        try:
            selection = float(args.lam)
        except ValueError:
            raise ValidationError(
                f"--lambda must be a number, auto-bic or auto-bic-per-node, "
                f"got {args.lam!r}"
            ) from None
    grid = None
    if isinstance(selection, str):
        cache = build_indicators(traj)
        grid = lambda_grid(cache, args.omega, n_points=args.grid_points)
    est = estimate_topology(
        traj,
        args.omega,
        selection=selection,
        priors=priors,
        grid=grid,
        warm_start=not args.cold_start,
    )
    save_theta_matrix(est.theta, args.out_theta)
    save_topology(est.adjacency, args.out_edges)
    with open(args.report, "w") as fh:
        json.dump(est.report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_baseline_lr(args) -> None:
    traj = load_trajectory(args.traj)
    est = estimate_topology_lr(traj, args.lam)
    save_topology(est, args.out_edges)


def _cmd_eval(args) -> None:
    est = load_topology(args.est)
    truth = load_topology(args.truth)
    stats = confusion(est, truth)
    with open(args.out, "w") as fh:
        json.dump(stats.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.degree:
        save_degree_csv(per_degree_stats(est, truth), args.degree)


def _cmd_roc(args) -> None:
    traj = load_trajectory(args.traj)
    truth = load_topology(args.truth)
    if args.method == "sir":
        cache = build_indicators(traj)
        grid = lambda_grid(cache, args.omega, n_points=args.grid_points)
    else:
        grid = lambda_grid_lr(traj, n_points=args.grid_points)
    curve = roc(traj, truth, args.method, grid, args.omega, FitConfig())
    save_roc(curve, args.out)


def _cmd_experiment(args) -> None:
    config = load_config(args.config)
    result = run_experiment(config)
    emit_reports(result, args.out)


_COMMANDS = {
    "gen": _cmd_gen,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "baseline-lr": _cmd_baseline_lr,
    "eval": _cmd_eval,
    "roc": _cmd_roc,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        target = getattr(exc, "filename", None)
        where = f" ({target})" if target else ""
        print(f"i/o error{where}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
