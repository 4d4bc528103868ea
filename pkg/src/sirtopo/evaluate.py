"""Scoring of estimated topologies against ground truth.

All pair-level metrics use unordered off-diagonal pairs {i, j}, i < j:
ground truth is undirected and estimates are symmetrized before they
reach this module.  Empty-denominator conventions: sensitivity is 1
when there are no true edges, specificity is 1 when there are no
non-edges (and the per-node variants follow the same rule for degree-0
and degree-(p-1) nodes).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .baseline_lr import support_path
from .errors import NumericalError, ValidationError
from .likelihood import build_indicators
from .model_select import LambdaGrid
from .netgen import Topology
from .optimize import FitConfig, fit_all
from .simulate import Trajectory


@dataclass(frozen=True)
class DetectionStats:
    """Confusion counts over unordered node pairs."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def sensitivity(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 1.0

    @property
    def specificity(self) -> float:
        denom = self.tn + self.fp
        return self.tn / denom if denom else 1.0

    @property
    def prob_error(self) -> float:
        total = self.tp + self.fp + self.tn + self.fn
        return (self.fp + self.fn) / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "prob_error": self.prob_error,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


def confusion(estimated: Topology, truth: Topology) -> DetectionStats:
    """Pairwise confusion of an estimated adjacency against the truth."""
    if estimated.p != truth.p:
        raise ValidationError(
            f"node counts differ: estimated {estimated.p}, truth {truth.p}"
        )
    iu = np.triu_indices(truth.p, k=1)
    est = estimated.adjacency[iu].astype(bool)
    tru = truth.adjacency[iu].astype(bool)
    return DetectionStats(
        tp=int(np.count_nonzero(est & tru)),
        fp=int(np.count_nonzero(est & ~tru)),
        tn=int(np.count_nonzero(~est & ~tru)),
        fn=int(np.count_nonzero(~est & tru)),
    )


@dataclass(frozen=True)
class RocCurve:
    """Operating points (lambda, fpr, tpr), lambda strictly descending."""

    lambdas: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        fpr = np.asarray(self.fpr, dtype=np.float64)
        tpr = np.asarray(self.tpr, dtype=np.float64)
        if not lam.size or lam.shape != fpr.shape or lam.shape != tpr.shape:
            raise ValidationError("lambdas/fpr/tpr must be nonempty, same length")
        if (np.diff(lam) >= 0).any():
            raise ValidationError("lambdas must be strictly descending")
        for name, arr in (("fpr", fpr), ("tpr", tpr)):
            if (arr < 0).any() or (arr > 1).any():
                raise ValidationError(f"{name} values must lie in [0, 1]")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "fpr", fpr)
        object.__setattr__(self, "tpr", tpr)

    def tpr_at(self, fpr_target: float) -> float:
        """Linear interpolation of the achieved operating points.

        Points are sorted by fpr; at a repeated fpr the best (largest)
        tpr is kept.  Outside the achieved range the endpoint value is
        returned.
        """
        order = np.lexsort((self.tpr, self.fpr))
        fs, ts = self.fpr[order], self.tpr[order]
        keep_f, keep_t = [], []
        for f, t in zip(fs, ts):
            if keep_f and f == keep_f[-1]:
                keep_t[-1] = max(keep_t[-1], t)
            else:
                keep_f.append(f)
                keep_t.append(t)
        return float(np.interp(fpr_target, keep_f, keep_t))


def roc(
    traj: Trajectory,
    truth: Topology,
    method: str,
    grid: LambdaGrid,
    omega: float,
    config: FitConfig | None = None,
) -> RocCurve:
    """Sweep the penalty grid at fixed lambda (no BIC) and score each point.

    ``method`` is "sir" (the penalized likelihood solver) or "lr" (the
    logistic baseline).  Grid points whose fit fails numerically are
    dropped with a warning.
    """
    if traj.p != truth.p:
        raise ValidationError(f"node counts differ: traj {traj.p}, truth {truth.p}")
    config = config or FitConfig()
    lams, fprs, tprs = [], [], []
    if method == "sir":
        cache = build_indicators(traj)
        theta_prev = None
        for lam in grid.values:
            try:
                res = fit_all(
                    cache, replace(config, lam=float(lam)), None, omega,
                    theta0=theta_prev,
                )
            except NumericalError as exc:
                warnings.warn(f"dropping ROC point lambda={lam:g}: {exc}")
                continue
            theta_prev = res.theta
            est = _support_topology(res.theta < -config.tol_zero)
            _append_point(lams, fprs, tprs, lam, est, truth)
    elif method == "lr":
        supports = support_path(traj, grid, config.tol_zero)
        for lam, sup in zip(grid.values, supports):
            est = _support_topology(sup)
            _append_point(lams, fprs, tprs, lam, est, truth)
    else:
        raise ValidationError(f"method must be 'sir' or 'lr', got {method!r}")
    if not lams:
        raise NumericalError("all ROC grid points failed")
    return RocCurve(
        lambdas=np.array(lams), fpr=np.array(fprs), tpr=np.array(tprs)
    )


def _support_topology(directed: np.ndarray) -> Topology:
    adj = (directed | directed.T).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return Topology(p=adj.shape[0], adjacency=adj)


def _append_point(lams, fprs, tprs, lam, est, truth):
    stats = confusion(est, truth)
    denom_n = stats.tn + stats.fp
    fpr = stats.fp / denom_n if denom_n else 0.0
    lams.append(float(lam))
    fprs.append(fpr)
    tprs.append(stats.sensitivity)


def save_roc(curve: RocCurve, path) -> None:
    lines = ["lambda,fpr,tpr"]
    for lam, f, t in zip(curve.lambdas, curve.fpr, curve.tpr):
        lines.append(f"{lam:.17g},{f:.17g},{t:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class DegreeBreakdown:
    """Per-node neighborhood detection rates, grouped by true degree."""

    degrees: np.ndarray
    sens: np.ndarray
    spec: np.ndarray
    pe: np.ndarray

    def grouped(self) -> list[tuple[int, int, float, float, float]]:
        """Rows (degree, n_nodes, mean sens, mean spec, mean pe)."""
        rows = []
        for d in np.unique(self.degrees):
            sel = self.degrees == d
            rows.append(
                (
                    int(d),
                    int(np.count_nonzero(sel)),
                    float(self.sens[sel].mean()),
                    float(self.spec[sel].mean()),
                    float(self.pe[sel].mean()),
                )
            )
        return rows


def per_degree_stats(estimated: Topology, truth: Topology) -> DegreeBreakdown:
    """Neighborhood-level confusion per node, for grouping by true degree."""
    if estimated.p != truth.p:
        raise ValidationError(
            f"node counts differ: estimated {estimated.p}, truth {truth.p}"
        )
    p = truth.p
    est = estimated.adjacency.astype(bool)
    tru = truth.adjacency.astype(bool)
    tp = (est & tru).sum(axis=1)
    fp = (est & ~tru).sum(axis=1)  # diagonal contributes nothing: est diag False
    fn = (~est & tru).sum(axis=1)
    deg = tru.sum(axis=1)
    n_non = (p - 1) - deg
    tn = n_non - fp
    with np.errstate(invalid="ignore", divide="ignore"):
        sens = np.where(deg > 0, tp / np.maximum(deg, 1), 1.0)
        spec = np.where(n_non > 0, tn / np.maximum(n_non, 1), 1.0)
    pe = (fp + fn) / (p - 1) if p > 1 else np.zeros(p)
    return DegreeBreakdown(
        degrees=deg.astype(np.int64),
        sens=sens.astype(np.float64),
        spec=spec.astype(np.float64),
        pe=pe.astype(np.float64),
    )


def save_degree_csv(breakdown: DegreeBreakdown, path) -> None:
    lines = ["degree,n_nodes,sens,spec,pe"]
    for d, n, s, sp, pe in breakdown.grouped():
        lines.append(f"{d},{n},{s:.17g},{sp:.17g},{pe:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def edge_frequency(estimates: list[Topology]) -> np.ndarray:
    """Fraction of estimates containing each edge; symmetric, zero diagonal."""
    if not estimates:
        raise ValidationError("need at least one estimate")
    p = estimates[0].p
    for est in estimates:
        if est.p != p:
            raise ValidationError("estimates have mismatched node counts")
    acc = np.zeros((p, p), dtype=np.float64)
    for est in estimates:
        acc += est.adjacency
    return acc / len(estimates)
