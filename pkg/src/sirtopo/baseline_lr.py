"""l1-regularized logistic regression baseline on binarized transitions.

The comparison method regresses, per focal node, the indicator of a
susceptible-to-infected transition on the infected indicators of all
other nodes (rows restricted to times where the focal node was
susceptible), with an unpenalized intercept.  Coefficients carry no sign
or box constraint; a node's estimated neighborhood is the set of
coefficients with magnitude above tol_zero, symmetrized by the union
rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model_select import LambdaGrid
from .netgen import Topology
from .simulate import INFECTED, SUSCEPTIBLE, Trajectory

# Coefficient magnitude cap; hitting it flags the fit as saturated
# (perfect separation would otherwise diverge).
COEF_CAP = 50.0

_N_SWEEPS = 1000
_TOL_OBJ = 1e-8


@dataclass(frozen=True)
class LrDataset:
    """Design matrix for one focal node.

    ``X`` has one row per time the focal node was susceptible; columns
    are the infected indicators of the other p-1 nodes (ascending index)
    plus a trailing constant-1 intercept column.  ``y`` is 1 where the
    focal node became infected at the next step.
    """

    node: int
    p: int
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ValidationError(
                f"X must have p={self.p} columns (features plus intercept), "
                f"got shape {X.shape}"
            )
        if y.shape != (X.shape[0],):
            raise ValidationError("y length must match X rows")
        if not np.isin(X, (0.0, 1.0)).all():
            raise ValidationError("features must be 0/1")
        if X.shape[0] and not (X[:, -1] == 1.0).all():
            raise ValidationError("last column must be the constant intercept")
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValidationError("labels must be 0/1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class LrModel:
    """Fitted coefficients: ``coefficients[m]`` matches the m-th other node."""

    coefficients: np.ndarray
    intercept: float
    converged: bool
    saturated: bool
    n_sweeps: int


def binarize(traj: Trajectory, i: int) -> LrDataset:
    """Extract the focal node's transition rows from a trajectory."""
    if not 0 <= i < traj.p:
        raise ValidationError(f"node {i} out of range for p={traj.p}")
    st = traj.states
    rows = np.flatnonzero(st[i, :-1] == SUSCEPTIBLE)
    others = np.delete(np.arange(traj.p), i)
    feats = (st[others][:, rows] == INFECTED).T.astype(np.float64)
    X = np.hstack([feats, np.ones((rows.size, 1))])
    y = (st[i, rows + 1] == INFECTED).astype(np.float64)
    return LrDataset(node=i, p=traj.p, X=X, y=y)


def _objective(f, t, lam, w_pen):
    return float(np.logaddexp(0.0, -t * f).sum() + lam * np.abs(w_pen).sum())


def fit_l1_logistic(
    data: LrDataset, lam: float, start: LrModel | None = None
) -> LrModel:
    """Coordinate descent on the penalized logistic loss.

    Each coordinate takes a soft-thresholded step with the fixed
    curvature bound 0.25 * sum(x_j**2); the intercept column is
    unpenalized.  Stops when the objective's relative change over a full
    sweep drops below 1e-8 (absolute below an objective of 1), or after
    1000 sweeps.  All coefficients are capped at +/-COEF_CAP; a binding
    cap marks the model saturated.
    """
    if lam < 0:
        raise ValidationError(f"lam must be >= 0, got {lam}")
    d = data.p  # feature count including intercept
    if data.n_rows == 0:
        return LrModel(
            coefficients=np.zeros(d - 1),
            intercept=0.0,
            converged=True,
            saturated=False,
            n_sweeps=0,
        )
    X = data.X
    t = 2.0 * data.y - 1.0
    M = 0.25 * (X * X).sum(axis=0)
    pen = np.full(d, lam)
    pen[-1] = 0.0  # intercept
    w = np.zeros(d)
    if start is not None:
        w[:-1] = start.coefficients
        w[-1] = start.intercept
    f = X @ w
    obj = _objective(f, t, lam, w[:-1])
    converged = False
    sweeps = 0
    for sweeps in range(1, _N_SWEEPS + 1):
        for j in range(d):
            if M[j] == 0.0:
                continue
            with np.errstate(over="ignore"):  # exp overflow -> sig 0, correct limit
                sig = 1.0 / (1.0 + np.exp(t * f))  # sigma(-t*f)
            g = -(X[:, j] * t * sig).sum()
            v = w[j] - g / M[j]
            thr = pen[j] / M[j]
            new = np.clip(np.sign(v) * max(abs(v) - thr, 0.0), -COEF_CAP, COEF_CAP)
            if new != w[j]:
                f += (new - w[j]) * X[:, j]
                w[j] = new
        new_obj = _objective(f, t, lam, w[:-1])
        if abs(new_obj - obj) < _TOL_OBJ * max(abs(obj), 1.0):
            obj = new_obj
            converged = True
            break
        obj = new_obj
    saturated = bool((np.abs(w) >= COEF_CAP).any())
    return LrModel(
        coefficients=w[:-1].copy(),
        intercept=float(w[-1]),
        converged=converged,
        saturated=saturated,
        n_sweeps=sweeps,
    )


def lr_lambda_max(data: LrDataset) -> float:
    """Smallest penalty at which every (non-intercept) coefficient is zero.

    Computed from the feature gradients at the intercept-only optimum.
    """
    if data.n_rows == 0:
        return 0.0
    ybar = float(data.y.mean())
    if ybar in (0.0, 1.0):
        # Intercept alone fits perfectly; any penalty keeps features out.
        return 0.0
    resid = data.y - ybar
    g = data.X[:, :-1].T @ resid
    return float(np.abs(g).max(initial=0.0))


def lambda_grid_lr(
    traj: Trajectory, n_points: int = 30, decades: float = 3.0
) -> LambdaGrid:
    """Penalty grid for the baseline: three decades below the largest
    per-node path maximum, plus a ceiling that forces the empty fit."""
    lam_max = max(lr_lambda_max(binarize(traj, i)) for i in range(traj.p))
    if lam_max <= 0:
        lam_max = 1.0
    values = np.logspace(np.log10(lam_max), np.log10(lam_max) - decades, n_points)
    ceiling = 1.01 * lam_max
    return LambdaGrid(values=np.concatenate(([ceiling], values)))


def support_path(
    traj: Trajectory, grid: LambdaGrid, tol_zero: float = 1e-8
) -> np.ndarray:
    """Directed supports |beta| > tol_zero over the grid, warm-started.

    Returns a (n_lambda, p, p) boolean array; entry [l, i, j] says node
    j entered node i's fit at grid.values[l].
    """
    p = traj.p
    out = np.zeros((len(grid), p, p), dtype=bool)
    others = [np.delete(np.arange(p), i) for i in range(p)]
    for i in range(p):
        data = binarize(traj, i)
        model = None
        for li, lam in enumerate(grid.values):
            model = fit_l1_logistic(data, float(lam), start=model)
            out[li, i, others[i]] = np.abs(model.coefficients) > tol_zero
    return out


def estimate_topology_lr(
    traj: Trajectory, lam: float, tol_zero: float = 1e-8
) -> Topology:
    """Per-node l1-logistic fits, thresholded and union-symmetrized."""
    p = traj.p
    directed = np.zeros((p, p), dtype=bool)
    for i in range(p):
        model = fit_l1_logistic(binarize(traj, i), lam)
        others = np.delete(np.arange(p), i)
        directed[i, others] = np.abs(model.coefficients) > tol_zero
    adj = (directed | directed.T).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return Topology(p=p, adjacency=adj)
