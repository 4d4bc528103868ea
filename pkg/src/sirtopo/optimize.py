"""Per-node l1-penalized box-constrained fits and the symmetrized estimate.

The solver follows the majorize-and-threshold scheme: at each outer
iteration the Hessian is replaced by its Perron-Frobenius row-sum bound
alpha, every coordinate gets the closed-form soft-threshold/clip update,
and a backtracking line search picks the step size.  A full-quadratic
subproblem mode (cyclic coordinate minimization on the exact quadratic
model) is kept for cross-checking the surrogate path.

All nodes are fitted in one batch: the per-iteration work is three
matrix products over the shared infected-indicator matrix, so one
process handles the full network without per-node Python loops.

Step acceptance inside the fit loop tests sufficient decrease of the
penalized objective (gradient-key term g'delta plus the penalty change),
which guarantees monotone descent and convergence to the subproblem's
fixed point.  The standalone :func:`line_search` helper implements the
plain likelihood-only Armijo rule with the same constants.

At the cold start every infection term sits on the floored log, where
the objective is flat but the clamped gradient and curvature explode;
the quadratic model then proposes steps too small for any certified
descent.  Rows caught there take one closed-form escape move (the exact
one-dimensional minimizer of each clamped coordinate) accepted on plain
strict decrease, after which the regular loop proceeds from an interior
point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .likelihood import (
    EPS_FLOOR,
    IndicatorCache,
    ThetaVector,
    gradient,
    hessian,
    neg_loglik,
)
from .netgen import Topology

# Surrogate curvature floor; reproduces the correct zero-curvature limit
# (all coordinates with nonpositive gradient snap to 0).
_ALPHA_FLOOR = 1e-12

# Steps smaller than this are treated as a fixed point of the subproblem.
_STEP_ATOL = 1e-15

# A coordinate still this close to zero counts as unfitted when deciding
# whether an infection term sits on the clamp plateau of the objective.
_CLAMP_S = 1e-6

# Certified model decreases below this (relative) scale mean the iterate
# is a numerical fixed point even when no further float-representable
# descent step exists.
_DEC_RTOL = 1e-10

_SUBPROBLEM_MODES = ("diagonal-surrogate", "full-quadratic")


@dataclass(frozen=True)
class FitConfig:
    """Solver settings for one penalized fit.

    ``lam`` is the l1 penalty weight.  ``subproblem`` chooses between
    the diagonal surrogate (default) and the full quadratic model.
    """

    lam: float = 0.0
    max_outer_iters: int = 500
    tol_obj: float = 1e-6
    tol_zero: float = 1e-8
    armijo_c: float = 0.2
    backtrack_rho: float = 0.3
    max_backtracks: int = 50
    subproblem: str = "diagonal-surrogate"

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValidationError(f"armijo_c must be in (0, 1), got {self.armijo_c}")
        if not 0.0 < self.backtrack_rho < 1.0:
            raise ValidationError(
                f"backtrack_rho must be in (0, 1), got {self.backtrack_rho}"
            )
        if self.max_outer_iters < 1 or self.max_backtracks < 1:
            raise ValidationError("iteration caps must be >= 1")
        if self.subproblem not in _SUBPROBLEM_MODES:
            raise ValidationError(
                f"subproblem must be one of {_SUBPROBLEM_MODES}, got {self.subproblem!r}"
            )


@dataclass(frozen=True)
class PriorConstraints:
    """Coordinate pins from prior knowledge.

    ``known_edges``: ordered pairs (i, j) with theta_{i,j} fixed at
    log(1-omega).  ``known_non_edges``: ordered pairs fixed at 0.
    """

    known_edges: frozenset = field(default_factory=frozenset)
    known_non_edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        ke = frozenset((int(i), int(j)) for i, j in self.known_edges)
        kn = frozenset((int(i), int(j)) for i, j in self.known_non_edges)
        if ke & kn:
            raise ValidationError("known_edges and known_non_edges overlap")
        for i, j in ke | kn:
            if i == j:
                raise ValidationError(f"prior pair ({i}, {i}) pins a self-edge")
        object.__setattr__(self, "known_edges", ke)
        object.__setattr__(self, "known_non_edges", kn)

    @classmethod
    def empty(cls) -> "PriorConstraints":
        return cls()


@dataclass(frozen=True)
class NodeFitReport:
    node: int
    iterations: int
    objective: float
    converged: bool
    stalled: bool
    support_size: int

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "iterations": self.iterations,
            "objective": self.objective,
            "converged": self.converged,
            "stalled": self.stalled,
            "support_size": self.support_size,
        }


@dataclass(frozen=True)
class NodeFit:
    theta: ThetaVector
    report: NodeFitReport


@dataclass(frozen=True)
class FitResult:
    theta: np.ndarray
    reports: list

    def all_converged(self) -> bool:
        return all(r.converged for r in self.reports)


def _coord_closed_form(cur, g, alpha, lam, lo):
    """Soft-threshold/clip coordinate minimizer; works on arrays."""
    v = cur - g / alpha
    t = lam / alpha
    w = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    return np.clip(w, lo, 0.0)


def coordinate_update(
    theta_cur: float, g: float, alpha_sur: float, lam: float, omega: float
) -> float:
    """Closed-form coordinate minimizer of the surrogate model.

    Minimizes 0.5*alpha_sur*(x - theta_cur)**2 + g*(x - theta_cur)
    + lam*|x| over x in [log(1-omega), 0]: soft-threshold the unconstrained
    minimizer by lam/alpha_sur, then clip to the box.
    """
    if alpha_sur <= 0:
        raise ValidationError(f"alpha_sur must be > 0, got {alpha_sur}")
    if lam < 0:
        raise ValidationError(f"lam must be >= 0, got {lam}")
    lo = float(np.log1p(-omega))
    if not lo - 1e-9 <= theta_cur <= 1e-9:
        raise ValidationError(f"theta_cur={theta_cur} outside the box [{lo}, 0]")
    return float(_coord_closed_form(theta_cur, g, alpha_sur, lam, lo))


def solve_quadratic_subproblem(
    theta_hat: ThetaVector,
    g: np.ndarray,
    H_or_alpha,
    lam: float,
    omega: float,
) -> np.ndarray:
    """Step direction minimizing the local quadratic model plus penalty.

    With a scalar curvature the problem is separable and each coordinate
    uses :func:`coordinate_update` independently.  With a full (PSD)
    Hessian, cyclic coordinate minimization is run on the quadratic
    model until the iterate moves by less than 1e-8 relative.  Either
    way the returned vector is new_theta - theta_hat.values.
    """
    base = theta_hat.values
    g = np.asarray(g, dtype=np.float64)
    if g.shape != base.shape:
        raise ValidationError(f"gradient shape {g.shape} != theta shape {base.shape}")
    lo = theta_hat.box_lower
    if np.isscalar(H_or_alpha) or np.ndim(H_or_alpha) == 0:
        alpha = float(H_or_alpha)
        if alpha <= 0:
            raise ValidationError(f"surrogate curvature must be > 0, got {alpha}")
        return _coord_closed_form(base, g, alpha, lam, lo) - base
    H = np.asarray(H_or_alpha, dtype=np.float64)
    d = base.size
    if H.shape != (d, d):
        raise ValidationError(f"H shape {H.shape} does not match dimension {d}")
    if not np.allclose(H, H.T, rtol=1e-8, atol=1e-10):
        raise ValidationError("H must be symmetric")
    # Fallback curvature for flat coordinates: the row-sum bound again.
    fallback = max(float(np.abs(H).sum(axis=1).max(initial=0.0)), _ALPHA_FLOOR)
    diag = H.diagonal()
    u = base.copy()
    for _ in range(10_000):
        u_prev = u.copy()
        for j in range(d):
            gj = g[j] + H[j] @ (u - base)
            aj = diag[j] if diag[j] > 0 else fallback
            u[j] = _coord_closed_form(u[j], gj, aj, lam, lo)
        if np.abs(u - u_prev).max() < 1e-8 * max(1.0, np.abs(u).max()):
            break
    return u - base


def line_search(
    theta_hat: ThetaVector,
    delta: np.ndarray,
    cache: IndicatorCache,
    g: np.ndarray,
    config: FitConfig,
) -> float:
    """Backtracking Armijo search on the unpenalized negative log-likelihood.

    Returns the largest eps in {1, rho, rho**2, ...} with
    F(theta + eps*delta) <= F(theta) + c*eps*g'delta, or 0.0 when
    max_backtracks trials all fail (stall).
    """
    delta = np.asarray(delta, dtype=np.float64)
    if not delta.any():
        raise ValidationError("delta must be nonzero")
    f0 = neg_loglik(theta_hat, cache)
    slope = float(g @ delta)
    eps = 1.0
    for _ in range(config.max_backtracks):
        trial = ThetaVector(
            node=theta_hat.node,
            values=np.clip(theta_hat.values + eps * delta, theta_hat.box_lower, 0.0),
            omega=theta_hat.omega,
        )
        if neg_loglik(trial, cache) <= f0 + config.armijo_c * eps * slope:
            return eps
        eps *= config.backtrack_rho
    return 0.0


def _pin_arrays(nodes, p, priors, omega):
    """Pin mask/values for a batch of focal-node rows (self column included)."""
    n = len(nodes)
    lo = float(np.log1p(-omega))
    mask = np.zeros((n, p), dtype=bool)
    vals = np.zeros((n, p), dtype=np.float64)
    pos = {int(i): r for r, i in enumerate(nodes)}
    for r, i in enumerate(nodes):
        mask[r, i] = True
    if priors is not None:
        for i, j in priors.known_edges:
            if not (0 <= i < p and 0 <= j < p):
                raise ValidationError(f"prior pair ({i}, {j}) out of range for p={p}")
            if i in pos:
                mask[pos[i], j] = True
                vals[pos[i], j] = lo
        for i, j in priors.known_non_edges:
            if not (0 <= i < p and 0 <= j < p):
                raise ValidationError(f"prior pair ({i}, {j}) out of range for p={p}")
            if i in pos:
                mask[pos[i], j] = True
                vals[pos[i], j] = 0.0
    return mask, vals


def _escape_clamp_plateau(
    rows_bad, Theta, S, F_ll, F_pen,
    A, B, Z, A_cnt, others_cnt, pin_mask, pin_vals,
    lam, lo, config, ll_rows,
):
    """Move rows stuck on the clamp plateau of the objective.

    Near theta = 0 every infection term sits on the floored log, so the
    objective is locally flat while the clamped gradient and curvature
    are astronomically large; Armijo backtracking can then never certify
    a step.  For exactly those rows, each still-unfitted coordinate j
    gets its exact one-dimensional minimizer from the origin,
    -log(1 + c_j / (a_j + lam)) with c_j the co-infection count and a_j
    the stay-susceptible exposure count, and the joint move is accepted
    on strict decrease of the penalized objective (geometric backoff).
    Returns a bool mask over ``rows_bad``: True when the row moved.
    """
    escaped = np.zeros(rows_bad.size, dtype=bool)
    S_bad = S[rows_bad]
    plateau = (B[rows_bad] > 0) & (S_bad > -_CLAMP_S) & (others_cnt[rows_bad] >= 1)
    cand = np.flatnonzero(plateau.any(axis=1))
    if cand.size == 0:
        return escaped
    r = rows_bad[cand]
    cc = plateau[cand].astype(np.float64) @ Z.T
    with np.errstate(divide="ignore"):
        prop = -np.log1p(cc / np.maximum(A_cnt[r] + lam, 1e-300))
    prop = np.clip(prop, lo, 0.0)
    movable = (cc > 0) & (np.abs(Theta[r]) <= _CLAMP_S) & ~pin_mask[r]
    X = np.where(movable, prop, Theta[r])
    Delta = X - Theta[r]
    live = np.flatnonzero(np.abs(Delta).max(axis=1) > 0)
    if live.size == 0:
        return escaped
    cand, r, Delta = cand[live], r[live], Delta[live]
    DZ = Delta @ Z
    eps = np.ones(r.size)
    ok_rows = np.zeros(r.size, dtype=bool)
    eps_used = np.zeros(r.size)
    for _ in range(config.max_backtracks):
        rem = np.flatnonzero(~ok_rows)
        if rem.size == 0:
            break
        S_t = S[r[rem]] + eps[rem, None] * DZ[rem]
        ll_t = ll_rows(S_t, A[r[rem]], B[r[rem]])
        pen_t = ll_t + lam * np.abs(
            Theta[r[rem]] + eps[rem, None] * Delta[rem]
        ).sum(axis=1)
        hit = pen_t < F_pen[r[rem]]
        ok_rows[rem[hit]] = True
        eps_used[rem[hit]] = eps[rem[hit]]
        eps[rem[~hit]] *= config.backtrack_rho
    good = np.flatnonzero(ok_rows)
    if good.size:
        rg = r[good]
        new_rows = Theta[rg] + eps_used[good, None] * Delta[good]
        np.clip(new_rows, lo, 0.0, out=new_rows)
        new_rows[pin_mask[rg]] = pin_vals[rg][pin_mask[rg]]
        Theta[rg] = new_rows
        S[rg] = new_rows @ Z
        F_ll[rg] = ll_rows(S[rg], A[rg], B[rg])
        F_pen[rg] = F_ll[rg] + lam * np.abs(new_rows).sum(axis=1)
        escaped[cand[good]] = True
    return escaped


def _fit_batch(
    cache: IndicatorCache,
    nodes: np.ndarray,
    config: FitConfig,
    priors,
    omega: float,
    theta0: np.ndarray | None = None,
):
    """Run the solver for a batch of focal nodes simultaneously.

    Rows are mathematically independent; batching exists so the gradient,
    curvature-bound and trial-objective evaluations become large matrix
    products.  Returns (rows, reports) where rows is (len(nodes), p) with
    the focal column zero.
    """
    if not 0.0 < omega < 1.0:
        raise ValidationError(f"omega must be in (0, 1), got {omega}")
    nodes = np.asarray(nodes, dtype=np.int64)
    n, p, m = len(nodes), cache.p, cache.T - 1
    lo = float(np.log1p(-omega))
    lam = config.lam

    Z = cache.infected[:, :m]
    A = cache.stay_susc[nodes].astype(np.float64)
    B = cache.new_inf[nodes].astype(np.float64)
    col_tot = Z.sum(axis=0)
    z_self = cache.infected[nodes, :m]
    others_cnt = col_tot[None, :] - z_self  # infected nodes besides the focal one
    A_cnt = A @ Z.T  # exposure counts per candidate source, fixed over iterations
    pin_mask, pin_vals = _pin_arrays(nodes, p, priors, omega)

    if theta0 is None:
        Theta = np.zeros((n, p), dtype=np.float64)
    else:
        Theta = np.array(theta0, dtype=np.float64)
        if Theta.shape != (n, p):
            raise ValidationError(f"theta0 shape {Theta.shape} != ({n}, {p})")
    Theta[pin_mask] = pin_vals[pin_mask]

    def ll_rows(S_rows, A_rows, B_rows):
        D = np.maximum(-np.expm1(S_rows), EPS_FLOOR)
        return -((A_rows * S_rows).sum(axis=1) + (B_rows * np.log(D)).sum(axis=1))

    S = Theta @ Z  # (n, m) linear predictors, updated incrementally below
    F_ll = ll_rows(S, A, B)
    F_pen = F_ll + lam * np.abs(Theta).sum(axis=1)

    done = np.zeros(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    stalled = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)

    for outer in range(config.max_outer_iters):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        S_a = S[idx]
        A_a, B_a = A[idx], B[idx]
        E = np.exp(S_a)
        D = np.maximum(-np.expm1(S_a), EPS_FLOOR)
        R = E / D
        G = (B_a * R - A_a) @ Z.T  # (na, p) gradient in the full embedding
        W = (B_a * R / D) * (col_tot[None, :] - cache.infected[nodes[idx], :m])
        RS = W @ Z.T  # row sums of the true Hessian, per candidate column
        RS[np.arange(idx.size), nodes[idx]] = -np.inf
        alpha = np.maximum(RS.max(axis=1), 0.0)
        alpha = np.maximum(alpha, _ALPHA_FLOOR)

        Th_a = Theta[idx]
        V = _coord_closed_form(Th_a, G, alpha[:, None], lam, lo)
        V[pin_mask[idx]] = pin_vals[idx][pin_mask[idx]]
        Delta = V - Th_a

        step_sz = np.abs(Delta).max(axis=1)
        model_dec = (G * Delta).sum(axis=1) + lam * (
            np.abs(V).sum(axis=1) - np.abs(Th_a).sum(axis=1)
        )
        at_fixed_point = (step_sz < _STEP_ATOL) | (model_dec >= -1e-15)
        iters[idx] += 1
        if at_fixed_point.any():
            fixed = idx[at_fixed_point]
            done[fixed] = True
            converged[fixed] = True

        mov = np.flatnonzero(~at_fixed_point)
        if mov.size == 0:
            continue
        rows = idx[mov]
        D_mov = Delta[mov]
        DZ = D_mov @ Z  # (nm, m)
        dec = model_dec[mov]
        eps = np.ones(mov.size)
        accepted = np.zeros(mov.size, dtype=bool)
        F_trial_ll = np.empty(mov.size)
        F_trial_pen = np.empty(mov.size)
        eps_used = np.zeros(mov.size)
        for _ in range(config.max_backtracks):
            rem = np.flatnonzero(~accepted)
            if rem.size == 0:
                break
            S_t = S[rows[rem]] + eps[rem, None] * DZ[rem]
            ll_t = ll_rows(S_t, A[rows[rem]], B[rows[rem]])
            pen_t = ll_t + lam * np.abs(
                Theta[rows[rem]] + eps[rem, None] * D_mov[rem]
            ).sum(axis=1)
            # Strict decrease guards against float round-off "accepting" a
            # null step when both sides of the Armijo test collapse to F_pen.
            ok = (
                pen_t <= F_pen[rows[rem]] + config.armijo_c * eps[rem] * dec[rem]
            ) & (pen_t < F_pen[rows[rem]])
            hit = rem[ok]
            accepted[hit] = True
            F_trial_ll[hit] = ll_t[ok]
            F_trial_pen[hit] = pen_t[ok]
            eps_used[hit] = eps[hit]
            eps[rem[~ok]] *= config.backtrack_rho
        # The row-sum surrogate can over-damp steps by orders of magnitude,
        # so rows that took the unit step whole keep doubling it while the
        # penalized objective strictly improves, stopping at the box face
        # (beyond it the incremental linear predictors would go stale).
        fwd = np.flatnonzero(accepted & (eps_used == 1.0))
        if fwd.size:
            th_f = Theta[rows[fwd]]
            d_f = D_mov[fwd]
            with np.errstate(divide="ignore", invalid="ignore"):
                room = np.where(
                    d_f > 0,
                    -th_f / d_f,
                    np.where(d_f < 0, (lo - th_f) / d_f, np.inf),
                )
            eps_box = np.maximum(np.nanmin(room, axis=1), 1.0)
            cur = np.ones(fwd.size)
            live = eps_box > cur
            for _ in range(12):
                act = np.flatnonzero(live)
                if act.size == 0:
                    break
                eps_t = np.minimum(cur[act] * 2.0, eps_box[act])
                S_t = S[rows[fwd[act]]] + eps_t[:, None] * DZ[fwd[act]]
                ll_t = ll_rows(S_t, A[rows[fwd[act]]], B[rows[fwd[act]]])
                pen_t = ll_t + lam * np.abs(
                    Theta[rows[fwd[act]]] + eps_t[:, None] * D_mov[fwd[act]]
                ).sum(axis=1)
                better = pen_t < F_trial_pen[fwd[act]]
                adv = act[better]
                cur[adv] = eps_t[better]
                F_trial_ll[fwd[adv]] = ll_t[better]
                F_trial_pen[fwd[adv]] = pen_t[better]
                live[act[~better]] = False
                live[adv] = eps_t[better] < eps_box[adv]
            eps_used[fwd] = cur
        bad = np.flatnonzero(~accepted)
        if bad.size:
            esc = _escape_clamp_plateau(
                rows[bad], Theta, S, F_ll, F_pen,
                A, B, Z, A_cnt, others_cnt, pin_mask, pin_vals,
                lam, lo, config, ll_rows,
            )
            settle = rows[bad[~esc]]
            tiny = np.abs(dec[bad[~esc]]) <= _DEC_RTOL * np.maximum(
                1.0, np.abs(F_pen[settle])
            )
            done[settle] = True
            converged[settle] = tiny
            stalled[settle] = ~tiny
        good = np.flatnonzero(accepted)
        if good.size:
            r = rows[good]
            new_rows = Theta[r] + eps_used[good, None] * D_mov[good]
            np.clip(new_rows, lo, 0.0, out=new_rows)
            new_rows[pin_mask[r]] = pin_vals[r][pin_mask[r]]
            Theta[r] = new_rows
            S[r] += eps_used[good, None] * DZ[good]
            rel = np.abs(F_trial_pen[good] - F_pen[r]) / np.maximum(
                np.abs(F_pen[r]), 1e-12
            )
            F_ll[r] = F_trial_ll[good]
            F_pen[r] = F_trial_pen[good]
            conv = r[rel < config.tol_obj]
            done[conv] = True
            converged[conv] = True
        if outer % 64 == 63:
            live = np.flatnonzero(~done)
            if live.size:
                S[live] = Theta[live] @ Z  # refresh against incremental drift

    reports = []
    for r, i in enumerate(nodes):
        support = int(
            np.count_nonzero(np.delete(Theta[r], i) < -config.tol_zero)
        )
        reports.append(
            NodeFitReport(
                node=int(i),
                iterations=int(iters[r]),
                objective=float(F_pen[r]),
                converged=bool(converged[r]),
                stalled=bool(stalled[r]),
                support_size=support,
            )
        )
    return Theta, reports


def _escape_single(tv, cache, lam, free, config):
    """Scalar-path version of the clamp-plateau escape; see the batch helper.

    Returns (new_values, new_penalized_objective) or None when the node
    is not on the plateau or no strict decrease exists along the move.
    """
    i = tv.node
    m = cache.T - 1
    others = cache.others(i)
    Zo = cache.infected[others, :m]
    a = cache.stay_susc[i].astype(np.float64)
    b = cache.new_inf[i].astype(np.float64)
    s = tv.values @ Zo
    others_cnt = cache.infected[:, :m].sum(axis=0) - cache.infected[i, :m]
    plateau = (b > 0) & (s > -_CLAMP_S) & (others_cnt >= 1)
    if not plateau.any():
        return None
    cc = plateau.astype(np.float64) @ Zo.T
    with np.errstate(divide="ignore"):
        prop = -np.log1p(cc / np.maximum(a @ Zo.T + lam, 1e-300))
    prop = np.clip(prop, tv.box_lower, 0.0)
    movable = (cc > 0) & (np.abs(tv.values) <= _CLAMP_S) & free
    X = np.where(movable, prop, tv.values)
    delta = X - tv.values
    if np.abs(delta).max(initial=0.0) == 0.0:
        return None
    f0 = neg_loglik(tv, cache) + lam * np.abs(tv.values).sum()
    eps = 1.0
    for _ in range(config.max_backtracks):
        trial_vals = np.clip(tv.values + eps * delta, tv.box_lower, 0.0)
        trial = ThetaVector(node=i, values=trial_vals, omega=tv.omega)
        f_t = neg_loglik(trial, cache) + lam * np.abs(trial_vals).sum()
        if f_t < f0:
            return trial_vals, f_t
        eps *= config.backtrack_rho
    return None


def _fit_batch_full_quadratic(cache, nodes, config, priors, omega, theta0=None):
    """Reference path: per-node loop with the full-quadratic subproblem."""
    p = cache.p
    rows = np.zeros((len(nodes), p), dtype=np.float64)
    reports = []
    pin_mask, pin_vals = _pin_arrays(nodes, p, priors, omega)
    lam = config.lam
    for r, i in enumerate(nodes):
        i = int(i)
        others = cache.others(i)
        free = ~pin_mask[r, others]
        vals = (
            pin_vals[r, others].copy()
            if theta0 is None
            else np.asarray(theta0[r], dtype=np.float64)[others]
        )
        vals[~free] = pin_vals[r, others][~free]
        tv = ThetaVector(node=i, values=vals, omega=omega)
        f_pen = neg_loglik(tv, cache) + lam * np.abs(vals).sum()
        it = 0
        conv = False
        stall = False
        for it in range(1, config.max_outer_iters + 1):
            g = gradient(tv, cache)
            H = hessian(tv, cache)
            delta = solve_quadratic_subproblem(tv, g, H, lam, omega)
            delta[~free] = 0.0
            model_dec = float(g @ delta) + lam * (
                np.abs(tv.values + delta).sum() - np.abs(tv.values).sum()
            )
            if np.abs(delta).max(initial=0.0) < _STEP_ATOL or model_dec >= -1e-15:
                conv = True
                break
            eps = 1.0
            accepted = False
            for _ in range(config.max_backtracks):
                trial_vals = np.clip(tv.values + eps * delta, tv.box_lower, 0.0)
                trial = ThetaVector(node=i, values=trial_vals, omega=omega)
                f_t = neg_loglik(trial, cache) + lam * np.abs(trial_vals).sum()
                if f_t <= f_pen + config.armijo_c * eps * model_dec and f_t < f_pen:
                    accepted = True
                    break
                eps *= config.backtrack_rho
            if not accepted:
                esc = _escape_single(tv, cache, lam, free, config)
                if esc is not None:
                    tv = ThetaVector(node=i, values=esc[0], omega=omega)
                    f_pen = esc[1]
                    continue
                if abs(model_dec) <= _DEC_RTOL * max(1.0, abs(f_pen)):
                    conv = True
                else:
                    stall = True
                break
            rel = abs(f_t - f_pen) / max(abs(f_pen), 1e-12)
            tv = trial
            f_pen = f_t
            if rel < config.tol_obj:
                conv = True
                break
        rows[r, others] = tv.values
        reports.append(
            NodeFitReport(
                node=i,
                iterations=it,
                objective=float(f_pen),
                converged=conv,
                stalled=stall,
                support_size=int(np.count_nonzero(tv.values < -config.tol_zero)),
            )
        )
    return rows, reports


def fit_neighborhood(
    i: int,
    cache: IndicatorCache,
    config: FitConfig,
    priors: PriorConstraints | None = None,
    omega: float = 0.273,
    theta0: np.ndarray | None = None,
) -> NodeFit:
    """Fit one node's edge parameters from a cold (or warm) start.

    Runs the majorized coordinate solver until the penalized objective's
    relative change drops below ``config.tol_obj``, the subproblem
    reaches a fixed point, the line search stalls, or the iteration cap
    hits.  Pinned coordinates from ``priors`` never move.
    """
    nodes = np.array([i], dtype=np.int64)
    t0 = None if theta0 is None else np.asarray(theta0, dtype=np.float64)[None, :]
    if config.subproblem == "full-quadratic":
        rows, reports = _fit_batch_full_quadratic(cache, nodes, config, priors, omega, t0)
    else:
        rows, reports = _fit_batch(cache, nodes, config, priors, omega, t0)
    vals = np.delete(rows[0], i)
    return NodeFit(
        theta=ThetaVector(node=i, values=vals, omega=omega), report=reports[0]
    )


def fit_all(
    cache: IndicatorCache,
    config: FitConfig,
    priors: PriorConstraints | None = None,
    omega: float = 0.273,
    theta0: np.ndarray | None = None,
) -> FitResult:
    """Fit every node's neighborhood; rows are independent programs."""
    nodes = np.arange(cache.p, dtype=np.int64)
    if config.subproblem == "full-quadratic":
        rows, reports = _fit_batch_full_quadratic(
            cache, nodes, config, priors, omega, theta0
        )
    else:
        rows, reports = _fit_batch(cache, nodes, config, priors, omega, theta0)
    return FitResult(theta=rows, reports=reports)


def symmetrize(theta: np.ndarray, tol_zero: float = 1e-8) -> Topology:
    """Union-rule symmetrization of the directed support.

    A pair {i, j} is an edge when either theta[i, j] or theta[j, i] is
    below -tol_zero.
    """
    th = np.asarray(theta, dtype=np.float64)
    if th.ndim != 2 or th.shape[0] != th.shape[1]:
        raise ValidationError(f"theta must be square, got shape {th.shape}")
    directed = th < -tol_zero
    adj = (directed | directed.T).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return Topology(p=th.shape[0], adjacency=adj)
