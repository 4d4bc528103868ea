"""Per-node negative log-likelihood of the relaxed edge parameters.

For focal node i with edge parameters theta_i (one entry per other node,
each in [log(1-omega), 0]), the transitions that involve theta are the
susceptible-node outcomes: staying susceptible at step k contributes
s_k = sum_j theta_{i,j} * 1{j infected at k-1}, and becoming infected
contributes log(1 - e^{s_k}).  The negative log-likelihood sums these
over k = 2..T with a sign flip.  Recovered/infected bookkeeping terms do
not depend on theta and are dropped.

The objective is singular at s = 0 (cold start with an observed
infection); 1 - e^s is floored at EPS_FLOOR in the objective, gradient
and Hessian so the optimizer can move off that boundary.  Any
s <= log(1 - EPS_FLOOR) is evaluated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .simulate import INFECTED, SUSCEPTIBLE, Trajectory

# Floor applied to 1 - e^s in the objective, gradient and Hessian.
EPS_FLOOR = 1e-12

# Slack for box membership checks, to absorb float roundoff.
_BOX_SLACK = 1e-12


@dataclass(frozen=True)
class ThetaVector:
    """Edge parameters of one focal node.

    ``values[m]`` is theta_{node,j} for the m-th other node j (all nodes
    except ``node``, in ascending index order).  Entries live in the box
    [log(1-omega), 0].
    """

    node: int
    values: np.ndarray
    omega: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if not 0.0 < self.omega < 1.0:
            raise ValidationError(f"omega must be in (0, 1), got {self.omega}")
        lo = np.log1p(-self.omega)
        if vals.ndim != 1:
            raise ValidationError("values must be a 1-D vector")
        if (vals < lo - _BOX_SLACK).any() or (vals > _BOX_SLACK).any():
            raise ValidationError(
                f"theta values outside the box [{lo}, 0] for omega={self.omega}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def box_lower(self) -> float:
        return float(np.log1p(-self.omega))


@dataclass(frozen=True)
class IndicatorCache:
    """Precomputed indicators shared by all per-node likelihood work.

    infected[j, t]   : 1.0 if node j is infected at step t+1 (t = 0..T-1).
    stay_susc[i, t]  : True if node i is susceptible at steps t+1 and t+2.
    new_inf[i, t]    : True if node i moves susceptible->infected between
                       steps t+1 and t+2.
    t_eff[i]         : number of transitions where node i starts
                       susceptible, i.e. the number of terms in node i's
                       log-likelihood.

    The transition arrays cover t = 0..T-2; transition t is driven by the
    infected column t.
    """

    p: int
    T: int
    infected: np.ndarray
    stay_susc: np.ndarray
    new_inf: np.ndarray
    t_eff: np.ndarray

    def others(self, i: int) -> np.ndarray:
        """Indices of all nodes except i, ascending (ThetaVector order)."""
        if not 0 <= i < self.p:
            raise ValidationError(f"node {i} out of range for p={self.p}")
        return np.delete(np.arange(self.p), i)


def build_indicators(traj: Trajectory) -> IndicatorCache:
    """Scan a trajectory once into the indicator arrays."""
    st = traj.states
    prev = st[:, :-1]
    nxt = st[:, 1:]
    was_susc = prev == SUSCEPTIBLE
    return IndicatorCache(
        p=traj.p,
        T=traj.T,
        infected=(st == INFECTED).astype(np.float64),
        stay_susc=was_susc & (nxt == SUSCEPTIBLE),
        new_inf=was_susc & (nxt == INFECTED),
        t_eff=was_susc.sum(axis=1).astype(np.int64),
    )


def _node_arrays(theta_i: ThetaVector, cache: IndicatorCache):
    """(Z, a, b) for the focal node: Z is (p-1, T-1) infected indicators."""
    i = theta_i.node
    if theta_i.values.shape != (cache.p - 1,):
        raise ValidationError(
            f"theta values length {theta_i.values.size} does not match p-1={cache.p - 1}"
        )
    Z = cache.infected[cache.others(i), : cache.T - 1]
    a = cache.stay_susc[i].astype(np.float64)
    b = cache.new_inf[i].astype(np.float64)
    return Z, a, b


def neg_loglik(theta_i: ThetaVector, cache: IndicatorCache) -> float:
    """Negative log-likelihood of node theta_i's transitions."""
    Z, a, b = _node_arrays(theta_i, cache)
    s = theta_i.values @ Z
    d = np.maximum(-np.expm1(s), EPS_FLOOR)
    return float(-(a @ s + b @ np.log(d)))


def gradient(theta_i: ThetaVector, cache: IndicatorCache) -> np.ndarray:
    """Gradient of the negative log-likelihood at theta_i."""
    Z, a, b = _node_arrays(theta_i, cache)
    s = theta_i.values @ Z
    r = np.exp(s) / np.maximum(-np.expm1(s), EPS_FLOOR)
    return Z @ (b * r - a)


def hessian(theta_i: ThetaVector, cache: IndicatorCache) -> np.ndarray:
    """Hessian of the negative log-likelihood: symmetric, PSD, entries >= 0."""
    Z, _, b = _node_arrays(theta_i, cache)
    s = theta_i.values @ Z
    w = b * np.exp(s) / np.maximum(-np.expm1(s), EPS_FLOOR) ** 2
    return (Z * w) @ Z.T


def surrogate_alpha(H: np.ndarray) -> float:
    """Perron-Frobenius curvature bound: the largest row sum of H.

    For symmetric H with nonnegative entries this dominates the largest
    eigenvalue, so alpha*I - H is positive semi-definite.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"H must be square, got shape {H.shape}")
    if H.size == 0:
        return 0.0
    if (H < -_BOX_SLACK).any():
        raise ValidationError("H must have nonnegative entries")
    if not np.allclose(H, H.T, rtol=1e-8, atol=1e-10):
        raise ValidationError("H must be symmetric")
    return float(H.sum(axis=1).max())


def validate_theta_matrix(theta: np.ndarray, omega: float, p: int | None = None):
    """Check a dense p x p edge-parameter matrix: zero diagonal, box entries."""
    th = np.asarray(theta, dtype=np.float64)
    if th.ndim != 2 or th.shape[0] != th.shape[1]:
        raise ValidationError(f"theta matrix must be square, got shape {th.shape}")
    if p is not None and th.shape[0] != p:
        raise ValidationError(f"theta matrix size {th.shape[0]} does not match p={p}")
    if np.abs(np.diagonal(th)).max(initial=0.0) > _BOX_SLACK:
        raise ValidationError("theta matrix diagonal must be zero")
    lo = np.log1p(-omega)
    if (th < lo - _BOX_SLACK).any() or (th > _BOX_SLACK).any():
        raise ValidationError(f"theta matrix entries outside the box [{lo}, 0]")
    return th


def row_theta(theta: np.ndarray, i: int, omega: float) -> ThetaVector:
    """Extract row i of a ThetaMatrix as a ThetaVector."""
    th = np.asarray(theta, dtype=np.float64)
    p = th.shape[0]
    vals = np.delete(th[i], i)
    return ThetaVector(node=i, values=vals, omega=omega)


def embed_rows(vectors: list[ThetaVector], p: int) -> np.ndarray:
    """Assemble ThetaVectors into the dense p x p matrix (zero diagonal)."""
    out = np.zeros((p, p), dtype=np.float64)
    for tv in vectors:
        idx = np.delete(np.arange(p), tv.node)
        out[tv.node, idx] = tv.values
    return out


def save_theta_matrix(theta: np.ndarray, path) -> None:
    """Write a dense theta matrix as CSV with 17 significant digits."""
    th = np.asarray(theta, dtype=np.float64)
    np.savetxt(path, th, delimiter=",", fmt="%.17g")


def load_theta_matrix(path) -> np.ndarray:
    try:
        th = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed theta matrix CSV") from exc
    if th.shape[0] != th.shape[1]:
        raise ValidationError(f"{path}: theta matrix must be square, got {th.shape}")
    return th
