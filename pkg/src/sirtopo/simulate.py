"""Discrete-time SIR(S) epidemic simulation on a fixed contact network.

States are coded 0 = susceptible, 1 = infected, 2 = recovered.  Each
step, a susceptible node with n infected neighbors becomes infected with
probability 1 - (1-omega)**n, an infected node recovers with probability
alpha, and a recovered node reverts to susceptible with probability
gamma.  Node updates are conditionally independent given the previous
column of states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .netgen import Topology

SUSCEPTIBLE = 0
INFECTED = 1
RECOVERED = 2


@dataclass(frozen=True)
class EpidemicParams:
    """Per-step transition probabilities of the epidemic kernel.

    omega is the transmission attack rate per infected neighbor, alpha
    the infected-to-recovered probability, gamma the recovered-to-
    susceptible probability.  All three must lie strictly inside (0, 1);
    omega at 0 or 1 would make log(1-omega) degenerate downstream.
    """

    omega: float
    alpha: float
    gamma: float

    def __post_init__(self):
        for name in ("omega", "alpha", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValidationError(f"{name} must be in (0, 1), got {v}")


@dataclass(frozen=True)
class Trajectory:
    """Observed state matrix: p nodes by T time steps, k = 1..T.

    ``states[i, k-1]`` is node i's state at step k.  Column 0 is the
    initial condition.
    """

    p: int
    T: int
    states: np.ndarray

    def __post_init__(self):
        st = np.asarray(self.states)
        if self.p < 1 or self.T < 2:
            raise ValidationError(f"need p >= 1 and T >= 2, got p={self.p}, T={self.T}")
        if st.shape != (self.p, self.T):
            raise ValidationError(
                f"states shape {st.shape} does not match (p, T)=({self.p}, {self.T})"
            )
        if not np.isin(st, (SUSCEPTIBLE, INFECTED, RECOVERED)).all():
            raise ValidationError("states entries must be in {0, 1, 2}")
        object.__setattr__(self, "states", st.astype(np.int8))


def check_transition_invariants(traj: Trajectory, topology: Topology | None = None):
    """Raise ValidationError if any forbidden transition occurs.

    Checks the three structural zeros of the kernel (no 0->2, 1->0 or
    2->1 between consecutive columns).  When a topology is supplied,
    additionally checks that a susceptible node with no infected
    neighbors never becomes infected.
    """
    prev = traj.states[:, :-1]
    nxt = traj.states[:, 1:]
    forbidden = (
        ((prev == SUSCEPTIBLE) & (nxt == RECOVERED))
        | ((prev == INFECTED) & (nxt == SUSCEPTIBLE))
        | ((prev == RECOVERED) & (nxt == INFECTED))
    )
    if forbidden.any():
        i, t = np.argwhere(forbidden)[0]
        raise ValidationError(
            f"forbidden transition {prev[i, t]}->{nxt[i, t]} at node {i}, step {t + 1}"
        )
    if topology is not None:
        if topology.p != traj.p:
            raise ValidationError("topology and trajectory node counts differ")
        n_inf = topology.adjacency.astype(np.int64) @ (prev == INFECTED)
        bad = (prev == SUSCEPTIBLE) & (n_inf == 0) & (nxt == INFECTED)
        if bad.any():
            i, t = np.argwhere(bad)[0]
            raise ValidationError(
                f"node {i} infected at step {t + 2} with no infected neighbors"
            )


def transmission_prob(num_infected_neighbors: int, omega: float) -> float:
    """Probability that at least one of n infected neighbors transmits."""
    if not 0.0 < omega < 1.0:
        raise ValidationError(f"omega must be in (0, 1), got {omega}")
    if num_infected_neighbors < 0:
        raise ValidationError("num_infected_neighbors must be nonnegative")
    return 1.0 - (1.0 - omega) ** num_infected_neighbors


def step(
    states_prev: np.ndarray,
    topology: Topology,
    params: EpidemicParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Advance the epidemic one step.

    Draws exactly one uniform per node, in node order, so a fixed rng
    stream position gives a fixed outcome regardless of how states are
    laid out.
    """
    sp = np.asarray(states_prev)
    if sp.shape != (topology.p,):
        raise ValidationError(
            f"states_prev shape {sp.shape} does not match p={topology.p}"
        )
    if not np.isin(sp, (SUSCEPTIBLE, INFECTED, RECOVERED)).all():
        raise ValidationError("states_prev entries must be in {0, 1, 2}")
    n_inf = topology.adjacency.astype(np.int64) @ (sp == INFECTED)
    q = 1.0 - (1.0 - params.omega) ** n_inf
    u = rng.random(topology.p)
    out = sp.astype(np.int8).copy()
    out[(sp == SUSCEPTIBLE) & (u < q)] = INFECTED
    out[(sp == INFECTED) & (u < params.alpha)] = RECOVERED
    out[(sp == RECOVERED) & (u < params.gamma)] = SUSCEPTIBLE
    return out


def simulate(
    topology: Topology,
    params: EpidemicParams,
    num_init_infected: int,
    T: int,
    seed: int,
    init_infected_nodes: np.ndarray | None = None,
) -> Trajectory:
    """Simulate a T-step trajectory from a random initial infected set.

    Parameters
    ----------
    topology : Topology
        Contact network.
    params : EpidemicParams
        Kernel probabilities.
    num_init_infected : int
        Number of initially infected nodes, chosen uniformly without
        replacement; everyone else starts susceptible.
    T : int
        Horizon, at least 2.
    seed : int
        Master seed; a fixed seed reproduces the trajectory exactly.
    init_infected_nodes : array of node indices, optional
        Explicit initial infected set, overriding the random draw (used
        to hold the initial condition fixed across resamples).

    Returns
    -------
    Trajectory
    """
    p = topology.p
    if not 0 < num_init_infected <= p:
        raise ValidationError(
            f"num_init_infected must be in 1..{p}, got {num_init_infected}"
        )
    if T < 2:
        raise ValidationError(f"T must be >= 2, got {T}")
    rng = np.random.default_rng(seed)
    if init_infected_nodes is None:
        init = rng.choice(p, size=num_init_infected, replace=False)
    else:
        init = np.asarray(init_infected_nodes, dtype=np.int64)
        if init.size != num_init_infected or np.unique(init).size != init.size:
            raise ValidationError("init_infected_nodes must be distinct and match count")
        if init.size and (init.min() < 0 or init.max() >= p):
            raise ValidationError("init_infected_nodes out of range")
    states = np.empty((p, T), dtype=np.int8)
    states[:, 0] = SUSCEPTIBLE
    states[init, 0] = INFECTED
    for t in range(1, T):
        states[:, t] = step(states[:, t - 1], topology, params, rng)
    return Trajectory(p=p, T=T, states=states)


def save_trajectory(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV: header "k,n0,n1,...", one row per step."""
    header = "k," + ",".join(f"n{i}" for i in range(traj.p))
    lines = [header]
    for t in range(traj.T):
        lines.append(f"{t + 1}," + ",".join(str(int(v)) for v in traj.states[:, t]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trajectory(path) -> Trajectory:
    """Read a trajectory CSV written by :func:`save_trajectory`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty trajectory file")
    header = lines[0].split(",")
    if header[0] != "k" or any(
        not c.startswith("n") for c in header[1:]
    ):
        raise ValidationError(f"{path}: bad trajectory header {lines[0]!r}")
    p = len(header) - 1
    if p < 1:
        raise ValidationError(f"{path}: no node columns")
    T = len(lines) - 1
    states = np.empty((p, T), dtype=np.int8)
    for t, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        if len(parts) != p + 1:
            raise ValidationError(f"{path}: row {t + 1} has {len(parts) - 1} cells, want {p}")
        try:
            k = int(parts[0])
            vals = [int(v) for v in parts[1:]]
        except ValueError as exc:
            raise ValidationError(f"{path}: malformed row {t + 1}") from exc
        if k != t + 1:
            raise ValidationError(f"{path}: row {t + 1} labeled k={k}")
        states[:, t] = vals
    if not np.isin(states, (0, 1, 2)).all():
        raise ValidationError(f"{path}: state values must be in {{0, 1, 2}}")
    return Trajectory(p=p, T=T, states=states)
