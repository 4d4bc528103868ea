"""Synthetic contact-network generation and edge-list I/O.

Two generators are provided: a scale-free generator that draws a
truncated power-law degree sequence and wires it with a configuration
model (rejecting self-loops and multi-edges), and a Watts-Strogatz
small-world generator (ring lattice plus random rewiring).  Both are
driven by ``numpy.random.default_rng`` so a fixed seed gives a fixed
graph.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

# Pairing attempts allowed before a degree sequence is declared degenerate.
_MAX_PAIRING_RESTARTS = 100
_MAX_LEFTOVER_ROUNDS = 50


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph on nodes ``0..p-1``.

    Parameters
    ----------
    p : int
        Number of nodes.
    adjacency : np.ndarray
        Dense (p, p) 0/1 matrix, symmetric with zero diagonal.
    """

    p: int
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        if self.p < 1:
            raise ValidationError(f"p must be >= 1, got {self.p}")
        if adj.shape != (self.p, self.p):
            raise ValidationError(
                f"adjacency shape {adj.shape} does not match p={self.p}"
            )
        if not np.isin(adj, (0, 1)).all():
            raise ValidationError("adjacency entries must be 0 or 1")
        if (adj != adj.T).any():
            raise ValidationError("adjacency must be symmetric")
        if np.diagonal(adj).any():
            raise ValidationError("adjacency must have a zero diagonal")
        object.__setattr__(self, "adjacency", adj.astype(np.int8))

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(np.int64)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def num_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def edge_set(self) -> set[tuple[int, int]]:
        """Edges as a set of (i, j) pairs with i < j."""
        ii, jj = np.nonzero(np.triu(self.adjacency, k=1))
        return {(int(i), int(j)) for i, j in zip(ii, jj)}

    def is_connected(self) -> bool:
        if self.p <= 1:
            return True
        seen = np.zeros(self.p, dtype=bool)
        queue = deque([0])
        seen[0] = True
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(self.adjacency[u]):
                if not seen[v]:
                    seen[v] = True
                    queue.append(int(v))
        return bool(seen.all())


def topology_from_edges(p: int, edges) -> Topology:
    """Build a Topology from an iterable of (i, j) pairs."""
    adj = np.zeros((p, p), dtype=np.int8)
    for i, j in edges:
        if i == j:
            raise ValidationError(f"self-loop at node {i}")
        if not (0 <= i < p and 0 <= j < p):
            raise ValidationError(f"edge ({i}, {j}) out of range for p={p}")
        adj[i, j] = 1
        adj[j, i] = 1
    return Topology(p=p, adjacency=adj)


def _sample_powerlaw_degrees(p: int, exponent: float, rng) -> np.ndarray:
    """Draw p degrees from P(d) proportional to d**-exponent on {1..p-1}."""
    d = np.arange(1, p, dtype=np.float64)
    w = d ** (-exponent)
    w /= w.sum()
    degrees = rng.choice(np.arange(1, p), size=p, p=w)
    if degrees.sum() % 2 == 1:
        # Make the stub count even; only nodes below the cap are eligible.
        candidates = np.flatnonzero(degrees < p - 1)
        degrees[rng.choice(candidates)] += 1
    return degrees.astype(np.int64)


def _swap_in_pair(u, v, edges, rng, tries=200) -> bool:
    """Connect stubs u, v by breaking a committed edge (x, y) and adding
    (u, x), (v, y).  Degree counts are preserved.  Returns False when no
    usable edge is found within the try budget."""
    if u != v:
        cand = (min(u, v), max(u, v))
        if cand not in edges:
            edges.add(cand)
            return True
    pool = list(edges)
    if not pool:
        return False
    for _ in range(min(tries, 4 * len(pool) + 4)):
        broken = pool[rng.integers(len(pool))]
        x, y = broken if rng.random() < 0.5 else (broken[1], broken[0])
        if u in (x, y) or v in (x, y) or broken not in edges:
            continue
        e1 = (min(u, x), max(u, x))
        e2 = (min(v, y), max(v, y))
        if e1 in edges or e2 in edges or e1 == e2:
            continue
        edges.remove(broken)
        edges.add(e1)
        edges.add(e2)
        return True
    return False


def _pair_stubs(p: int, degrees: np.ndarray, rng) -> set[tuple[int, int]]:
    """Configuration-model pairing, rejecting self-loops and multi-edges.

    Leftover stubs from rejected pairs are reshuffled and re-paired;
    stubs that stay unmatched (their remaining partners are all taken)
    are wired in by edge swaps against committed edges, which preserves
    all degrees.  A full restart covers the rare swap dead end;
    exhausting the restart budget signals a degree sequence that cannot
    be realized as a simple graph.
    """
    all_stubs = np.repeat(np.arange(p), degrees)
    for _ in range(_MAX_PAIRING_RESTARTS):
        stubs = all_stubs.copy()
        rng.shuffle(stubs)
        edges: set[tuple[int, int]] = set()
        stuck = False
        for _ in range(_MAX_LEFTOVER_ROUNDS):
            leftover = []
            for u, v in zip(stubs[0::2], stubs[1::2]):
                a, b = (int(u), int(v)) if u < v else (int(v), int(u))
                if a == b or (a, b) in edges:
                    leftover.extend((a, b))
                else:
                    edges.add((a, b))
            if not leftover:
                return edges
            if len(leftover) >= stubs.size:
                stuck = True
                break
            stubs = np.array(leftover)
            rng.shuffle(stubs)
        if stuck:
            repaired = all(
                _swap_in_pair(int(u), int(v), edges, rng)
                for u, v in zip(stubs[0::2], stubs[1::2])
            )
            if repaired:
                return edges
    raise NumericalError(
        "degree sequence could not be wired into a simple graph "
        f"after {_MAX_PAIRING_RESTARTS} pairing attempts"
    )


def gen_scale_free(p: int, exponent: float, seed: int) -> Topology:
    """Generate a scale-free graph from a truncated power-law degree sequence.

    Degrees are drawn i.i.d. from P(d) proportional to d**-exponent on
    {1, ..., p-1}, the total is made even, and stubs are paired with a
    configuration model that rejects self-loops and duplicate edges.

    Parameters
    ----------
    p : int
        Number of nodes, at least 2.
    exponent : float
        Power-law exponent, must exceed 1.
    seed : int
        Seed for the generator RNG.

    Returns
    -------
    Topology
    """
    if p < 2:
        raise ValidationError(f"p must be >= 2, got {p}")
    if not exponent > 1.0:
        raise ValidationError(f"exponent must be > 1, got {exponent}")
    rng = np.random.default_rng(seed)
    degrees = _sample_powerlaw_degrees(p, exponent, rng)
    edges = _pair_stubs(p, degrees, rng)
    topo = topology_from_edges(p, edges)
    if not topo.is_connected():
        warnings.warn(
            "generated graph is disconnected; an epidemic cannot cross "
            "components",
            stacklevel=2,
        )
    return topo


def gen_small_world(
    p: int, mean_degree_k: int, rewire_p: float, seed: int
) -> Topology:
    """Generate a Watts-Strogatz small-world graph.

    Starts from a ring lattice where each node connects to its
    ``mean_degree_k`` nearest neighbors, then rewires the far endpoint of
    each lattice edge with probability ``rewire_p`` to a uniformly chosen
    node, avoiding self-loops and duplicate edges.  Rewiring preserves
    the edge count exactly.
    """
    k = mean_degree_k
    if p < 3:
        raise ValidationError(f"p must be >= 3, got {p}")
    if k % 2 != 0 or k < 2:
        raise ValidationError(f"mean_degree_k must be even and >= 2, got {k}")
    if k > p - 1:
        raise ValidationError(f"mean_degree_k={k} too large for p={p}")
    if not 0.0 <= rewire_p <= 1.0:
        raise ValidationError(f"rewire_p must be in [0, 1], got {rewire_p}")
    rng = np.random.default_rng(seed)
    adj = np.zeros((p, p), dtype=np.int8)
    for d in range(1, k // 2 + 1):
        for i in range(p):
            j = (i + d) % p
            adj[i, j] = 1
            adj[j, i] = 1
    # Visit lattice edges in the same (distance-major) order for rewiring.
    for d in range(1, k // 2 + 1):
        for i in range(p):
            j = (i + d) % p
            if rng.random() >= rewire_p:
                continue
            if adj[i].sum() >= p - 1:
                continue  # node already adjacent to everyone else
            w = int(rng.integers(p))
            while w == i or adj[i, w]:
                w = int(rng.integers(p))
            adj[i, j] = 0
            adj[j, i] = 0
            adj[i, w] = 1
            adj[w, i] = 1
    topo = Topology(p=p, adjacency=adj)
    if not topo.is_connected():
        warnings.warn(
            "generated graph is disconnected; an epidemic cannot cross "
            "components",
            stacklevel=2,
        )
    return topo


@dataclass(frozen=True)
class GenSpec:
    """Declarative description of a graph to generate.

    ``model`` is "scale-free" (uses ``exponent``) or "small-world" (uses
    ``mean_degree_k`` and ``rewire_p``).
    """

    model: str
    p: int
    seed: int = 0
    exponent: float = 2.2
    mean_degree_k: int = 4
    rewire_p: float = 0.1

    def __post_init__(self):
        if self.model not in ("scale-free", "small-world"):
            raise ValidationError(f"unknown network model {self.model!r}")

    def generate(self) -> Topology:
        if self.model == "scale-free":
            return gen_scale_free(self.p, self.exponent, self.seed)
        return gen_small_world(self.p, self.mean_degree_k, self.rewire_p, self.seed)


def save_topology(topo: Topology, path) -> None:
    """Write a topology as CSV: a "# p=<count>" line, a "src,dst" header,
    then one line per undirected edge with src < dst, sorted."""
    lines = [f"# p={topo.p}", "src,dst"]
    lines.extend(f"{i},{j}" for i, j in sorted(topo.edge_set()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_topology(path, strict: bool = False) -> Topology:
    """Read a topology CSV written by :func:`save_topology`.

    By default each listed edge implies its reverse.  With ``strict=True``
    the listed directed pairs must already form a symmetric set, which
    guards against externally produced listings that were meant to be
    complete but are not.
    """
    with open(path) as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln]
    if not lines or not lines[0].startswith("# p="):
        raise ValidationError(f"{path}: missing '# p=<count>' node-count line")
    try:
        p = int(lines[0][len("# p="):])
    except ValueError as exc:
        raise ValidationError(f"{path}: bad node count line {lines[0]!r}") from exc
    if p < 1:
        raise ValidationError(f"{path}: node count must be >= 1, got {p}")
    if len(lines) < 2 or lines[1].replace(" ", "") != "src,dst":
        raise ValidationError(f"{path}: missing 'src,dst' header")
    pairs: set[tuple[int, int]] = set()
    for ln in lines[2:]:
        parts = ln.split(",")
        if len(parts) != 2:
            raise ValidationError(f"{path}: malformed edge line {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValidationError(f"{path}: malformed edge line {ln!r}") from exc
        if i == j:
            raise ValidationError(f"{path}: self-loop at node {i}")
        if not (0 <= i < p and 0 <= j < p):
            raise ValidationError(f"{path}: edge ({i}, {j}) out of range for p={p}")
        pairs.add((i, j))
    if strict:
        missing = {(i, j) for i, j in pairs if (j, i) not in pairs}
        if missing:
            raise ValidationError(
                f"{path}: asymmetric edge list in strict mode, "
                f"e.g. {sorted(missing)[0]} has no reverse"
            )
    edges = {(min(i, j), max(i, j)) for i, j in pairs}
    return topology_from_edges(p, edges)
