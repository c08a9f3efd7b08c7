"""Communication topologies and doubly-stochastic mixing matrices.

Consensus steps preserve the network average only when the weight matrix has
unit row *and* column sums, and contract disagreement only when the underlying
digraph is strongly connected.  ``validate_mixing`` certifies both; the
Metropolis construction produces such weights on any connected undirected
graph.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "GraphError",
    "MixingMatrix",
    "metropolis_weights",
    "validate_mixing",
    "consensus_spectral_radius",
    "complete_edges",
    "ring_edges",
    "path_edges",
    "erdos_renyi_edges",
    "build_mixing",
]

STOCHASTICITY_TOL = 1e-10


class GraphError(ValueError):
    """A weight matrix or topology violates a communication requirement."""


class MixingMatrix:
    """Certified doubly-stochastic weights W over a strongly connected digraph.

    ``neighbors[i]`` lists the in-neighbors of agent i (including i itself),
    i.e. exactly the j with ``W[i, j] > 0``.  Construct through
    ``metropolis_weights`` or ``validate_mixing``; instances are immutable.
    """

    def __init__(self, W: np.ndarray, neighbors: list[list[int]]):
        self.W = W
        self.N = W.shape[0]
        self.neighbors = neighbors
        self._sigma = None

    @property
    def sigma(self) -> float:
        """Consensus contraction factor (cached spectral radius of the deflated W)."""
        if self._sigma is None:
            self._sigma = consensus_spectral_radius(self.W)
        return self._sigma

    def directed_edge_count(self) -> int:
        """Number of directed edges excluding self-loops (messages per exchange)."""
        return sum(len(nbrs) - 1 for nbrs in self.neighbors)


def _strongly_connected(adjacency: list[list[int]], reverse: list[list[int]]) -> bool:
    N = len(adjacency)

    def reaches_all(adj):
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == N

    return reaches_all(adjacency) and reaches_all(reverse)


def validate_mixing(W) -> MixingMatrix:
    """Certify a weight matrix or raise ``GraphError`` naming the violation.

    Checks: square, nonnegative, row sums 1, column sums 1 (each within
    ``STOCHASTICITY_TOL``), and strong connectivity of the positive-weight
    support.
    """
    W = np.array(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise GraphError(f"weight matrix must be square, got shape {W.shape}")
    N = W.shape[0]
    if np.any(W < 0):
        i, j = np.argwhere(W < 0)[0]
        raise GraphError(f"negative weight W[{i},{j}] = {W[i, j]}")
    row = W.sum(axis=1)
    bad = np.argwhere(np.abs(row - 1.0) > STOCHASTICITY_TOL)
    if bad.size:
        i = int(bad[0][0])
        raise GraphError(
            f"row {i} sums to {row[i]!r}, expected 1 (doubly-stochastic requirement)"
        )
    col = W.sum(axis=0)
    bad = np.argwhere(np.abs(col - 1.0) > STOCHASTICITY_TOL)
    if bad.size:
        j = int(bad[0][0])
        raise GraphError(
            f"column {j} sums to {col[j]!r}, expected 1 (doubly-stochastic requirement)"
        )
    # in-neighbors of i are the j with positive weight into i
    neighbors = [list(np.flatnonzero(W[i] > 0)) for i in range(N)]
    out_edges = [list(np.flatnonzero(W[:, j] > 0)) for j in range(N)]
    if N > 1 and not _strongly_connected(neighbors, out_edges):
        raise GraphError("positive-weight digraph is not strongly connected")
    W.setflags(write=False)
    return MixingMatrix(W, neighbors)


def metropolis_weights(edges, N: int) -> MixingMatrix:
    """Metropolis weights on an undirected graph: w_ij = 1/(1+max(deg_i, deg_j)).

    Diagonal entries absorb the remainder, so the matrix is symmetric and
    exactly doubly stochastic.  The edge list must describe a connected
    undirected graph on ``N >= 2`` nodes.
    """
    if N < 2:
        raise GraphError("metropolis weights need at least 2 nodes")
    pairs = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            continue
        if not (0 <= i < N and 0 <= j < N):
            raise GraphError(f"edge ({i},{j}) is out of range for N={N}")
        pairs.add((min(i, j), max(i, j)))
    deg = np.zeros(N, dtype=int)
    for i, j in pairs:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((N, N))
    for i, j in pairs:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = w
        W[j, i] = w
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    try:
        return validate_mixing(W)
    except GraphError as exc:
        raise GraphError(f"edge list does not give a valid mixing matrix: {exc}") from exc


def consensus_spectral_radius(W, tol: float = 1e-10, max_iter: int | None = None) -> float:
    """Spectral radius of ``W - ones/N`` by power iteration.

    Converges to ``tol`` for symmetric weights; for rotating (complex-pair)
    spectra the running geometric-mean estimate is returned at the iteration
    cap ``10*N^2``, accurate to a few percent, which is enough for the
    contraction diagnostics this is used for.
    """
    if isinstance(W, MixingMatrix):
        W = W.W
    W = np.asarray(W, dtype=float)
    N = W.shape[0]
    B = W - np.full((N, N), 1.0 / N)
    if max_iter is None:
        max_iter = 10 * N * N
    v = np.random.default_rng(0).standard_normal(N)
    v /= np.linalg.norm(v)
    log_sum = 0.0
    burn = min(5, max_iter // 2)
    est = 0.0
    prev_r = None
    stable = 0
    for k in range(1, max_iter + 1):
        Bv = B @ v
        r = np.linalg.norm(Bv)
        if r < 1e-30:
            return 0.0
        v = Bv / r
        if k <= burn:
            continue
        log_sum += np.log(r)
        est = float(np.exp(log_sum / (k - burn)))
        if prev_r is not None and abs(r - prev_r) <= tol * max(1.0, r):
            stable += 1
        else:
            stable = 0
        prev_r = r
        if stable >= 3:
            return float(r)
    return est


# -- topology builders (undirected edge lists for metropolis_weights) --------


def complete_edges(N: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(N) for j in range(i + 1, N)]


def ring_edges(N: int) -> list[tuple[int, int]]:
    if N < 3:
        return path_edges(N)
    return [(i, (i + 1) % N) for i in range(N)]


def path_edges(N: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(N - 1)]


def erdos_renyi_edges(N: int, p: float, seed: int, max_tries: int = 200) -> list[tuple[int, int]]:
    """Edges of a connected Erdos-Renyi draw; resamples until connected."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        mask = rng.random((N, N)) < p
        edges = [(i, j) for i in range(N) for j in range(i + 1, N) if mask[i, j]]
        if _connected_undirected(edges, N):
            return edges
    raise GraphError(f"no connected Erdos-Renyi graph found in {max_tries} draws (N={N}, p={p})")


def _connected_undirected(edges, N: int) -> bool:
    adj = [[] for _ in range(N)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    return _strongly_connected(adj, adj)


def build_mixing(spec: dict, N: int, default_seed: int = 0) -> MixingMatrix:
    """Build a MixingMatrix from a topology description.

    ``spec`` is a dict with ``kind`` in {complete, ring, path, erdos_renyi,
    edges, matrix}; edge-list kinds get Metropolis weights; ``matrix`` is
    validated as-is.  A single-agent network is the trivial W = [[1]].
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind is None:
        raise GraphError("topology spec needs a 'kind'")
    if N == 1:
        return validate_mixing(np.ones((1, 1)))
    if kind == "complete":
        edges = complete_edges(N)
    elif kind == "ring":
        edges = ring_edges(N)
    elif kind == "path":
        edges = path_edges(N)
    elif kind == "erdos_renyi":
        p = float(spec.pop("p", 0.2))
        seed = spec.pop("seed", None)
        edges = erdos_renyi_edges(N, p, default_seed if seed is None else int(seed))
    elif kind == "edges":
        edges = [tuple(e) for e in spec.pop("edges")]
    elif kind == "matrix":
        W = spec.pop("w")
        if spec:
            raise GraphError(f"unknown topology keys: {sorted(spec)}")
        return validate_mixing(W)
    else:
        raise GraphError(f"unknown topology kind {kind!r}")
    if spec:
        raise GraphError(f"unknown topology keys: {sorted(spec)}")
    return metropolis_weights(edges, N)
