"""Community structure of the retweet network: symmetrisation, Louvain
modularity optimisation, and per-community MSI / IV profiles."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .errors import DataError
from .ingest import RetweetGraph
from .stats import DEFAULT_BANDWIDTH, GRID_PAD, DensityCurve, kde_1d

log = logging.getLogger(__name__)

MIN_GAIN = 1e-9
DEFAULT_RESTARTS = 16


@dataclass(frozen=True, eq=False)
class UndirectedGraph:
    """Weighted undirected graph as a unique edge list with ``u <= v``.

    A self-loop ``(u, u, w)`` contributes ``2 w`` to the degree of ``u``.
    """

    node_ids: list[str]
    u: np.ndarray
    v: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int, float]], node_ids: Sequence[str] | None = None):
        ids = list(node_ids) if node_ids is not None else [str(i) for i in range(n)]
        if not edges:
            empty = np.zeros(0, dtype=np.int64)
            return cls(ids, empty, empty.copy(), np.zeros(0))
        a = np.array([e[0] for e in edges], dtype=np.int64)
        b = np.array([e[1] for e in edges], dtype=np.int64)
        w = np.array([e[2] for e in edges], dtype=float)
        return _canonical(ids, a, b, w)

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return len(self.u)

    @property
    def total_weight(self) -> float:
        return float(self.weight.sum())

    @cached_property
    def degrees(self) -> np.ndarray:
        n = self.node_count
        return np.bincount(self.u, self.weight, n) + np.bincount(self.v, self.weight, n)

    def edges(self) -> dict[tuple[str, str], float]:
        ids = self.node_ids
        return {(ids[a], ids[b]): float(w) for a, b, w in zip(self.u.tolist(), self.v.tolist(), self.weight.tolist())}


def _canonical(ids: list[str], a: np.ndarray, b: np.ndarray, w: np.ndarray) -> UndirectedGraph:
    n = len(ids)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    key, inverse = np.unique(lo * n + hi, return_inverse=True)
    summed = np.bincount(inverse.ravel(), w, len(key))
    return UndirectedGraph(ids, key // n, key % n, summed)


def symmetrize(graph: RetweetGraph) -> UndirectedGraph:
    """Undirected graph with ``w(u, v) = w(u -> v) + w(v -> u)``."""
    return _canonical(
        list(graph.node_ids),
        np.asarray(graph.source, dtype=np.int64),
        np.asarray(graph.target, dtype=np.int64),
        np.asarray(graph.weight, dtype=float),
    )


def modularity(graph: UndirectedGraph, assignment, resolution: float = 1.0) -> float:
    """``Q = sum_c (e_c / m - resolution * (a_c / 2m)^2)`` from the edge list."""
    comm = np.asarray(assignment, dtype=np.int64)
    if comm.shape != (graph.node_count,):
        raise DataError(f"assignment covers {comm.size} nodes, graph has {graph.node_count}")
    m = graph.total_weight
    if m <= 0:
        raise DataError("modularity is undefined for a graph without edges")
    _, dense = np.unique(comm, return_inverse=True)
    dense = dense.ravel()
    intra = graph.weight[dense[graph.u] == dense[graph.v]].sum()
    a = np.bincount(dense, graph.degrees)
    return float(intra / m - resolution * np.sum((a / (2.0 * m)) ** 2))


# --------------------------------------------------------------------------
# Louvain
# --------------------------------------------------------------------------


def _csr(n: int, u: np.ndarray, v: np.ndarray, w: np.ndarray):
    loop = u == v
    selfloop = np.bincount(u[loop], w[loop], n)
    a, b, ww = u[~loop], v[~loop], w[~loop]
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    wt = np.concatenate([ww, ww])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    degree = np.bincount(src, wt, n) + 2.0 * selfloop
    return indptr, dst[order], wt[order], degree


@njit(cache=True, nogil=True)
def _local_moves(indptr, indices, weights, degree, order, comm, resolution, m, min_gain):
    """Greedy node moves until a sweep gains at most ``min_gain``; returns total gain.

    Candidates are the node's own community, then neighbouring communities in
    adjacency order, then an empty community.  Only a strictly larger gain
    replaces the current best.
    """
    n = degree.shape[0]
    tot = np.zeros(n)
    size = np.zeros(n, dtype=np.int64)
    for i in range(n):
        tot[comm[i]] += degree[i]
        size[comm[i]] += 1
    free = np.empty(n, dtype=np.int64)
    n_free = 0
    for c in range(n - 1, -1, -1):
        if size[c] == 0:
            free[n_free] = c
            n_free += 1
    link = np.zeros(n)
    stamp = np.full(n, -1, dtype=np.int64)
    cand = np.empty(n, dtype=np.int64)
    scale = resolution / (2.0 * m)
    total = 0.0
    while True:
        sweep_gain = 0.0
        for idx in range(n):
            i = order[idx]
            ki = degree[i]
            ci = comm[i]
            tot[ci] -= ki
            size[ci] -= 1
            # weights from i to each neighbouring community, own community first
            n_cand = 1
            cand[0] = ci
            stamp[ci] = i
            link[ci] = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                c = comm[indices[p]]
                if stamp[c] != i:
                    stamp[c] = i
                    link[c] = 0.0
                    cand[n_cand] = c
                    n_cand += 1
                link[c] += weights[p]
            stay = link[ci] - tot[ci] * ki * scale
            best = ci
            best_gain = stay
            for q in range(1, n_cand):
                c = cand[q]
                g = link[c] - tot[c] * ki * scale
                if g > best_gain:
                    best_gain = g
                    best = c
            # an empty community has gain 0
            if best_gain < 0.0 and size[ci] > 0 and n_free > 0:
                n_free -= 1
                best = free[n_free]
                best_gain = 0.0
            for q in range(n_cand):
                stamp[cand[q]] = -1
            tot[best] += ki
            size[best] += 1
            if best != ci:
                comm[i] = best
                sweep_gain += (best_gain - stay) / m
                if size[ci] == 0:
                    free[n_free] = ci
                    n_free += 1
        total += sweep_gain
        if sweep_gain <= min_gain:
            break
    return total


def _collapse(comm, u, v, w, n_new):
    cu, cv = comm[u], comm[v]
    lo, hi = np.minimum(cu, cv), np.maximum(cu, cv)
    key, inverse = np.unique(lo * n_new + hi, return_inverse=True)
    return key // n_new, key % n_new, np.bincount(inverse.ravel(), w, len(key))


def _multilevel(graph, start, resolution, m, rng, budget):
    """Local moves seeded with ``start`` on the original graph, then aggregation levels."""
    u, v, w, n = graph.u, graph.v, graph.weight, graph.node_count
    flat = np.arange(n, dtype=np.int64)
    comm = start.copy()
    total = 0.0
    used = 0
    while used < budget:
        indptr, indices, weights, degree = _csr(n, u, v, w)
        order = rng.permutation(n).astype(np.int64)
        gain = _local_moves(indptr, indices, weights, degree, order, comm, float(resolution), m, MIN_GAIN)
        total += gain
        used += 1
        _, comm = np.unique(comm, return_inverse=True)
        comm = comm.ravel()
        n_new = int(comm.max()) + 1
        if n_new == n:
            break
        flat = comm[flat]
        u, v, w = _collapse(comm, u, v, w, n_new)
        n = n_new
        comm = np.arange(n, dtype=np.int64)
        if gain <= MIN_GAIN and used > 1:
            break
    return flat, u, v, w, n, total, used


@dataclass(frozen=True, eq=False)
class CommunityPartition:
    """Flat community assignment over node ordinals.

    Community ids are dense, ordered by descending size (ties by the smallest
    member ordinal).
    """

    node_ids: list[str]
    assignment: np.ndarray
    modularity: float
    community_sizes: np.ndarray
    resolution: float
    seed: int
    levels: int = 0

    @property
    def n_communities(self) -> int:
        return len(self.community_sizes)

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.node_ids, self.assignment.tolist()))

    def members(self, community: int) -> list[str]:
        return [self.node_ids[i] for i in np.flatnonzero(self.assignment == community).tolist()]


def _relabel_by_size(comm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels, first, dense, sizes = np.unique(comm, return_index=True, return_inverse=True, return_counts=True)
    rank = np.lexsort((first, -sizes))
    new_id = np.empty(len(labels), dtype=np.int64)
    new_id[rank] = np.arange(len(labels))
    return new_id[dense.ravel()], sizes[rank]


def _single_run(graph: UndirectedGraph, resolution: float, m: float, rng, max_passes: int):
    flat = np.arange(graph.node_count, dtype=np.int64)
    levels = 0
    while levels < max_passes:
        # one pass: local moves on the original nodes from the current
        # partition, then aggregation while communities keep merging
        start = flat.copy()
        flat, u, v, w, n, gained, used = _multilevel(graph, flat, resolution, m, rng, max_passes - levels)
        levels += used
        if gained <= MIN_GAIN or np.array_equal(start, flat):
            break
    # Q of the final level's singleton partition equals Q of the flat partition
    loop = u == v
    deg = np.bincount(u, w, n) + np.bincount(v, w, n)
    q = float(w[loop].sum() / m - resolution * np.sum((deg / (2.0 * m)) ** 2))
    return flat, q, levels


def louvain(
    graph: UndirectedGraph,
    resolution: float = 1.0,
    seed: int = 0,
    max_passes: int = 100,
    restarts: int = DEFAULT_RESTARTS,
    threads: int = 1,
) -> CommunityPartition:
    """Louvain modularity maximisation.

    Each pass runs greedy local moves over a seeded random node order, then
    collapses communities into super-nodes.  A node moves to the first
    candidate community with strictly maximal gain, so ties keep it in place.
    Passes stop when one gains at most 1e-9 in modularity, nothing merges,
    or ``max_passes`` is reached.  Later passes restart the local moves on
    the original nodes from the current partition.

    ``restarts`` independent runs use visit orders drawn from the streams
    ``(seed, 0), (seed, 1), ...``; the partition with the highest Q wins,
    the earliest run on ties.  Runs may execute on ``threads`` workers
    without changing the result.
    """
    if graph.node_count == 0:
        raise DataError("louvain needs a non-empty graph")
    m = graph.total_weight
    if m <= 0:
        raise DataError("louvain needs at least one edge with positive weight")
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    def run(r):
        return _single_run(graph, float(resolution), m, np.random.default_rng([seed, r]), max_passes)

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(min(threads, restarts)) as pool:
            runs = list(pool.map(run, range(restarts)))
    else:
        runs = [run(r) for r in range(restarts)]
    best = runs[0]
    for cand in runs[1:]:
        if cand[1] > best[1] + MIN_GAIN:
            best = cand
    flat, q, levels = best
    assignment, sizes = _relabel_by_size(flat)
    return CommunityPartition(list(graph.node_ids), assignment, q, sizes, float(resolution), int(seed), levels)


# --------------------------------------------------------------------------
# Profiles
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CommunityProfile:
    community: int
    size: int
    fraction: float
    n_msi: int
    n_iv: int
    skipped_msi: int
    skipped_iv: int
    mean_msi: float | None
    mean_iv: float | None
    std_msi: float | None
    msi_mode: float | None
    msi_histogram: DensityCurve | None
    iv_histogram: DensityCurve | None

    def to_dict(self) -> dict:
        def curve(c):
            return None if c is None else {"grid": c.grid.tolist(), "density": c.density.tolist(), "bandwidth": c.bandwidth}

        return {
            "community": self.community,
            "size": self.size,
            "fraction": self.fraction,
            "n_msi": self.n_msi,
            "n_iv": self.n_iv,
            "skipped_msi": self.skipped_msi,
            "skipped_iv": self.skipped_iv,
            "mean_msi": self.mean_msi,
            "mean_iv": self.mean_iv,
            "std_msi": self.std_msi,
            "msi_mode": self.msi_mode,
            "msi_histogram": curve(self.msi_histogram),
            "iv_histogram": curve(self.iv_histogram),
        }


def _shared_grid(values, bandwidth: float, points: int = 256):
    if not len(values):
        return None
    lo, hi = min(values), max(values)
    return np.linspace(lo - GRID_PAD * bandwidth, hi + GRID_PAD * bandwidth, points)


def profile_communities(
    partition: CommunityPartition,
    user_msi: Mapping[str, float],
    iv_scores: Mapping[str, float],
    top_n: int = 2,
    bandwidth: float = DEFAULT_BANDWIDTH,
) -> list[CommunityProfile]:
    """MSI / IV summaries and KDE curves for the ``top_n`` largest communities.

    Members without an MSI (or IV) score are skipped for that statistic and
    counted.  All communities share one MSI grid and one IV grid so their
    curves are directly comparable.
    """
    iv_values = {k: float(getattr(s, "iv", s)) for k, s in iv_scores.items()}
    msi_grid = _shared_grid(list(user_msi.values()), bandwidth)
    iv_grid = _shared_grid([-1.0, 1.0], bandwidth)
    out = []
    for c in range(min(top_n, partition.n_communities)):
        members = partition.members(c)
        msi = np.array([user_msi[m] for m in members if m in user_msi], dtype=float)
        iv = np.array([iv_values[m] for m in members if m in iv_values], dtype=float)
        out.append(
            CommunityProfile(
                community=c,
                size=len(members),
                fraction=len(members) / partition.node_count,
                n_msi=len(msi),
                n_iv=len(iv),
                skipped_msi=len(members) - len(msi),
                skipped_iv=len(members) - len(iv),
                mean_msi=float(msi.mean()) if len(msi) else None,
                mean_iv=float(iv.mean()) if len(iv) else None,
                std_msi=float(msi.std()) if len(msi) else None,
                msi_mode=kde_1d(msi, bandwidth, msi_grid).mode() if len(msi) else None,
                msi_histogram=kde_1d(msi, bandwidth, msi_grid) if len(msi) else None,
                iv_histogram=kde_1d(iv, bandwidth, iv_grid) if len(iv) else None,
            )
        )
    return out
