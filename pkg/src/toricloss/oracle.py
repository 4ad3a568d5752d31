"""Brute-force references: exhaustive matching enumeration, the exact
fair-sampling failure expectation, and a solver presentation-bias probe.

These are desk-scale checks, deliberately written for clarity over
speed. The enumeration caps at 12 nodes (10,395 matchings).
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .degrade import DegradedLattice
from .homology import close_with_lost, homology_class
from .lattice import Lattice
from .matching import (
    Matching,
    SyndromeGraph,
    _TIE_RTOL,
    build_syndrome_graph,
    matching_to_correction,
)

MAX_ENUM_NODES = 12


@dataclass(frozen=True)
class MatchingEnsemble:
    """Every perfect matching of a syndrome graph, with per-matching
    total distance, total effective weight and degeneracy product D_M.

    minimum_indices selects the minimum-distance matchings (within tie
    tolerance); D_E is the sum of their D_M and normalizes the fair
    sampling distribution D_M / D_E.
    """

    pairings: tuple[tuple[tuple[int, int], ...], ...]
    distances: np.ndarray
    effective_weights: np.ndarray
    log_D_M: np.ndarray
    minimum_indices: tuple[int, ...]
    D_E: float

    @property
    def D_M(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_D_M)

    def fair_probabilities(self) -> np.ndarray:
        """Selection probability of each matching under fair sampling:
        D_M / D_E on the minimum-distance subset, 0 elsewhere."""
        p = np.zeros(len(self.pairings))
        idx = list(self.minimum_indices)
        lw = self.log_D_M[idx]
        lw = np.exp(lw - lw.max())
        p[idx] = lw / lw.sum()
        return p


def _all_pairings(items: tuple[int, ...]):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, second in enumerate(rest):
        remaining = rest[:i] + rest[i + 1 :]
        for sub in _all_pairings(remaining):
            yield ((first, second),) + sub


def enumerate_matchings(graph: SyndromeGraph) -> MatchingEnsemble:
    """All perfect matchings of the syndrome graph, exhaustively."""
    k = graph.n_nodes
    if k > MAX_ENUM_NODES:
        raise ValueError(f"enumeration limited to {MAX_ENUM_NODES} nodes, got {k}")
    if k % 2:
        raise ValueError("cannot perfectly match an odd number of nodes")
    eff = graph.effective()
    pairings = []
    dist = []
    effw = []
    logdm = []
    for pairing in _all_pairings(tuple(range(k))):
        pairings.append(pairing)
        dist.append(sum(graph.d[i, j] for i, j in pairing))
        effw.append(sum(eff[i, j] for i, j in pairing))
        logdm.append(sum(graph.logD[i, j] for i, j in pairing))
    dist = np.asarray(dist)
    effw = np.asarray(effw)
    logdm = np.asarray(logdm)
    if len(dist):
        dmin = dist.min()
        tol = _TIE_RTOL * max(1.0, abs(dmin))
        minimum = tuple(np.flatnonzero(dist <= dmin + tol))
        lw = logdm[list(minimum)]
        d_e = float(np.exp(lw - lw.max()).sum() * np.exp(min(lw.max(), 709.0)))
    else:
        minimum = ()
        d_e = 0.0
    return MatchingEnsemble(
        pairings=tuple(pairings),
        distances=dist,
        effective_weights=effw,
        log_D_M=logdm,
        minimum_indices=minimum,
        D_E=d_e,
    )


def ensemble_minimum_weight(ensemble: MatchingEnsemble) -> float:
    """Smallest total effective weight over all matchings."""
    if not len(ensemble.effective_weights):
        return 0.0
    return float(ensemble.effective_weights.min())


def _bundle_members(degraded: DegradedLattice) -> list[np.ndarray]:
    members = [[] for _ in range(len(degraded.bundle_count))]
    for q, b in enumerate(degraded.qubit_bundle):
        if b >= 0:
            members[b].append(q)
    return [np.asarray(m) for m in members]


def _random_shortest_path_lossless(
    L: int, a: np.ndarray, b: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Uniformly random monotone staircase between two plaquettes,
    choosing a random winding on exact half-torus ties."""
    r, c = int(a[0]), int(a[1])
    dr = (int(b[0]) - r) % L
    dc = (int(b[1]) - c) % L
    if dr > L - dr or (2 * dr == L and rng.random() < 0.5):
        nr, sr = L - dr, -1
    else:
        nr, sr = dr, 1
    if dc > L - dc or (2 * dc == L and rng.random() < 0.5):
        nc, sc = L - dc, -1
    else:
        nc, sc = dc, 1
    moves = ["r"] * nr + ["c"] * nc
    rng.shuffle(moves)
    n2 = L * L
    out = np.empty(len(moves), dtype=np.int64)
    for k, mv in enumerate(moves):
        if mv == "r":
            row = r if sr > 0 else (r - 1) % L
            out[k] = n2 + row * L + c
            r = (r + sr) % L
        else:
            col = c if sc > 0 else (c - 1) % L
            out[k] = r * L + col
            c = (c + sc) % L
    return out


def _random_shortest_path_lossy(
    graph: SyndromeGraph, i: int, j: int, rng: np.random.Generator,
    members: list[np.ndarray],
) -> np.ndarray:
    """Random shortest path on the contracted graph: a random walk down
    the shortest-path DAG toward the target, with a random bundle member
    materializing each hop."""
    deg = graph.degraded
    target = graph.nodes[j]
    n = deg.n_super
    dist_t = np.full(n, np.inf)
    dist_t[target] = 0.0
    heap = [(0.0, int(target))]
    done = np.zeros(n, dtype=bool)
    while heap:
        d_u, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for e in range(deg.adj_indptr[u], deg.adj_indptr[u + 1]):
            v = deg.adj_indices[e]
            nd = d_u + deg.bundle_weight[deg.adj_bundle[e]]
            if nd < dist_t[v]:
                dist_t[v] = nd
                heapq.heappush(heap, (nd, int(v)))
    qubits = []
    u = int(graph.nodes[i])
    while u != target:
        tol = _TIE_RTOL * max(1.0, dist_t[u])
        options = []
        for e in range(deg.adj_indptr[u], deg.adj_indptr[u + 1]):
            v = deg.adj_indices[e]
            b = deg.adj_bundle[e]
            if abs(deg.bundle_weight[b] + dist_t[v] - dist_t[u]) <= tol:
                options.append((int(v), int(b)))
        v, b = options[rng.integers(len(options))]
        qubits.append(int(members[b][rng.integers(len(members[b]))]))
        u = v
    return np.asarray(qubits, dtype=np.int64)


def _matching_outcome(
    lattice: Lattice,
    degraded: DegradedLattice,
    graph: SyndromeGraph,
    pairing: tuple[tuple[int, int], ...],
    error: np.ndarray,
) -> bool:
    corr = np.zeros(lattice.n_qubits, dtype=bool)
    for i, j in pairing:
        corr[graph.rep_path(i, j)] ^= True
    resid = error ^ corr
    closed = close_with_lost(degraded, resid)
    wrap = homology_class(lattice, closed)
    return wrap[0] or wrap[1]


def exact_failure_expectation(
    lattice: Lattice,
    degraded: DegradedLattice,
    error: np.ndarray,
    n_path_samples: int = 3,
    rng: np.random.Generator | None = None,
) -> float:
    """Expected failure under fair sampling of minimum-distance matchings.

    Returns sum over minimum-distance matchings M' of O(E, M') * D_M'/D_E
    where O is 1 iff the residual chain is homologically nontrivial. The
    assumption that O is constant across a matching's degenerate shortest
    paths is spot-checked by evaluating n_path_samples random degenerate
    paths per matching; a violation raises RuntimeError.
    """
    error = np.asarray(error, dtype=bool)
    syndrome = lattice.syndrome(error)
    graph = build_syndrome_graph(degraded, syndrome, 0.0)
    if graph.n_nodes == 0:
        return 0.0
    ensemble = enumerate_matchings(graph)
    probs = ensemble.fair_probabilities()
    if rng is None:
        rng = np.random.default_rng(0)
    members = None
    if degraded.loss.n_lost > 0:
        members = _bundle_members(degraded)

    expectation = 0.0
    for idx in ensemble.minimum_indices:
        pairing = ensemble.pairings[idx]
        o_rep = _matching_outcome(lattice, degraded, graph, pairing, error)
        for _ in range(n_path_samples):
            corr = np.zeros(lattice.n_qubits, dtype=bool)
            for i, j in pairing:
                if members is None:
                    path = _random_shortest_path_lossless(
                        graph.L, graph._coords[i], graph._coords[j], rng
                    )
                else:
                    path = _random_shortest_path_lossy(graph, i, j, rng, members)
                corr[path] ^= True
            closed = close_with_lost(degraded, error ^ corr)
            wrap = homology_class(lattice, closed)
            if (wrap[0] or wrap[1]) != o_rep:
                raise RuntimeError(
                    "failure outcome varies across degenerate shortest paths"
                )
        if o_rep:
            expectation += probs[idx]
    return float(expectation)


def fair_failure_frequency(
    lattice: Lattice,
    degraded: DegradedLattice,
    error: np.ndarray,
    n_draws: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo counterpart of exact_failure_expectation: draw
    matchings with probability D_M / D_E and report the failure rate."""
    error = np.asarray(error, dtype=bool)
    syndrome = lattice.syndrome(error)
    graph = build_syndrome_graph(degraded, syndrome, 0.0)
    if graph.n_nodes == 0:
        return 0.0
    ensemble = enumerate_matchings(graph)
    probs = ensemble.fair_probabilities()
    outcomes = np.array(
        [
            _matching_outcome(lattice, degraded, graph, ensemble.pairings[i], error)
            for i in range(len(ensemble.pairings))
        ],
        dtype=float,
    )
    draws = rng.choice(len(probs), size=n_draws, p=probs)
    return float(outcomes[draws].mean())


def presentation_bias_test(graph: SyndromeGraph, solver) -> dict:
    """Run the solver on every vertex-label permutation of a 4-node
    instance; histogram the returned matchings in original labels."""
    if graph.n_nodes != 4:
        raise ValueError("presentation bias test expects a 4-node instance")
    counts: dict = {}
    for perm in itertools.permutations(range(4)):
        p = np.asarray(perm)
        permuted = SyndromeGraph(
            nodes=graph.nodes[p],
            d=graph.d[np.ix_(p, p)],
            D=graph.D[np.ix_(p, p)],
            logD=graph.logD[np.ix_(p, p)],
            tau=graph.tau,
            L=graph.L,
            degraded=graph.degraded,
            _coords=None if graph._coords is None else graph._coords[p],
        )
        result: Matching = solver(permuted)
        # map back: position a in the permuted graph is position perm[a]
        key = frozenset(
            frozenset((int(p[i]), int(p[j]))) for i, j in result.pairs
        )
        counts[key] = counts.get(key, 0) + 1
    return counts
