"""Syndrome graph construction and degeneracy-aware minimum-weight matching.

Each pair of odd-parity superplaquettes gets a distance d_m (shortest
path through the restored weights), a shortest-path count D_m, and a
representative path used to materialize the correction. The matcher
minimizes sum of d_m - tau * ln(D_m): at tau = 0 this is plain
minimum-weight matching, at tau = 1 pairings backed by many equally
short error patterns are preferred.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import gammaln

from .blossom import matching_pairs, min_weight_perfect_matching as _mwpm_dense
from .degrade import DegradedLattice

_COUNT_CAP = np.int64(2) ** 62
_TIE_RTOL = 1e-9


def path_degeneracy_square(h: int, v: int) -> int:
    """Number of monotone staircase paths with h horizontal and v
    vertical steps: binomial(h + v, v)."""
    if h < 0 or v < 0:
        raise ValueError("step counts must be nonnegative")
    return math.comb(h + v, v)


def effective_weight(d: float, D: float, tau: float) -> float:
    """Degeneracy-corrected pair weight d - tau * ln(D)."""
    if D < 1:
        raise ValueError("path count must be at least 1")
    return d - tau * math.log(D)


@njit(cache=True)
def _dijkstra_counting(indptr, indices, ebundle, bweight, n, sources):
    """Single-source shortest paths with tie-tolerant path counting from
    each source, on the contracted superplaquette graph.

    Counts saturate at 2^62; a running log-count stays meaningful past
    that. Ties are merged when lengths agree to a relative 1e-9; a tie
    reaching an already-finalized node is dropped, so counts are a lower
    bound in pathological near-zero-weight graphs.
    """
    k = len(sources)
    dist = np.full((k, n), np.inf)
    cnt = np.zeros((k, n), dtype=np.int64)
    logc = np.full((k, n), -np.inf)
    pred_node = np.full((k, n), -1, dtype=np.int64)
    pred_bundle = np.full((k, n), -1, dtype=np.int64)

    cap_heap = indptr[n] + n + 4
    hkey = np.empty(cap_heap)
    hnode = np.empty(cap_heap, dtype=np.int64)
    done = np.empty(n, dtype=np.uint8)

    for si in range(k):
        s = sources[si]
        dist[si, s] = 0.0
        cnt[si, s] = 1
        logc[si, s] = 0.0
        done[:] = 0
        hsize = 0
        # push source
        hkey[0] = 0.0
        hnode[0] = s
        hsize = 1
        while hsize > 0:
            # pop min (key, node)
            dtop = hkey[0]
            u = hnode[0]
            hsize -= 1
            hkey[0] = hkey[hsize]
            hnode[0] = hnode[hsize]
            i = 0
            while True:
                l = 2 * i + 1
                r = l + 1
                m = i
                if l < hsize and (
                    hkey[l] < hkey[m] or (hkey[l] == hkey[m] and hnode[l] < hnode[m])
                ):
                    m = l
                if r < hsize and (
                    hkey[r] < hkey[m] or (hkey[r] == hkey[m] and hnode[r] < hnode[m])
                ):
                    m = r
                if m == i:
                    break
                hkey[i], hkey[m] = hkey[m], hkey[i]
                hnode[i], hnode[m] = hnode[m], hnode[i]
                i = m
            if done[u]:
                continue
            done[u] = 1
            du = dist[si, u]
            if dtop > du:
                continue
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                nd = du + bweight[ebundle[e]]
                dv = dist[si, v]
                scale = nd if nd > 1.0 else 1.0
                if nd < dv - _TIE_RTOL * scale:
                    dist[si, v] = nd
                    cnt[si, v] = cnt[si, u]
                    logc[si, v] = logc[si, u]
                    pred_node[si, v] = u
                    pred_bundle[si, v] = ebundle[e]
                    # push
                    j = hsize
                    hkey[j] = nd
                    hnode[j] = v
                    hsize += 1
                    while j > 0:
                        p = (j - 1) // 2
                        if hkey[j] < hkey[p] or (
                            hkey[j] == hkey[p] and hnode[j] < hnode[p]
                        ):
                            hkey[j], hkey[p] = hkey[p], hkey[j]
                            hnode[j], hnode[p] = hnode[p], hnode[j]
                            j = p
                        else:
                            break
                elif nd <= dv + _TIE_RTOL * scale and not done[v]:
                    c = cnt[si, v] + cnt[si, u]
                    if c < cnt[si, v] or c > _COUNT_CAP:
                        c = _COUNT_CAP
                    cnt[si, v] = c
                    a = logc[si, v]
                    b = logc[si, u]
                    if a < b:
                        a, b = b, a
                    logc[si, v] = a + math.log1p(math.exp(b - a))
    return dist, cnt, logc, pred_node, pred_bundle


@dataclass
class SyndromeGraph:
    """Complete graph over odd-parity superplaquettes.

    nodes holds compact superplaquette indices (equal to plaquette ids
    when nothing is lost). d, D and logD are (k, k) pairwise matrices;
    D saturates to float inf for astronomically degenerate pairs, logD
    stays finite.
    """

    nodes: np.ndarray
    d: np.ndarray
    D: np.ndarray
    logD: np.ndarray
    tau: float
    L: int
    degraded: DegradedLattice | None = field(default=None, repr=False)
    _coords: np.ndarray | None = field(default=None, repr=False)
    _pred_node: np.ndarray | None = field(default=None, repr=False)
    _pred_bundle: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def effective(self) -> np.ndarray:
        """Pairwise effective weights d - tau * logD."""
        w = self.d - self.tau * self.logD
        np.fill_diagonal(w, 0.0)
        return w

    def rep_path(self, i: int, j: int) -> np.ndarray:
        """Representative shortest path between nodes i and j, as qubit ids."""
        if self._pred_node is not None:
            qubits = []
            s = self.nodes[i]
            v = self.nodes[j]
            pn = self._pred_node[i]
            pb = self._pred_bundle[i]
            brep = self.degraded.bundle_rep
            while v != s:
                qubits.append(brep[pb[v]])
                v = pn[v]
            return np.asarray(qubits, dtype=np.int64)
        return _staircase_path(self.L, self._coords[i], self._coords[j])


def _signed_step(delta: int, L: int) -> tuple[int, int]:
    """Shortest signed displacement on a ring of size L; ties go positive."""
    delta %= L
    if delta <= L - delta:
        return delta, 1
    return L - delta, -1


def _staircase_path(L: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rows-first monotone path between plaquettes a and b on the full
    lattice, as qubit ids."""
    r, c = int(a[0]), int(a[1])
    nr, sr = _signed_step(int(b[0]) - r, L)
    nc, sc = _signed_step(int(b[1]) - c, L)
    n2 = L * L
    qubits = np.empty(nr + nc, dtype=np.int64)
    k = 0
    for _ in range(nr):
        # vertical qubit (r, c) joins rows r and r+1
        row = r if sr > 0 else (r - 1) % L
        qubits[k] = n2 + row * L + c
        k += 1
        r = (r + sr) % L
    for _ in range(nc):
        col = c if sc > 0 else (c - 1) % L
        qubits[k] = r * L + col
        k += 1
        c = (c + sc) % L
    return qubits


def build_syndrome_graph(
    degraded: DegradedLattice, syndrome: np.ndarray, tau: float
) -> SyndromeGraph:
    """Pairwise distances, path degeneracies and representative paths for
    the odd superplaquettes of a syndrome.

    The syndrome is given per plaquette and folded to superplaquettes
    here. With no losses everything is closed-form: distances are torus
    Manhattan distances scaled by the single-qubit weight and path counts
    are staircase binomials (doubled per direction whose wrap is tied).
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    lattice = degraded.lattice
    ssyn = degraded.super_syndrome(np.asarray(syndrome, dtype=bool))
    nodes = np.flatnonzero(ssyn)
    if len(nodes) % 2:
        raise ValueError("syndrome has odd total parity")
    k = len(nodes)
    L = lattice.L

    if degraded.loss.n_lost == 0:
        # compact superplaquette index equals plaquette id here
        r = nodes // L
        c = nodes % L
        ar = np.abs(r[:, None] - r[None, :])
        ac = np.abs(c[:, None] - c[None, :])
        dr = np.minimum(ar, L - ar)
        dc = np.minimum(ac, L - ac)
        np.fill_diagonal(dr, 0)
        np.fill_diagonal(dc, 0)
        w1 = math.log1p(-degraded.p_comp) - math.log(degraded.p_comp)
        d = (dr + dc) * w1
        logD = (
            gammaln(dr + dc + 1.0)
            - gammaln(dr + 1.0)
            - gammaln(dc + 1.0)
            + math.log(2.0) * ((2 * ar == L).astype(np.float64) + (2 * ac == L))
        )
        np.fill_diagonal(logD, 0.0)
        with np.errstate(over="ignore"):
            D = np.exp(logD)
        return SyndromeGraph(
            nodes=nodes,
            d=d,
            D=D,
            logD=logD,
            tau=float(tau),
            L=L,
            degraded=degraded,
            _coords=np.stack([r, c], axis=1),
        )

    dist, cnt, logc, pred_node, pred_bundle = _dijkstra_counting(
        degraded.adj_indptr,
        degraded.adj_indices,
        degraded.adj_bundle,
        degraded.bundle_weight,
        degraded.n_super,
        nodes,
    )
    d = dist[:, nodes]
    logD = logc[:, nodes]
    D = np.where(
        cnt[:, nodes] < _COUNT_CAP,
        cnt[:, nodes].astype(np.float64),
        np.exp(np.minimum(logD, 709.0)),
    )
    # enforce exact symmetry; counting is symmetric up to roundoff
    d = 0.5 * (d + d.T)
    logD = 0.5 * (logD + logD.T)
    D = np.maximum(D, D.T)
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(logD, 0.0)
    np.fill_diagonal(D, 1.0)
    return SyndromeGraph(
        nodes=nodes,
        d=d,
        D=D,
        logD=logD,
        tau=float(tau),
        L=L,
        degraded=degraded,
        _pred_node=pred_node,
        _pred_bundle=pred_bundle,
    )


@dataclass(frozen=True)
class Matching:
    """A perfect matching of the syndrome graph."""

    pairs: tuple[tuple[int, int], ...]  # index pairs into graph.nodes
    total_weight: float                 # sum of effective weights
    D_M: float                          # product of matched D_m
    log_D_M: float


def min_weight_perfect_matching(graph: SyndromeGraph) -> Matching:
    """Minimum effective weight perfect matching over the syndrome nodes."""
    k = graph.n_nodes
    if k == 0:
        return Matching(pairs=(), total_weight=0.0, D_M=1.0, log_D_M=0.0)
    if k % 2:
        raise ValueError("cannot perfectly match an odd number of nodes")
    eff = graph.effective()
    mate = _mwpm_dense(eff)
    pairs = matching_pairs(mate)
    total = float(sum(eff[i, j] for i, j in pairs))
    log_dm = float(sum(graph.logD[i, j] for i, j in pairs))
    with np.errstate(over="ignore"):
        dm = float(np.exp(log_dm)) if log_dm <= 709.0 else float("inf")
    return Matching(pairs=pairs, total_weight=total, D_M=dm, log_D_M=log_dm)


def matching_to_correction(graph: SyndromeGraph, matching: Matching) -> np.ndarray:
    """Materialize a matching as a qubit flip mask: the XOR of the
    representative paths of all matched pairs."""
    if graph.degraded is not None:
        n_qubits = graph.degraded.lattice.n_qubits
    else:
        n_qubits = 2 * graph.L * graph.L
    correction = np.zeros(n_qubits, dtype=bool)
    for i, j in matching.pairs:
        path = graph.rep_path(i, j)
        correction[path] ^= True
    return correction
