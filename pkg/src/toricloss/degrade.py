"""Qubit loss handling: superplaquette formation, superedge weights,
and loss-percolation detection.

Losing a qubit makes its two adjacent plaquette checks individually
unusable; their product is still measurable, so adjacent plaquettes merge
into superplaquettes across every lost qubit. Where two superplaquettes
meet they share a bundle of n surviving qubits (a superedge); for
decoding, the bundle acts as one edge whose flip probability aggregates
the odd-parity combinations of its members. Edges interior to a single
superplaquette contribute nothing to the syndrome and get weight zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lattice import Lattice


@dataclass(frozen=True)
class LossPattern:
    """A set of lost qubits together with the rate that generated it."""

    lost: np.ndarray  # (n_qubits,) bool
    p_loss: float

    @property
    def n_lost(self) -> int:
        return int(self.lost.sum())


def apply_losses(lattice: Lattice, p_loss: float, rng: np.random.Generator) -> LossPattern:
    """Mark each qubit independently lost with probability p_loss."""
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError("p_loss must lie in [0, 1]")
    lost = rng.random(lattice.n_qubits) < p_loss
    return LossPattern(lost=lost, p_loss=float(p_loss))


def losses_from_uniforms(u: np.ndarray, p_loss: float) -> LossPattern:
    """Loss pattern from pre-drawn uniforms; thresholding the same draw at
    different rates yields nested patterns (common random numbers)."""
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError("p_loss must lie in [0, 1]")
    return LossPattern(lost=u < p_loss, p_loss=float(p_loss))


@njit(cache=True)
def _merge_lost(endpoints, lost, n_plaq):
    """Union-find over plaquettes across lost edges.

    Returns (partition, forest): the partition labels each plaquette with
    the smallest member of its group, and forest marks the lost qubits
    that first joined two groups (a spanning forest of each group).
    """
    par = np.arange(n_plaq)
    forest = np.zeros(endpoints.shape[0], dtype=np.uint8)
    for q in range(endpoints.shape[0]):
        if not lost[q]:
            continue
        a = endpoints[q, 0]
        b = endpoints[q, 1]
        while par[a] != a:
            par[a] = par[par[a]]
            a = par[a]
        while par[b] != b:
            par[b] = par[par[b]]
            b = par[b]
        if a != b:
            forest[q] = 1
            if a < b:
                par[b] = a
            else:
                par[a] = b
    for p in range(n_plaq):
        r = p
        while par[r] != r:
            r = par[r]
        par[p] = r
    return par, forest


@njit(cache=True)
def _winding_search(endpoints, steps, mask, n_plaq):
    """Union-find with per-node displacement tracking over the masked edges.

    Returns (winds_rows, winds_cols): whether the masked subgraph contains
    a cycle with net row / column displacement around the torus.
    """
    par = np.arange(n_plaq)
    dr = np.zeros(n_plaq, dtype=np.int64)
    dc = np.zeros(n_plaq, dtype=np.int64)
    path = np.empty(n_plaq, dtype=np.int64)
    winds_r = False
    winds_c = False

    for q in range(endpoints.shape[0]):
        if not mask[q]:
            continue
        a = endpoints[q, 0]
        b = endpoints[q, 1]
        sr = steps[q, 0]
        sc = steps[q, 1]

        # find(a) with offset-aware path compression
        sp = 0
        r = a
        while par[r] != r:
            path[sp] = r
            sp += 1
            r = par[r]
        for i in range(sp - 1, -1, -1):
            u = path[i]
            dr[u] += dr[par[u]]
            dc[u] += dc[par[u]]
            par[u] = r
        ra = r

        sp = 0
        r = b
        while par[r] != r:
            path[sp] = r
            sp += 1
            r = par[r]
        for i in range(sp - 1, -1, -1):
            u = path[i]
            dr[u] += dr[par[u]]
            dc[u] += dc[par[u]]
            par[u] = r
        rb = r

        if ra == rb:
            # closing a cycle; any nonzero net displacement wraps the torus
            if dr[a] + sr - dr[b] != 0:
                winds_r = True
            if dc[a] + sc - dc[b] != 0:
                winds_c = True
        else:
            # displacement of one root relative to the other via this edge
            par[rb] = ra
            dr[rb] = dr[a] + sr - dr[b]
            dc[rb] = dc[a] + sc - dc[b]
    return winds_r, winds_c


def _qubit_steps(lattice: Lattice) -> np.ndarray:
    """Unwrapped (row, col) displacement from first to second endpoint of
    each qubit: (0, 1) for horizontal, (1, 0) for vertical qubits."""
    n = lattice.n_plaquettes
    steps = np.zeros((2 * n, 2), dtype=np.int64)
    steps[:n, 1] = 1
    steps[n:, 0] = 1
    return steps


def form_superplaquettes(lattice: Lattice, loss: LossPattern) -> np.ndarray:
    """Partition plaquettes into superplaquettes across lost qubits.

    Returns an (n_plaquettes,) array mapping each plaquette to the
    smallest plaquette id in its superplaquette.
    """
    lost = np.asarray(loss.lost, dtype=bool)
    if lost.shape != (lattice.n_qubits,):
        raise ValueError("loss mask has wrong shape")
    partition, _ = _merge_lost(lattice.qubit_endpoints, lost, lattice.n_plaquettes)
    return partition


def detect_loss_percolation(lattice: Lattice, loss: LossPattern) -> tuple[bool, bool]:
    """Which homology directions have lost their surviving winding cycles.

    Returns (blocked_v, blocked_h): blocked_v is True iff the surviving
    qubits contain no cycle winding the torus in the vertical (row)
    direction, i.e. the lost qubits cut every such cycle; blocked_h is
    the horizontal counterpart.
    """
    survive = ~np.asarray(loss.lost, dtype=bool)
    winds_r, winds_c = _winding_search(
        lattice.qubit_endpoints, _qubit_steps(lattice), survive, lattice.n_plaquettes
    )
    return (not winds_r, not winds_c)


def edge_flip_probability(n: int, p_comp: float) -> float:
    """Probability that an odd number of n independent p_comp flips occur.

    This is the effective flip probability of a superedge bundling n
    qubits: (1 - (1 - 2 p)^n) / 2.
    """
    if n < 1 or int(n) != n:
        raise ValueError("bundle size must be a positive integer")
    if not 0.0 <= p_comp <= 0.5:
        raise ValueError("p_comp must lie in [0, 1/2]")
    return 0.5 * (1.0 - (1.0 - 2.0 * p_comp) ** int(n))


def bundle_weight(n: int, p_comp: float) -> float:
    """Log-odds weight ln((1-p)/p) of a superedge with n qubits."""
    p = edge_flip_probability(n, p_comp)
    if p <= 0.0 or p >= 0.5:
        raise ValueError("flip probability must lie in (0, 1/2) for a finite weight")
    return float(np.log((1.0 - p) / p))


@dataclass(frozen=True)
class DegradedLattice:
    """Superplaquette structure of a lattice with losses, plus the
    restored-lattice edge weights used for decoding.

    Superplaquettes are indexed compactly 0..n_super-1 in order of their
    smallest member plaquette. Bundles (superedges) are the groups of
    surviving parallel qubits joining two superplaquettes; each binds
    ``count`` qubits, carries one ``weight``, and names a representative
    qubit (the smallest id) used when materializing correction paths.
    """

    lattice: Lattice
    loss: LossPattern
    p_comp: float
    partition: np.ndarray        # (n_plaq,) plaquette -> smallest member id
    super_index: np.ndarray      # (n_plaq,) plaquette -> compact index
    super_sizes: np.ndarray      # (n_super,) plaquette counts
    bundle_nodes: np.ndarray     # (n_bundles, 2) compact superplaquette pair
    bundle_count: np.ndarray     # (n_bundles,) qubit multiplicity
    bundle_rep: np.ndarray       # (n_bundles,) representative qubit id
    bundle_weight: np.ndarray    # (n_bundles,) restored weight
    internal: np.ndarray         # (n_qubits,) bool: surviving, same superplaquette
    qubit_bundle: np.ndarray     # (n_qubits,) bundle index, -1 for lost/internal
    lost_forest: np.ndarray      # (n_qubits,) bool: lost qubits spanning each group
    blocked: tuple[bool, bool]
    # contracted-graph CSR adjacency over compact superplaquette indices
    adj_indptr: np.ndarray = field(repr=False)
    adj_indices: np.ndarray = field(repr=False)
    adj_bundle: np.ndarray = field(repr=False)

    @property
    def n_super(self) -> int:
        return len(self.super_sizes)

    def restored_weight(self, q: int) -> float:
        """Weight of a surviving qubit: 0 if internal, else its bundle's."""
        if self.loss.lost[q]:
            raise ValueError("lost qubits carry no weight")
        b = self.qubit_bundle[q]
        if b < 0:
            return 0.0
        return float(self.bundle_weight[b])

    def super_syndrome(self, plaquette_syndrome: np.ndarray) -> np.ndarray:
        """Fold a plaquette syndrome to superplaquette parities."""
        s = np.asarray(plaquette_syndrome, dtype=bool)
        counts = np.bincount(self.super_index[s], minlength=self.n_super)
        return (counts % 2).astype(bool)


def restored_weights(
    lattice: Lattice,
    loss: LossPattern,
    p_comp: float,
    partition: np.ndarray | None = None,
) -> DegradedLattice:
    """Build the full degraded-lattice description for decoding.

    Requires 0 < p_comp < 1/2 so every superedge weight is positive and
    finite. Internal edges get weight zero by construction.
    """
    if not 0.0 < p_comp < 0.5:
        raise ValueError("p_comp must lie in (0, 1/2)")
    lost = np.asarray(loss.lost, dtype=bool)
    forest = None
    if partition is None:
        partition, forest8 = _merge_lost(
            lattice.qubit_endpoints, lost, lattice.n_plaquettes
        )
        forest = forest8.astype(bool)
    else:
        _, forest8 = _merge_lost(lattice.qubit_endpoints, lost, lattice.n_plaquettes)
        forest = forest8.astype(bool)

    roots = np.unique(partition)
    n_super = len(roots)
    compact = np.empty(lattice.n_plaquettes, dtype=np.int64)
    compact[roots] = np.arange(n_super)
    super_index = compact[partition]
    super_sizes = np.bincount(super_index, minlength=n_super)

    qubit_ids = np.arange(lattice.n_qubits)
    alive = ~lost
    ends = lattice.qubit_endpoints
    sa = super_index[ends[:, 0]]
    sb = super_index[ends[:, 1]]
    external = alive & (sa != sb)
    internal = alive & (sa == sb)

    lo = np.minimum(sa[external], sb[external])
    hi = np.maximum(sa[external], sb[external])
    qid = qubit_ids[external]
    key = lo * n_super + hi
    order = np.argsort(key, kind="stable")
    key_s = key[order]
    if len(key_s):
        starts = np.flatnonzero(np.r_[True, np.diff(key_s) != 0])
    else:
        starts = np.empty(0, dtype=np.int64)
    counts = np.diff(np.r_[starts, len(key_s)])

    n_bundles = len(starts)
    bundle_nodes = np.empty((n_bundles, 2), dtype=np.int64)
    bundle_nodes[:, 0] = lo[order][starts]
    bundle_nodes[:, 1] = hi[order][starts]
    bundle_count = counts.astype(np.int64)
    # stable sort keeps qubit ids ascending within a bundle
    bundle_rep = qid[order][starts]

    pf = 0.5 * (1.0 - (1.0 - 2.0 * p_comp) ** bundle_count.astype(np.float64))
    weights = np.log1p(-pf) - np.log(pf)

    qubit_bundle = np.full(lattice.n_qubits, -1, dtype=np.int64)
    binder = np.zeros(len(key_s), dtype=np.int64)
    binder[starts] = 1
    if len(binder):
        binder[0] = 0
    qubit_bundle[qid[order]] = np.cumsum(binder)

    # symmetric CSR over compact indices, assembled without a python loop
    src = np.concatenate([bundle_nodes[:, 0], bundle_nodes[:, 1]])
    dst = np.concatenate([bundle_nodes[:, 1], bundle_nodes[:, 0]])
    bid = np.concatenate([np.arange(n_bundles), np.arange(n_bundles)])
    half_order = np.argsort(src, kind="stable")
    indices = dst[half_order]
    adj_bundle = bid[half_order]
    indptr = np.zeros(n_super + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n_super), out=indptr[1:])

    blocked = detect_loss_percolation(lattice, loss)

    return DegradedLattice(
        lattice=lattice,
        loss=loss,
        p_comp=float(p_comp),
        partition=partition,
        super_index=super_index,
        super_sizes=super_sizes,
        bundle_nodes=bundle_nodes,
        bundle_count=bundle_count,
        bundle_rep=bundle_rep,
        bundle_weight=weights,
        internal=internal,
        qubit_bundle=qubit_bundle,
        lost_forest=forest,
        blocked=blocked,
        adj_indptr=indptr,
        adj_indices=indices,
        adj_bundle=adj_bundle,
    )
