"""Homology classification of residual error chains.

A trial's residual chain C = E xor E' is classified by its winding
parities around the two torus directions, measured as crossing parities
against two fixed transversal cuts. Success means the trivial class
(0, 0): the residual is a product of local deformations.

With losses the decoded correction only closes C at superplaquette
granularity; close_with_lost completes it to a genuinely closed chain by
routing the leftover boundary pairs through lost qubits (which carry no
physical state, so this changes nothing observable).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .degrade import DegradedLattice
from .lattice import Lattice


class ChainNotClosedError(ValueError):
    """The supplied chain has a nonzero boundary."""


def homology_class(lattice: Lattice, chain: np.ndarray) -> tuple[bool, bool]:
    """Winding parities (wrap_v, wrap_h) of a closed chain.

    wrap_v counts crossings of a horizontal cut, i.e. vertical winding;
    wrap_h counts crossings of a vertical cut. Raises ChainNotClosedError
    if any plaquette sees odd boundary.
    """
    c = np.asarray(chain, dtype=bool)
    if c.shape != (lattice.n_qubits,):
        raise ValueError("chain mask has wrong shape")
    if lattice.syndrome(c).any():
        raise ChainNotClosedError("chain has nonzero boundary")
    wrap_v = bool(c[lattice.row_cut()].sum() % 2)
    wrap_h = bool(c[lattice.col_cut()].sum() % 2)
    return wrap_v, wrap_h


@njit(cache=True)
def _route_boundary(endpoints, forest_qubits, parity, n_plaq):
    """Toggle forest edges so every odd-parity plaquette is paired away.

    Processes each tree bottom-up: an edge is taken iff its subtree holds
    odd total parity. Returns (take mask over forest_qubits, ok); ok is
    False if some tree is left with odd parity, i.e. the parity was not
    even per group.
    """
    m = len(forest_qubits)
    deg = np.zeros(n_plaq, dtype=np.int64)
    for t in range(m):
        q = forest_qubits[t]
        deg[endpoints[q, 0]] += 1
        deg[endpoints[q, 1]] += 1
    indptr = np.zeros(n_plaq + 1, dtype=np.int64)
    for p in range(n_plaq):
        indptr[p + 1] = indptr[p] + deg[p]
    adj_node = np.empty(2 * m, dtype=np.int64)
    adj_edge = np.empty(2 * m, dtype=np.int64)
    cursor = indptr[:-1].copy()
    for t in range(m):
        q = forest_qubits[t]
        a = endpoints[q, 0]
        b = endpoints[q, 1]
        adj_node[cursor[a]] = b
        adj_edge[cursor[a]] = t
        cursor[a] += 1
        adj_node[cursor[b]] = a
        adj_edge[cursor[b]] = t
        cursor[b] += 1

    visited = np.zeros(n_plaq, dtype=np.uint8)
    odd = parity.copy()
    take = np.zeros(m, dtype=np.uint8)
    order = np.empty(n_plaq, dtype=np.int64)
    par_edge = np.full(n_plaq, -1, dtype=np.int64)
    par_node = np.full(n_plaq, -1, dtype=np.int64)
    stack = np.empty(n_plaq, dtype=np.int64)
    ok = True

    for root in range(n_plaq):
        if visited[root] or deg[root] == 0:
            continue
        n_ord = 0
        sp = 0
        stack[sp] = root
        sp += 1
        visited[root] = 1
        while sp > 0:
            sp -= 1
            v = stack[sp]
            order[n_ord] = v
            n_ord += 1
            for e in range(indptr[v], indptr[v + 1]):
                u = adj_node[e]
                if not visited[u]:
                    visited[u] = 1
                    par_edge[u] = adj_edge[e]
                    par_node[u] = v
                    stack[sp] = u
                    sp += 1
        # children precede parents in reversed preorder
        for i in range(n_ord - 1, 0, -1):
            v = order[i]
            if odd[v]:
                take[par_edge[v]] = 1
                odd[par_node[v]] = not odd[par_node[v]]
        if odd[root]:
            ok = False
    # plaquettes outside any tree must already be even
    for p in range(n_plaq):
        if deg[p] == 0 and parity[p]:
            ok = False
    return take, ok


def close_with_lost(degraded: DegradedLattice, chain: np.ndarray) -> np.ndarray:
    """Complete a superplaquette-closed chain to a closed chain by adding
    lost qubits inside each superplaquette."""
    lattice = degraded.lattice
    c = np.asarray(chain, dtype=bool)
    parity = lattice.syndrome(c)
    if not parity.any():
        return c
    forest_qubits = np.flatnonzero(degraded.lost_forest)
    take, ok = _route_boundary(
        lattice.qubit_endpoints, forest_qubits, parity, lattice.n_plaquettes
    )
    if not ok:
        raise ChainNotClosedError("chain is not closed at superplaquette level")
    closed = c.copy()
    closed[forest_qubits[take.astype(bool)]] ^= True
    return closed


def trial_failed(
    homology: tuple[bool, bool], loss_blocked: tuple[bool, bool]
) -> bool:
    """A trial fails iff the residual chain winds either direction or
    loss percolation blocked either direction."""
    return bool(homology[0] or homology[1] or loss_blocked[0] or loss_blocked[1])
