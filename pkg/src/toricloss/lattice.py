"""Toric code geometry on an L x L periodic square lattice.

Qubits live on the edges of the lattice, one horizontal and one vertical
qubit per site, so there are ``2 L**2`` qubits. Plaquette (Z-type)
stabilizers sit on the sites themselves and star (X-type) stabilizers on
the dual sites; both act on four qubits. Only X errors are tracked here,
so plaquettes are the syndrome-carrying checks and stars generate the
closed loops that leave every syndrome unchanged.

Index conventions, used everywhere in this package:

* site (r, c) -> plaquette index ``r * L + c``
* horizontal qubit h(r, c) = ``r * L + c`` joins plaquettes (r, c) and
  (r, c+1 mod L)
* vertical qubit v(r, c) = ``L**2 + r * L + c`` joins plaquettes (r, c)
  and (r+1 mod L, c)

A chain of qubits is viewed as a set of edges on the plaquette graph;
its boundary is the set of plaquettes touched an odd number of times.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Lattice:
    """Periodic L x L toric lattice with precomputed incidence tables.

    Parameters
    ----------
    L : int
        Linear size; must be at least 2.

    Attributes
    ----------
    n_qubits : int
        Number of edge qubits, ``2 * L**2``.
    n_plaquettes : int
        Number of plaquette checks, ``L**2``.
    qubit_endpoints : (n_qubits, 2) ndarray
        The two plaquettes adjacent to each qubit.
    plaquette_qubits : (n_plaquettes, 4) ndarray
        The four qubits each plaquette operator acts on.
    star_qubits : (n_plaquettes, 4) ndarray
        The four qubits of each star operator; as edge sets these are the
        elementary closed loops of the plaquette graph.
    """

    L: int
    qubit_endpoints: np.ndarray = field(init=False, repr=False, compare=False)
    plaquette_qubits: np.ndarray = field(init=False, repr=False, compare=False)
    star_qubits: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L = self.L
        if not isinstance(L, (int, np.integer)) or L < 2:
            raise ValueError("lattice size L must be an integer >= 2")
        n = L * L
        r, c = np.divmod(np.arange(n), L)
        cp = (c + 1) % L
        rp = (r + 1) % L
        cm = (c - 1) % L
        rm = (r - 1) % L

        endpoints = np.empty((2 * n, 2), dtype=np.int64)
        endpoints[:n, 0] = r * L + c
        endpoints[:n, 1] = r * L + cp
        endpoints[n:, 0] = r * L + c
        endpoints[n:, 1] = rp * L + c

        plaq = np.empty((n, 4), dtype=np.int64)
        plaq[:, 0] = r * L + c            # h(r, c)
        plaq[:, 1] = r * L + cm           # h(r, c-1)
        plaq[:, 2] = n + r * L + c        # v(r, c)
        plaq[:, 3] = n + rm * L + c       # v(r-1, c)

        star = np.empty((n, 4), dtype=np.int64)
        star[:, 0] = r * L + c            # h(r, c)
        star[:, 1] = rp * L + c           # h(r+1, c)
        star[:, 2] = n + r * L + c        # v(r, c)
        star[:, 3] = n + r * L + cp       # v(r, c+1)

        object.__setattr__(self, "qubit_endpoints", endpoints)
        object.__setattr__(self, "plaquette_qubits", plaq)
        object.__setattr__(self, "star_qubits", star)

    @property
    def n_qubits(self) -> int:
        return 2 * self.L * self.L

    @property
    def n_plaquettes(self) -> int:
        return self.L * self.L

    def horizontal_qubit(self, r: int, c: int) -> int:
        """Qubit joining plaquettes (r, c) and (r, c+1)."""
        L = self.L
        return (r % L) * L + (c % L)

    def vertical_qubit(self, r: int, c: int) -> int:
        """Qubit joining plaquettes (r, c) and (r+1, c)."""
        L = self.L
        return L * L + (r % L) * L + (c % L)

    def plaquette_index(self, r: int, c: int) -> int:
        L = self.L
        return (r % L) * L + (c % L)

    def plaquette_coords(self, p: int) -> tuple[int, int]:
        return divmod(int(p), self.L)

    def is_horizontal(self, q: int) -> bool:
        return int(q) < self.L * self.L

    def qubit_coords(self, q: int) -> tuple[str, int, int]:
        """Return ('h'|'v', r, c) for a qubit index."""
        n = self.L * self.L
        q = int(q)
        if q < n:
            r, c = divmod(q, self.L)
            return ("h", r, c)
        r, c = divmod(q - n, self.L)
        return ("v", r, c)

    def row_cut(self) -> np.ndarray:
        """All vertical qubits v(0, c): a closed cut crossed by any chain
        that winds around the lattice in the vertical direction."""
        L = self.L
        return L * L + np.arange(L, dtype=np.int64)

    def col_cut(self) -> np.ndarray:
        """All horizontal qubits h(r, 0): a closed cut crossed by any chain
        that winds around the lattice in the horizontal direction."""
        L = self.L
        return np.arange(L, dtype=np.int64) * L

    def syndrome(self, error_mask: np.ndarray) -> np.ndarray:
        """Plaquette syndrome of an X-error pattern.

        Parameters
        ----------
        error_mask : (n_qubits,) array_like of bool
            Which qubits carry an X error.

        Returns
        -------
        (n_plaquettes,) ndarray of bool
            True where the plaquette check anticommutes with the error,
            i.e. where an odd number of its four qubits are flipped.
        """
        error_mask = np.asarray(error_mask, dtype=bool)
        if error_mask.shape != (self.n_qubits,):
            raise ValueError("error mask has wrong shape")
        counts = error_mask[self.plaquette_qubits].sum(axis=1)
        return (counts % 2).astype(bool)
