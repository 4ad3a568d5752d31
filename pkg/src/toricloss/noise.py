"""Independent bit-flip noise and syndrome extraction."""

from __future__ import annotations

import numpy as np

from .degrade import LossPattern
from .lattice import Lattice


def sample_errors(
    lattice: Lattice,
    loss: LossPattern | None,
    p_comp: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Flip each surviving qubit independently with probability p_comp.

    Lost qubits never carry an error flag; their state is gone rather
    than flipped. Returns an (n_qubits,) bool mask.
    """
    if not 0.0 <= p_comp <= 1.0:
        raise ValueError("p_comp must lie in [0, 1]")
    error = rng.random(lattice.n_qubits) < p_comp
    if loss is not None:
        error &= ~loss.lost
    return error


def errors_from_uniforms(u: np.ndarray, loss: LossPattern | None, p_comp: float) -> np.ndarray:
    """Error mask from pre-drawn uniforms (common random numbers)."""
    if not 0.0 <= p_comp <= 1.0:
        raise ValueError("p_comp must lie in [0, 1]")
    error = u < p_comp
    if loss is not None:
        error = error & ~loss.lost
    return error


def compute_syndrome(lattice: Lattice, error: np.ndarray) -> np.ndarray:
    """Plaquette check outcomes: True where an odd number of the four
    incident qubits are flipped."""
    return lattice.syndrome(error)
