"""Loss-tolerant error correction on the toric code: lattice model,
degraded-lattice decoding, and Monte Carlo threshold estimation."""

__version__ = "0.1.0"
