"""Correlation spreading after quantum quenches in 1D lattice models.

Three engines cross-validate each other: closed-form quasiparticle
fields (``analytic``), tensor-network evolution (``mps``/``evolve``)
and exact diagonalization (``oracle``).  ``harness`` orchestrates runs,
front tracking, fits and the command line interface.
"""

from quenchcone import analytic, evolve, harness, models, mps, oracle, spectra

__all__ = ["models", "spectra", "analytic", "mps", "evolve", "oracle", "harness"]
__version__ = "0.1.0"
