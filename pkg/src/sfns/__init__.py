"""Symplectic representations of incompressible flow.

Modules:

- ``grid``: periodic-box fields, spectral operators, Leray projection, SFNS1 I/O
- ``radial``: radial profiles, exact radial derivative towers, radial ODE systems
- ``frames``: (1,1), (1,2) and (2,2) representations, synthesis and recovery
- ``catalog``: exact Navier-Stokes and static Euler solutions
- ``verify``: residual checks, finite-difference oracles, energy balance
- ``evolve``: pseudo-spectral Hasegawa-Mima, Navier-Stokes and heat runs
- ``symmetry``: anisotropy diagnostics and persistence/breaking experiments
- ``cli``: the ``sfns`` command
"""

from .frames import RepKind, SymplecticRep, recover_potentials, synthesize
from .grid import Grid, GridField, build_grid

__version__ = "0.1.0"

__all__ = ["Grid", "GridField", "build_grid", "RepKind", "SymplecticRep", "synthesize", "recover_potentials"]
