"""Sector-exact simulation of a 2+1D U(1) quantum link model.

Square-lattice gauge theory with spin-1/2 links, hardcore bosonic matter,
staggered mass, linear electric field and a tunable plaquette term.
The dynamically reachable sector of a seed string state is enumerated
exactly, so real-time dynamics, Trotter circuits and shot-based
measurement pipelines all run at desk scale.
"""

from .lattice import LatticeGeometry, Plaquette, build_lattice
from .configspace import (
    Configuration,
    GaussCharges,
    Move,
    SectorBasis,
    all_moves,
    apply_move,
    diagonal_string_path,
    enumerate_sector,
    gauss_residuals,
    initial_string_state,
    load_sector,
    save_sector,
)

__version__ = "0.1.0"
