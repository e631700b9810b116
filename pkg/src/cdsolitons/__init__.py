"""Darboux-dressed solitons of the generalized coupled dispersionless system."""

from .darboux import SolutionHandle, darboux_iterate, darboux_step, quasidet_psi, quasidet_S
from .model import SpectralStep, SystemConfig, su2_config, vacuum_seed, validate_config
from .quasidet import block_quasidet, commutative_ratio, quasideterminant
from .su2 import ScalarSolution, ScalarSpectralPoint, scalar_nfold, sine_gordon
from .verify import FieldGrid, Grid, ResidualReport

__version__ = "0.1.0"
