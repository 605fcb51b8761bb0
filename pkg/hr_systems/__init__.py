"""Hamilton-Randers systems: geometry, flows, dynamics, ensembles and checks."""
from .errors import HRError
from .geometry import (
    BetaField, ConstantBeta, HyperboloidSampler, LinearBeta, LorentzMetric, ObserverFrame,
    PhasePoint, RandersStructure, SinusoidalBeta, averaged_metric, fundamental_tensor, hr_value,
)
from .flow import KappaSchedule, commutation_check, ht_classical, metastable_residual, t_inversion, ut_deform
from .dynamics import KinematicLimits, Trajectory, apparent_celerity, integrate, kinematics_check
from .ensemble import (
    CycleSettings, GridSpec, MoleculeEnsemble, assemble_wavefunction, correlation_bound,
    density_field, run_cycle, run_cycles, semi_period,
)
from .concentration import bound, collapse_metrics, empirical_concentration, empirical_lipschitz, sample_sphere
from .lipschitz import Box, certify_lipschitz_on_compact, newton_alpha, radial_decompose
from .quantization import build_operators, correspondence_check, heisenberg_step, quantum_hamiltonian

__version__ = '0.1.0'

__all__ = [
    'HRError',
    'BetaField', 'ConstantBeta', 'LinearBeta', 'SinusoidalBeta', 'LorentzMetric', 'ObserverFrame',
    'PhasePoint', 'RandersStructure', 'HyperboloidSampler', 'averaged_metric', 'fundamental_tensor', 'hr_value',
    'KappaSchedule', 'ut_deform', 't_inversion', 'ht_classical', 'metastable_residual', 'commutation_check',
    'KinematicLimits', 'Trajectory', 'integrate', 'kinematics_check', 'apparent_celerity',
    'MoleculeEnsemble', 'CycleSettings', 'GridSpec', 'run_cycle', 'run_cycles', 'density_field',
    'assemble_wavefunction', 'semi_period', 'correlation_bound',
    'sample_sphere', 'bound', 'empirical_concentration', 'empirical_lipschitz', 'collapse_metrics',
    'Box', 'certify_lipschitz_on_compact', 'radial_decompose', 'newton_alpha',
    'build_operators', 'quantum_hamiltonian', 'heisenberg_step', 'correspondence_check',
    '__version__',
]
