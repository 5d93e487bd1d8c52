"""spikelab: spike ensembles, Robin functions, and reduced-energy landscapes
for critical Schrodinger systems on bounded 4-d domains."""

__version__ = "0.1.0"

from .bubble import BubbleParams, bubble_derivative, bubble_value
from .constants import ConstantsTable, TABLE, radial_integral, sigma_entry
from .domains import (BallDomain, Domain, DumbbellDomain, PerforatedDomain,
                      domain_from_dict, domain_from_file)
from .green_robin import (HarmonicCorrector, RobinEvaluator, SolverConfig,
                          brouwer_degree, find_robin_critical_points)
from .projection import (ProjectedBubble, project_bubble, project_derivative,
                         projection_defect)
from .quadrature import (AsymptoticFitReport, QuadratureSpec,
                         integrate, integrate_bubble_power,
                         interaction_integral, interaction_norms,
                         taylor_bound_check)
from .radial_solver import (RadialProfile, concentration_study, lambda1_ball,
                            shoot, solve_ball)
from .reduced_energy import (CriticalPointReport, EnergyBreakdown,
                             SpikeEnsemble, beta_admissible, critical_d,
                             energy_terms_asymptotic, energy_terms_quadrature,
                             psi, psi_grad, remainder_budget,
                             solve_reduced_system)

__all__ = [name for name in dir() if not name.startswith("_")]
