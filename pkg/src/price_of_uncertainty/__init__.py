"""Price of uncertainty in DC optimal power flow.

Compares a chance-constrained OPF solved once over affine PCE policies with
the in-hindsight OPF solved for every demand realization, through the total
variational distance between their generation laws.
"""
from .ccopf import ChanceSpec, Policy, policy_density, satisfaction_probability, solve_ccopf, violation_probability
from .dcopf import ArgminCaseSplit, Bus, Network, argmin, build_qp, case_c1, case_c2, closed_form_argmin
from .errors import (DegeneratePolicy, DomainError, InfeasibleProblem, InfeasibleTightening,
                     PriceOfUncertaintyError, SingularMatrix, StageError, UnsupportedDistribution,
                     UnsupportedTopology)
from .hopf import HopfEmpirical, analytic_hopf_density, run_hopf
from .linalg_qp import QpProblem, QpSolution, solve_box_qp, solve_equality_qp, solve_linear
from .metrics import TvdReport, histogram_density, tvd, violation_mass
from .pce import Basis, PceVector, basis_for, pce_of_demand, permutation_equivalence_check
from .stochastics import Distribution1D, MixedDensity1D, beta, dirac, gaussian, uniform

__version__ = "0.1.0"
