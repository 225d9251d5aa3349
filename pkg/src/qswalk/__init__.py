"""qswalk: quantum stochastic walks on graphs.

Simulation of Lindblad walk dynamics, microscopic golden-rule analysis of
which walk generators a register coupled to thermal reservoirs can actually
produce, and reservoir-engineering search for coupling coefficients that
realize target transfer rates without site dephasing.
"""

__version__ = "0.1.0"

from .bath import SpectralModel, thermal_rate
from .engineer import EngineeringProblem, EngineeringSolution, solve, validate_solution
from .errors import (ConfigInvalid, DegenerateSteadyState, DegenerateTransitions,
                     InvalidTarget, NotHermitian, QswalkError, SectorViolation,
                     ToleranceNotMet)
from .hilbert import (DensityMatrix, EigenSystem, HilbertSpace, Operator,
                      basis_state, eigendecompose, excitation_number,
                      hop_operator, local_operator, mixture, number_operator,
                      pure_state, state_label)
from .microscopic import (BathChannel, BathCouplingSpec, RateReport,
                          RealizabilityReport, analyze, brute_force_local_quantities,
                          check_decoupling, classify_realizability,
                          coupling_operator, dephasing_floor, golden_rule_rates,
                          local_pure_dephasing, local_rates, overlap_tensors,
                          vanishing_condition)
from .walk import (Graph, LindbladModel, PropagationResult, Superoperator,
                   classical_oracle, graph_hamiltonian, liouvillian, propagate,
                   qsw_model, steady_state, unvec, vec)

__all__ = [name for name in dir() if not name.startswith("_")]
