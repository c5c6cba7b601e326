"""Portfolio choice, liquidation and transition when the drift is learned.

Submodules:

- ``filters``: Gaussian posterior of an unknown drift (one or several assets).
- ``linalg``: small symmetric matrix kernels (Jacobi eigensolver, Cholesky,
  SPD inverse and square root, Simpson trace quadrature).
- ``merton``: closed-form CARA, CRRA and log allocations and value functions.
- ``execution``: execution-cost ODE systems and optimal inventories.
- ``simulate``: seeded Monte Carlo engine and utility estimates.
- ``cli``: the ``driftlearn`` command.

Set ``DRIFTLEARN_DISABLE_NUMBA=1`` before import to run the pure numpy kernels.
"""

from ._accel import NUMBA_ENABLED, backend
from .errors import BlowupError, DomainError, DriftLearnError, RiccatiEscapeError
from .execution import (AcCoeffTable, CostFunction, ExecutionSpec, InventoryPath, Liquidation,
                        Transition, VolumeCurve, legendre_H, optimal_inventory,
                        solve_choice_liq_odes, solve_transition_odes, theta_eval, value_eval)
from .filters import (PosteriorState, PriorBelief1D, PriorBeliefND, learning_gain,
                      posterior_bachelier_1d, posterior_bachelier_nd, posterior_lognormal_1d,
                      posterior_lognormal_nd)
from .merton import (BlowupDomain, CaraCoeffs, FrictionlessMarket, UtilitySpec,
                     cara_allocation_1d, cara_allocation_nd, cara_coeffs_1d, cara_coeffs_nd,
                     cara_value_1d, cara_value_nd, crra_allocation_1d, crra_allocation_nd,
                     crra_blowup_1d, crra_blowup_nd, crra_coeffs_1d, crra_coeffs_nd, crra_value_1d,
                     crra_value_nd, known_drift_allocation, log_coeffs_1d, log_coeffs_nd,
                     naive_allocation, optimal_gain, value)
from .rng import CounterRNG
from .simulate import (PathSet, PriceModel, SimConfig, UtilityEstimate, estimate_utility,
                       run_execution, run_frictionless, simulate_paths)

__version__ = "0.1.0"
