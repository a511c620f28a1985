"""mmflow: minimizing-movement solver and estimate harness.

1D fourth-order cross-diffusion systems of gradient-flow type, driven by a
dynamic transport metric with nonlinear concave mobilities.  Includes the
variational time stepper, the transport-distance solver, and executable
checks for the quantitative a-priori estimates.
"""

import os as _os

# Honor the thread cap before any BLAS-backed import happens.
_cap = _os.environ.get("MMFLOW_THREADS")
if _cap:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _cap)
del _os, _cap

__version__ = "0.1.0"

from .value_space import (  # noqa: E402
    Case,
    EntropyMobilityPair,
    ValueSpace,
    heat_entropy,
    heat_entropy_density,
    make_custom_pair,
    make_logarithmic_pair,
)
from .grid import (  # noqa: E402
    Grid1D,
    GridField,
    face_gradient,
    h1_norm,
    h2_seminorm,
    integrate,
    l2_norm,
    mass_vector,
    second_difference,
    second_moment,
)
from .free_energy import (  # noqa: E402
    CahnHilliardParams,
    EnergyDensity,
    PolynomialPotential,
    discrete_energy,
    energy_gradient,
    estimate_coercivity,
    make_cahn_hilliard,
    make_quadratic_density,
    nonlinear_operator,
    normalize_density,
)
from .transport_metric import (  # noqa: E402
    ConvergenceError,
    SolveReport,
    SolverOptions,
    TransportPath,
    action,
    continuity_residual,
    distance,
    perspective_prox,
)
from .jko import (  # noqa: E402
    JkoConfig,
    TrajectoryRecord,
    TrajectoryResult,
    TrajectoryError,
    jko_step,
    run_trajectory,
)

__all__ = [
    "__version__",
    "Case", "EntropyMobilityPair", "ValueSpace", "heat_entropy",
    "heat_entropy_density", "make_custom_pair", "make_logarithmic_pair",
    "Grid1D", "GridField", "face_gradient", "h1_norm", "h2_seminorm",
    "integrate", "l2_norm", "mass_vector", "second_difference", "second_moment",
    "CahnHilliardParams", "EnergyDensity", "PolynomialPotential",
    "discrete_energy", "energy_gradient", "estimate_coercivity",
    "make_cahn_hilliard", "make_quadratic_density", "nonlinear_operator",
    "normalize_density",
    "ConvergenceError", "SolveReport", "SolverOptions", "TransportPath",
    "action", "continuity_residual", "distance", "perspective_prox",
    "JkoConfig", "TrajectoryRecord", "TrajectoryResult", "TrajectoryError",
    "jko_step", "run_trajectory",
]
