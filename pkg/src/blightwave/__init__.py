"""Simulation and analysis of a blossom-blight reaction-diffusion model.

The package couples two diffusing pathogen pools (epiphytic ``B`` and ooze
``O``) with non-moving flower compartments ``S``, ``I``, ``R`` and provides:

* :mod:`blightwave.model` -- parameters, kinetics, bounds, wave-speed floor,
* :mod:`blightwave.solver` -- method-of-lines integration on a 1-D grid,
* :mod:`blightwave.waves` -- travelling-wave statistics and sampling experiments,
* :mod:`blightwave.sensitivity` -- Sobol indices of the infection-front position,
* :mod:`blightwave.cli` -- the ``blightwave`` command line.
"""
__version__ = "0.1.0"

from .errors import (BlightError, BlowUpError, ConfigError, DomainError,  # noqa: E402
                     InstabilityError)
from .model import (BoundConstants, ConstraintReport, ModelParams, PointState,  # noqa: E402
                    a_priori_bounds, check_theorem_constraints, figure1_params, hill,
                    min_wave_speed, reaction_rhs, table5_params)
from .solver import (FieldState, Grid, Trajectory, full_rhs, integrate,  # noqa: E402
                     laplacian_neumann, standard_initial_condition)
from .waves import (WaveConfig, WaveStats, pearson, peak_location, shape_diff_local_l2,  # noqa: E402
                    track_peaks, wave_experiment, wave_speed_regression)
from .sensitivity import (SobolConfig, SobolDesign, SobolResult, first_order_saltelli,  # noqa: E402
                          qoi_peak_at_day, run_sensitivity, sobol_design, sobol_indices,
                          total_order_jansen)

__all__ = [
    "BlightError", "BlowUpError", "ConfigError", "DomainError", "InstabilityError",
    "BoundConstants", "ConstraintReport", "ModelParams", "PointState", "a_priori_bounds",
    "check_theorem_constraints", "figure1_params", "hill", "min_wave_speed", "reaction_rhs",
    "table5_params", "FieldState", "Grid", "Trajectory", "full_rhs", "integrate",
    "laplacian_neumann", "standard_initial_condition", "WaveConfig", "WaveStats", "pearson",
    "peak_location", "shape_diff_local_l2", "track_peaks", "wave_experiment",
    "wave_speed_regression", "SobolConfig", "SobolDesign", "SobolResult",
    "first_order_saltelli", "qoi_peak_at_day", "run_sensitivity", "sobol_design",
    "sobol_indices", "total_order_jansen",
]
