"""System identification toolkit for a twin-azimuth-thruster surface vessel.

Forward simulation of the whole-ship model, synthetic maneuver generation,
empirical initialization, combined local/global least-squares estimation and
multi-horizon prediction validation.
"""

from .actuation import (AzimuthModel, InputCommand, ThrusterGeometry,
                        ThrusterModel, ThrustPolynomial, azimuth_rate,
                        config_matrix, default_thruster,
                        estimate_azimuth_params, fit_thrust_polynomial,
                        thrust_from_rps, torques)
from .dataio import (Dataset, ManeuverLog, derive_body_velocities,
                     export_report_json, export_trajectory_csv,
                     finite_difference_pose, load_dataset, load_maneuver_csv,
                     save_dataset, save_maneuver_csv)
from .errors import (DegenerateParametersError, InsufficientDataError,
                     IntegrationBlowupError, ParseError, ShipIdError,
                     SolverError, UnidentifiableError)
from .estimation import (EstimationConfig, EstimationResult,
                         build_go_residuals, build_lo_residuals,
                         empirical_added_mass, estimate_6param,
                         estimate_combined, estimate_go, estimate_lo,
                         init_params6_empirical, init_params_empirical,
                         stability_constraints)
from .model import (BodyVelocity, ControlTorque, Pose, ShipState,
                    coriolis_matrix, damping_matrix, dynamics_rhs_6,
                    dynamics_rhs_22, mass_matrix, rk4_step, rotation_matrix,
                    simulate, whole_ship_rhs)
from .params import (REFERENCE_TUG_HULL, REFERENCE_TUG_PARAMS,
                     REFERENCE_TUG_PARAMS6, HullSpecs, ShipParams6,
                     ShipParams22, load_params22, save_params22)
from .solver import NlsProblem, SolveOptions, SolveReport, jacobian_fd, solve
from .synthgen import (ManeuverPlan, NoiseSpec, generate_maneuver,
                       generate_scenario, standard_12_maneuvers,
                       standard_12_plans)
from .validation import (ComparisonReport, PredictionReport, predict_n_steps,
                         relative_error_table, rmse, validation_suite)

__version__ = "0.1.0"
