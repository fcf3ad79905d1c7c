"""Multi-output GP inverse-dynamics identification with polynomial energy
priors, plus the analytic rigid-body oracle used to generate and verify
data."""

from .energy import EnergyPosterior, align_offset, estimate_energies
from .estimators import ESTIMATOR_NAMES, FitOptions, make_estimator
from .gpr import GPModel, assemble_gram, log_marginal_likelihood
from .lip import LagrangianTorqueKernel, TransformedInput, transform_input
from .metrics import global_mse, nmse
from .robot import (DhLink, InertialParams, JointState, RobotModel, StateBatch,
                    energies, forward_kinematics, inertia_matrix,
                    inverse_dynamics, link_jacobians, load_robot,
                    regressor_matrix)
from .trajectories import (Dataset, JointLimits, SinusoidSpec, Trajectory,
                           generate_trajectory, load_dataset, save_dataset,
                           synthesize_dataset)

__version__ = "0.1.0"
