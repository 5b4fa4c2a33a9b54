from .kernel import (
    KernelTables, StepDistribution, c_lambda, kernel_tables, move_between, nu, pattern_array,
    second_log_terms, step_distribution,
)
from .walk import Trajectory, load_trajectory, martingale_path, run_walk, save_trajectory, write_trajectory_csv
from .density import DensityRatio, density_ratio
from .projections import Projections, agile_and_backbone_projections
from .batch import BatchResult, ReplicaResult, simulate_batch, simulate_replica
