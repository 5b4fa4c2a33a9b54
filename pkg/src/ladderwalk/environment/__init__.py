from .model import (
    COND_STATES, H0, H1, V, LEVEL0, LEVEL1, ModelParams, Slab, Vertex,
    compute_lambda_c, slab_update, slab_weights, t_code, t_name, trap_length_pmf,
    trap_persistence_ratio,
)
from .transfer import PerronError, TransferMatrix, build_transfer_matrix, perron_value
from .config import ConfigError, LadderConfig, TrapPiece, annotate, check_invariants, from_slabs, fully_open
from .sampling import (
    BudgetError, as_generator, column_statistics_batch, cycle_lengths,
    rejection_acceptance_rate, sample_cycle_stationary, sample_environment_chain,
    sample_environment_rejection,
)
from .io import load_snapshot, save_snapshot, text_dump
