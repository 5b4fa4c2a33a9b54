from .detect import (
    IncrementSample, RegenerationRecord, candidate_regenerations, detect_regenerations, record_from_replica,
)
from .estimates import (
    EstimateReport, FluctuationReport, InsufficientSampleError, MomentCurve, OvershootReport,
    critical_ratio, direct_speed, moment_diagnostic, mz_fluctuation_check, overshoot_tail_check,
    overshoot_values, speed_estimate, tail_index_hill,
)
from .io import read_increments_csv, report_json, write_increments_csv
