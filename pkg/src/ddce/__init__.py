"""Delay-Doppler channel estimation toolkit for ODDM frames."""

from .dd_core import (
    DDFrame,
    PathSet,
    SystemParams,
    devectorize,
    eval_effective_pulse,
    generate_jakes_channel,
    periodic_dirichlet,
    validate_paths,
    vectorize_frame,
)
from .oddm_txrx import (
    DDChannelOperator,
    apply_H_DD,
    apply_channel_time,
    build_H_DD,
    demodulate,
    modulate,
)
from .pilot_sensing import (
    MeasurementModel,
    VirtualGrid,
    build_measurement_matrix,
    build_virtual_grid,
    embed_pilot,
    estimate_P_hat,
    extract_region,
    phi_column,
    phi_columns,
)
from .sbl import SBLState, sbl_e_step, sbl_m_step, sbl_run
from .grid_refine import (
    PeakSet,
    RefinementConfig,
    adjust_grid_point,
    build_refined_grid,
    compute_q_s,
    downdated_inverse,
    grasbi_run,
    marginal_objective,
    optimal_gamma,
    select_peaks,
)
from .tgraesbi import (
    TStateHyper,
    fidelity,
    lipschitz_s0,
    surrogate_objective,
    tg_e_step,
    tg_hyper_update,
    tgraesbi_run,
)
from .evaluation import (
    SCHEMES,
    ComplexityReport,
    EstimateResult,
    complexity_report,
    count_multiplications,
    genie_on_grid,
    genie_perfect,
    nmse_db,
    operation_counts,
    reconstruct_H_DD,
    taps_from_posterior,
)
from .harness import (
    COMPLEXITY_SCHEMES,
    CSV_HEADER,
    RUN_SCHEMES,
    ExperimentConfig,
    TrialRecord,
    cli_main,
    config_from_dict,
    doppler_hz,
    run_experiment,
    system_params,
    validate_config,
    write_records,
)

__version__ = "0.1.0"
