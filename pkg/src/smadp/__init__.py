"""Sparsity-aware set-membership NLMS filters with adjustable penalties."""

from .exceptions import (
    ConfigError,
    DegenerateRegressorError,
    DivergenceError,
    DomainError,
    ExperimentError,
    SmadpError,
)
from .experiment import (
    AlgoKind,
    AlgorithmSpec,
    ExperimentConfig,
    LearningCurve,
    TrialRecord,
    build_schedule,
    run_monte_carlo,
    run_trial,
    update_rate,
)
from .filters import (
    AdpState,
    AlphaMode,
    PnlmsParams,
    Sample,
    StepOutcome,
    a_priori_error,
    adp_step,
    adp_step_size,
    alpha_update,
    make_eza_adp,
    make_rza_adp,
    make_za_adp,
    nlms_step,
    oracle_sm_nlms_step,
    pnlms_step,
    sm_nlms_step,
    sm_step_size,
)
from .penalty import PenaltyKind, PenaltySpec, penalty_gradient, penalty_value
from .signal import (
    InputModel,
    NoiseModel,
    Phase,
    PhaseSchedule,
    SystemSpec,
    gen_desired,
    gen_input,
    make_system,
)

__version__ = "0.1.0"
