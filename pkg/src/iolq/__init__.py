"""Data-driven output-feedback linear quadratic control via adaptive filtering."""

from .matops import (
    NoConvergence,
    NotStabilizing,
    SingularSystem,
    is_hurwitz,
    solve_care_kleinman,
    solve_lyapunov,
    solve_sylvester,
)
from .plant import (
    LtiPlant,
    NonFiniteState,
    ProbingSignal,
    TrajectoryLog,
    WeightSpec,
    eval_cost,
    f16_plant,
    make_probing,
)
from .realization import (
    BadFilterMatrix,
    FilterBank,
    IllConditionedT,
    OracleRealization,
    build_filter,
    construct_oracle,
    verify_gain_transfer,
)
from .vi import (
    EscapeSets,
    IterationCap,
    RankDeficient,
    RegressionData,
    RegressionSolver,
    StepSchedule,
    collect,
    data_vi,
    extract_controller,
    model_vi,
    rank_check,
)
from .closedloop import (
    ClosedLoopController,
    UnstableClosedLoop,
    simulate_output_feedback,
    simulate_state_feedback,
)
from .estimator import ValueIterationRegulator

__all__ = [
    "BadFilterMatrix",
    "ClosedLoopController",
    "EscapeSets",
    "FilterBank",
    "IllConditionedT",
    "IterationCap",
    "LtiPlant",
    "NoConvergence",
    "NonFiniteState",
    "NotStabilizing",
    "OracleRealization",
    "ProbingSignal",
    "RankDeficient",
    "RegressionData",
    "RegressionSolver",
    "SingularSystem",
    "StepSchedule",
    "TrajectoryLog",
    "UnstableClosedLoop",
    "ValueIterationRegulator",
    "WeightSpec",
    "build_filter",
    "collect",
    "construct_oracle",
    "data_vi",
    "eval_cost",
    "extract_controller",
    "f16_plant",
    "is_hurwitz",
    "make_probing",
    "model_vi",
    "rank_check",
    "simulate_output_feedback",
    "simulate_state_feedback",
    "solve_care_kleinman",
    "solve_lyapunov",
    "solve_sylvester",
    "verify_gain_transfer",
]

__version__ = "0.1.0"
