"""Uncertainty-driven multi-objective Bayesian optimization with constraints.

Each iteration fits one GP per objective (and per blackbox constraint),
solves a cheap multi-objective problem over the acquisition values with
constrained NSGA-II, and evaluates the candidate whose uncertainty box is
largest.
"""

from .acquisition import (
    AcquisitionKind,
    BetaSchedule,
    beta_t,
    ei,
    lcb,
    log_ei,
    log_uncertainty_volume,
    ucb,
    uncertainty_volume,
)
from .baselines import nsga2_direct, random_search
from .benchmarks import (
    BENCHMARKS,
    BenchmarkProblem,
    capacitance,
    evaluate_benchmark,
    get_benchmark,
    make_problem,
)
from .engine import (
    BLACKBOX,
    COMPOSITE,
    WHITEBOX,
    ConstraintSpec,
    EngineConfig,
    EvaluationRecord,
    OptimizerState,
    ProblemSpec,
    build_cheap_problem,
    initialize,
    pareto_archive,
    propose,
    run,
    select_candidate,
    step,
)
from .errors import (
    CandidatesExhausted,
    ConfigMismatchError,
    ConfigurationError,
    EvaluationError,
    EvaluationTimeout,
    InputError,
    NumericalConditioningError,
    ProtocolError,
    UsemocError,
)
from .experiment import (
    ExperimentConfig,
    HistoryLog,
    compare,
    config_hash,
    load_config,
    report,
    resume_experiment,
    run_experiment,
)
from .gp import GPConfig, GPModel, KernelParams, condition, fit, log_marginal_likelihood, predict
from .nsga2 import CandidateSet, CheapProblem, NsgaConfig, fast_non_dominated_sort, solve
from .pareto import (
    HypervolumeCurve,
    ParetoArchive,
    dominates,
    gain_in_simulations,
    hypervolume,
    hypervolume_curve,
    pareto_filter,
)
from .protocol import ExternalEvaluator, external_evaluate

__version__ = "0.1.0"
