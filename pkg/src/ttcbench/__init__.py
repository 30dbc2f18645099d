"""Exact sampling laboratory for test-time-compute algorithms.

A finite synthetic world (mixture of reference policies with a Bayes
posterior over them) where best-of-n, sequential, reward-filtered, and
rejection samplers can be enumerated exactly and their theory checked
numerically.
"""

from .algorithms import (
    AlgorithmSpec,
    FixedPrompt,
    FullHistory,
    HistoryBuilder,
    RewardFiltered,
    RewardFilteredBurnIn,
    TopK,
    TrialRecord,
    adaptive_rejection_sampling,
    build_history,
    exact_output_dist,
    run_seqbon,
)
from .divergences import (
    coverage,
    e_m_divergence,
    m_epsilon,
    regret_of_action,
    regret_of_dist,
    tv_distance,
)
from .errors import (
    DegenerateHistory,
    EmptyInput,
    GenerationExhausted,
    InvalidM,
    ParseError,
    PreconditionFailed,
    SchemaVersionUnsupported,
    TooLarge,
    TTCBenchError,
    UnknownAction,
    UnsupportedComparator,
)
from .harness import (
    GeneratorConfig,
    SweepRow,
    bootstrap_ci,
    empirical_output_dist,
    generate_instance,
    run_trials,
    sample_complexity,
    summarize,
    sweep_budget,
)
from .instance_io import (
    emit_results,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    rows_from_csv,
    rows_to_csv,
    save_instance,
)
from .model import (
    CategoricalDist,
    HistoryState,
    Instance,
    PosteriorWeights,
    PromptSpec,
    llm_next_dist,
    mixture_dist,
    posterior_weights,
    reward,
    sample_action,
    validate_instance,
)
from .rng import child_stream, mix
from .theory import (
    AssumptionReport,
    BudgetReport,
    MarginReport,
    OrderingResult,
    RejectionBoundResult,
    adversarial_reward,
    budget_report,
    check_assumptions,
    contraction_check,
    find_tau_star,
    lemma_posterior_bound,
    margin_report,
    ordering_check_m_thresholds,
    regret_under_table,
    rejection_tv_bound,
    seqbon_regret_bound,
)
from .verify import canonical_two_ref, run_suite

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
