"""Grid-based similarity triplet collection, embedding, and cost accounting."""

from .collection import (
    CklConfig,
    GridAnswer,
    GridSpec,
    GridTask,
    OccurrenceStats,
    TripletKey,
    ckl_select_question,
    dedup_triplets,
    expand_grid_answer,
    occurrence_stats,
    sample_random_grid,
    sample_random_triplet_question,
    unique_triplet_capacity,
)
from .econ import (
    BudgetReport,
    HitPricing,
    TimingTable,
    experiment_budget_report,
    hourly_wage,
    one_at_a_time_cost,
    recommend_grid,
    screens_cost,
    triplets_per_answer,
)
from .embedding import (
    Embedding,
    Triplet,
    TsteConfig,
    loo_nn_error,
    triplet_generalization_error,
    tste_fit,
    tste_gradient,
    tste_log_likelihood,
)
from .harness import (
    CurvePoint,
    DatasetSpec,
    ExperimentConfig,
    Strategy,
    build_reference_embedding,
    emit_curves_csv,
    reproduce_distribution_figure,
    run_experiment,
)
from .oracle import (
    GroundTruth,
    WorkerModel,
    bootstrap_ground_truth,
    generate_mixture_dataset,
    load_vectors,
    oracle_answer_grid,
    oracle_answer_triplet,
)

__version__ = "0.1.0"
