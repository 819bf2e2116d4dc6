from .entropy import allele_entropy, distinct_alleles, entropy_bits, state_allele_entropy
from .stats import (
    ConfidenceInterval,
    MeanTest,
    confidence_interval,
    series_confidence,
    two_sided_mean_test,
)
from .metrics import EpisodeSummary, TickMetrics, allele_histogram, clone_attack_counts
from .config import EvaluationConfig
from .episodes import PoolController, acting_rng, run_episode
from .experiments import (
    AblationResult,
    DriftResult,
    EvaluationResult,
    HeadToHeadResult,
    ablate_intra_family_attacks,
    evaluate,
    head_to_head,
    kin_masking_drift,
    run_episodes,
)
from .export import read_csv, summary_document, write_csv, write_csv_stream, write_json
