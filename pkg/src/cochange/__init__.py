"""Co-change recommendation over git histories.

The package mines association rules from version history changesets and
compares three ways of reading that history: the full commit graph, the
first-parent chain without merge diffs, and the first-parent chain with
squashed merge diffs.  It also ships the paired evaluation protocol and
the branch-characteristics analyses built on top of it.
"""

from .history import (
    Commit,
    CommitGraph,
    EntryOrigin,
    Strategy,
    additional_changes,
    ancestors_all,
    ancestors_first_parent,
    branch_commits,
    branch_length,
    merge_base,
    merge_commit_size,
    strategy_walk,
)
from .mining import (
    AssociationRule,
    Transaction,
    apriori,
    confidence,
    filter_rules,
    single_consequent_rules,
    support,
)
from .recommend import (
    Collector,
    PipelineRun,
    Query,
    Recommendation,
    RecommendationEntry,
    RecommenderConfig,
    collect_commits,
    paired_recommend,
    recommend,
)
from .evaluation import (
    EvaluationRecord,
    ExperimentResult,
    Outcome,
    PairedVerdict,
    TestCase,
    WilcoxonResult,
    aggregate_rates,
    classify,
    eligible,
    generate_test_cases,
    map_all,
    map_app,
    pairwise_verdict,
    repo_level_winner,
    run_experiment,
    wilcoxon_signed_rank,
)
from .branches import (
    BranchInfo,
    CauseAttributionError,
    CausalDiagnosis,
    CochangeMode,
    Cohort,
    PrecisionRecord,
    StudyDiagnostics,
    WinnerRateBin,
    added_cochange_count,
    branch_info,
    cochange_study,
    cochanged_files,
    commit_cap_filter,
    diagnose_causes,
    eligible_merges_for_cochange,
    fp_collection_size,
    future_oracle,
    precision,
    sample_heavy_merges,
    winner_rate_table,
)
from .ingest import (
    IngestError,
    SnapshotError,
    ingest_repository,
    load_snapshot,
    save_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "AssociationRule",
    "BranchInfo",
    "CauseAttributionError",
    "CausalDiagnosis",
    "CochangeMode",
    "Cohort",
    "Collector",
    "Commit",
    "CommitGraph",
    "EntryOrigin",
    "EvaluationRecord",
    "ExperimentResult",
    "IngestError",
    "Outcome",
    "PairedVerdict",
    "PipelineRun",
    "PrecisionRecord",
    "Query",
    "Recommendation",
    "RecommendationEntry",
    "RecommenderConfig",
    "SnapshotError",
    "Strategy",
    "StudyDiagnostics",
    "TestCase",
    "Transaction",
    "WilcoxonResult",
    "WinnerRateBin",
    "added_cochange_count",
    "additional_changes",
    "aggregate_rates",
    "ancestors_all",
    "ancestors_first_parent",
    "apriori",
    "branch_commits",
    "branch_info",
    "branch_length",
    "classify",
    "cochange_study",
    "cochanged_files",
    "collect_commits",
    "commit_cap_filter",
    "confidence",
    "diagnose_causes",
    "eligible",
    "eligible_merges_for_cochange",
    "filter_rules",
    "fp_collection_size",
    "future_oracle",
    "generate_test_cases",
    "ingest_repository",
    "load_snapshot",
    "map_all",
    "map_app",
    "merge_base",
    "merge_commit_size",
    "paired_recommend",
    "pairwise_verdict",
    "precision",
    "recommend",
    "repo_level_winner",
    "run_experiment",
    "sample_heavy_merges",
    "save_snapshot",
    "single_consequent_rules",
    "strategy_walk",
    "support",
    "wilcoxon_signed_rank",
    "winner_rate_table",
]
