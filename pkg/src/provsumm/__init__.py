"""Why and why-not provenance summaries for Datalog queries with negation.

Pipeline: sample annotated derivations (``sampler``), generate candidate
patterns by pairwise generalization (``patterns``), estimate their
completeness, and pick the best set of at most k patterns (``topk``).
``oracle`` holds brute-force references for small inputs.
"""
from .datalog import (
    Comparator,
    Comparison,
    DatalogError,
    DatalogSyntaxError,
    Literal,
    ProvenanceQuestion,
    PTuple,
    Query,
    QuestionType,
    Rule,
    SafetyError,
    UnifiedRule,
    Var,
    matches_ptuple,
    parse_program,
    parse_ptuple,
    parse_question,
    unify_query,
    unify_with_ptuple,
)
from .oracle import (
    CompletenessTable,
    FullProvenance,
    enumerate_provenance,
    enumerate_why,
    enumerate_whynot,
    exact_completeness,
    exact_topk,
)
from .patterns import (
    DerivationPattern,
    PatternCandidate,
    estimate_completeness,
    generate_candidates,
    informativeness,
    lca,
    pattern_matches,
)
from .relstore import (
    Database,
    DomainOverrides,
    Relation,
    VarDomain,
    evaluate,
    goal_holds,
    load_csv,
    parse_domain_overrides,
    parse_schema,
    var_domain,
)
from .sampler import (
    AnnotatedDerivation,
    SampleConfig,
    SampleSet,
    SamplingPlan,
    annotate_goals,
    count_derivation_space,
    draw_bindings,
    estimate_p_prov,
    filter_existing,
    required_oversample_size,
    sample,
    selectivity_compensation,
)
from .topk import (
    CandidateSet,
    SummaryResult,
    best_first_topk,
    cp_bounds,
    disjoint,
    generalizes,
    harmonic,
    score_bounds,
)

__version__ = "0.1.0"

__all__ = [
    "annotate_goals",
    "AnnotatedDerivation",
    "best_first_topk",
    "CandidateSet",
    "Comparator",
    "Comparison",
    "CompletenessTable",
    "count_derivation_space",
    "cp_bounds",
    "Database",
    "DatalogError",
    "DatalogSyntaxError",
    "DerivationPattern",
    "disjoint",
    "DomainOverrides",
    "draw_bindings",
    "enumerate_provenance",
    "enumerate_why",
    "enumerate_whynot",
    "estimate_completeness",
    "estimate_p_prov",
    "evaluate",
    "exact_completeness",
    "exact_topk",
    "filter_existing",
    "FullProvenance",
    "generalizes",
    "generate_candidates",
    "goal_holds",
    "harmonic",
    "informativeness",
    "lca",
    "Literal",
    "load_csv",
    "matches_ptuple",
    "parse_domain_overrides",
    "parse_program",
    "parse_ptuple",
    "parse_question",
    "parse_schema",
    "pattern_matches",
    "PatternCandidate",
    "ProvenanceQuestion",
    "PTuple",
    "Query",
    "QuestionType",
    "Relation",
    "required_oversample_size",
    "Rule",
    "SafetyError",
    "sample",
    "SampleConfig",
    "SampleSet",
    "SamplingPlan",
    "score_bounds",
    "selectivity_compensation",
    "SummaryResult",
    "UnifiedRule",
    "unify_query",
    "unify_with_ptuple",
    "Var",
    "var_domain",
    "VarDomain",
]
