"""semdrift: semantic-drift scoring and decoding control for fact-dense text.

The toolkit quantifies how cleanly a generated paragraph separates into a
correct prefix and an incorrect suffix, tests that separation for
significance, and uses it to drive early-stopping policies, a
resample-then-rerank decoding controller, and QA tool-call splicing, with
a precision/recall/cost reporting layer on top.
"""

from .corpus import (
    AnnotatedParagraph,
    AtomicFact,
    GenerationTrace,
    SampledPassage,
    SamplePassageSet,
    TokenStep,
    fact_sequence,
    ingest_corpus,
    serialize_corpus,
    write_corpus,
)
from .drift import (
    DriftResult,
    PermutationTestResult,
    drift_distribution_report,
    filter_degenerate,
    permutation_pvalue,
    sd_score,
    sd_score_fast,
    truncation_sweep,
)
from .cache import GeneratorRequest, ResponseCache
from .clients import (
    CachingGenerator,
    Completion,
    EchoGenerator,
    FixtureQAClient,
    HttpGenerator,
    HttpQAClient,
    HttpSimilarityBackend,
    TokenOverlapBackend,
    token_overlap_f1,
)
from .consistency import (
    ConsistencyProfile,
    SentenceScore,
    build_profile,
    correlate_with_labels,
    intrinsic_metrics,
    intrinsic_metrics_avg,
    selfcheck_ngram,
    selfcheck_similarity,
)
from .errors import (
    CapabilityError,
    ConfigurationError,
    EndpointError,
    ProtocolError,
    SemdriftError,
    ValidationError,
)
from .rerank import RerankConfig, RerankResult, rerank_generate
from .reporting import (
    FactPRBreakdown,
    RunReport,
    SessionLog,
    build_run_report,
    fact_pr_breakdown,
    factscore_star,
    flops_estimate,
    recall_vs_baseline,
    tradeoff_table,
)
from .segmentation import split_sentences, strip_unfinished_tail
from .stopping import (
    StopDecision,
    StopPolicy,
    apply_policy,
    eos_stop,
    oracle_stop,
    sc_absolute_stop,
    sc_relative_stop,
    truncate_paragraph,
)
from .toolcalls import ToolCall, parse_tool_calls, render_tool_call, toolcall_generate

__version__ = "0.1.0"

__all__ = [
    "AnnotatedParagraph",
    "AtomicFact",
    "CachingGenerator",
    "CapabilityError",
    "Completion",
    "ConfigurationError",
    "ConsistencyProfile",
    "DriftResult",
    "EchoGenerator",
    "EndpointError",
    "FactPRBreakdown",
    "FixtureQAClient",
    "GenerationTrace",
    "GeneratorRequest",
    "HttpGenerator",
    "HttpQAClient",
    "HttpSimilarityBackend",
    "PermutationTestResult",
    "ProtocolError",
    "RerankConfig",
    "RerankResult",
    "ResponseCache",
    "RunReport",
    "SampledPassage",
    "SamplePassageSet",
    "SemdriftError",
    "SentenceScore",
    "SessionLog",
    "StopDecision",
    "StopPolicy",
    "TokenOverlapBackend",
    "TokenStep",
    "ToolCall",
    "ValidationError",
    "apply_policy",
    "build_profile",
    "build_run_report",
    "correlate_with_labels",
    "drift_distribution_report",
    "eos_stop",
    "fact_pr_breakdown",
    "fact_sequence",
    "factscore_star",
    "filter_degenerate",
    "flops_estimate",
    "ingest_corpus",
    "intrinsic_metrics",
    "intrinsic_metrics_avg",
    "oracle_stop",
    "parse_tool_calls",
    "permutation_pvalue",
    "recall_vs_baseline",
    "render_tool_call",
    "rerank_generate",
    "sc_absolute_stop",
    "sc_relative_stop",
    "sd_score",
    "sd_score_fast",
    "selfcheck_ngram",
    "selfcheck_similarity",
    "serialize_corpus",
    "split_sentences",
    "strip_unfinished_tail",
    "token_overlap_f1",
    "toolcall_generate",
    "tradeoff_table",
    "truncate_paragraph",
    "truncation_sweep",
    "write_corpus",
]
