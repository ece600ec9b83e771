"""Real-time generative ad retrieval over a fixed commercial-intention set."""

from .cache import CacheSnapshot, CacheStats, cache_get, normalize_query, warm_cache
from .decoder import (
    OFFLINE_PROFILE,
    ONLINE_PROFILE,
    DecodeParams,
    Hypothesis,
    apply_truncation,
    constrained_beam_search,
    decode_hypotheses,
    temper,
)
from .engine import Engine, EngineConfig, RetrievalResult, load_config
from .errors import (
    AdIntentError,
    AssignmentError,
    ConfigurationError,
    DecodeError,
    IdempotencyError,
    IndexBuildError,
    InvalidInputError,
    InvalidPrefixError,
    RetrievalError,
    UndefinedMetricError,
)
from .evaluate import (
    EvalRecord,
    EvalReport,
    ad_coverage_rate,
    average_precision,
    hit_ratio_at_k,
    mean_average_precision,
    run_eval,
)
from .index import (
    Ad,
    AdHit,
    InvertedIndex,
    add_ad,
    assign_cis_to_ad,
    build_index,
    lookup,
    remove_ad,
)
from .scorer import NgramScorer, Scorer, TableScorer, fit_ngram_scorer, sequence_logprob
from .trie import CiTrie, build_trie
from .vocab import (
    END_ID,
    UNK_ID,
    TokenSeq,
    Vocabulary,
    build_vocab,
    detokenize,
    tokenize,
)

__version__ = "0.1.0"
