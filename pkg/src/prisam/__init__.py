"""Deterministic best-first sampling for next-token sequence models.

The core decoder returns N unique samples ordered by expansion priority,
reusing inference across samples. Optional regex guides constrain output;
baseline samplers, a brute-force verification oracle, and a pass-ordering
benchmark harness round out the toolkit.
"""

from ._kernels import BACKEND
from .baselines import (
    NucleusConfig,
    greedy_decode,
    nucleus_sample,
    random_flag_sample,
    topk_sample,
)
from .errors import PrisamError
from .guide import (
    Guide,
    RegexSyntaxError,
    RejectedToken,
    compile_guide,
    escape_literal,
)
from .models import (
    NGramModel,
    SequenceModel,
    TableModel,
    load_corpus,
    load_ngram,
    save_corpus,
    save_ngram,
    train_ngram,
)
from .rng import RngStream
from .sampler import (
    BranchQueue,
    EmptyLanguage,
    InvalidPolicy,
    Metric,
    NoAllowedToken,
    SampleRecord,
    SampleSet,
    SamplerConfig,
    choose_best_tokens,
    count_inferences,
    priority_sample,
)
from .vocab import UnknownSymbol, Vocabulary, detokenize, tokenize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BranchQueue",
    "EmptyLanguage",
    "Guide",
    "InvalidPolicy",
    "Metric",
    "NGramModel",
    "NoAllowedToken",
    "NucleusConfig",
    "PrisamError",
    "RegexSyntaxError",
    "RejectedToken",
    "RngStream",
    "SampleRecord",
    "SampleSet",
    "SamplerConfig",
    "SequenceModel",
    "TableModel",
    "UnknownSymbol",
    "Vocabulary",
    "__version__",
    "choose_best_tokens",
    "compile_guide",
    "count_inferences",
    "detokenize",
    "escape_literal",
    "greedy_decode",
    "load_corpus",
    "load_ngram",
    "nucleus_sample",
    "priority_sample",
    "random_flag_sample",
    "save_corpus",
    "save_ngram",
    "tokenize",
    "topk_sample",
    "train_ngram",
]
