"""Linear-chain CRFs whose outputs are constrained to a regular language."""

from .automata import (
    DEFAULT_STATE_BUDGET,
    AmbiguityWitness,
    Nfa,
    accepts,
    check_unambiguous,
    compile_regex,
    determinize,
    enumerate_language,
    make_unambiguous,
    minimize_dfa,
    regex_to_nfa,
)
from .bio import BioSpec, build_bio_nfa, is_valid_bio
from .constrained import (
    ConstrainedTagSet,
    CrfParams,
    build_tag_set,
    compile_language,
    constrained_log_prob,
    constrained_marginals,
    constrained_viterbi,
    load_model,
    reduce_tag_set,
    save_model,
)
from .errors import (
    AmbiguousAutomatonError,
    DivergenceError,
    EmptySupportError,
    LanguageBudgetExceeded,
    OutOfLanguageError,
    RegCCRFError,
    RegexSyntaxError,
    StateBudgetExceeded,
    UndeclaredSymbolError,
)
from .estimator import RegCCRF
from .regex import parse_regex
from .train import DataDistribution, TrainConfig, evaluate_cross_entropy, run_regimens

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_STATE_BUDGET",
    "AmbiguityWitness",
    "AmbiguousAutomatonError",
    "BioSpec",
    "ConstrainedTagSet",
    "CrfParams",
    "DataDistribution",
    "DivergenceError",
    "EmptySupportError",
    "LanguageBudgetExceeded",
    "Nfa",
    "OutOfLanguageError",
    "RegCCRF",
    "RegCCRFError",
    "RegexSyntaxError",
    "StateBudgetExceeded",
    "TrainConfig",
    "UndeclaredSymbolError",
    "accepts",
    "build_bio_nfa",
    "build_tag_set",
    "check_unambiguous",
    "compile_language",
    "compile_regex",
    "constrained_log_prob",
    "constrained_marginals",
    "constrained_viterbi",
    "determinize",
    "enumerate_language",
    "evaluate_cross_entropy",
    "is_valid_bio",
    "load_model",
    "make_unambiguous",
    "minimize_dfa",
    "parse_regex",
    "reduce_tag_set",
    "regex_to_nfa",
    "run_regimens",
    "save_model",
]
