"""careerseq: occupation-sequence modeling at desk scale.

Career histories render to resume-like text templates and back; occupation
models (empirical frequencies, multinomial logit, a two-stage sequence
transformer, and a token language model scored through the chain rule over
job-title tokens) share one prediction interface; an evaluation harness
provides perplexity, mover conditionals, AUC, calibration, and
individual-level bootstrap uncertainty; a synthetic generator with an exact
filtering oracle supplies ground truth for all of it.
"""

__version__ = "0.1.0"

from .corpus import CareerHistory, CareerRecord, Dataset, StaticCovariates, split_dataset
from .synthetic import GeneratorParams, OracleModel, SyntheticConfig, generate_synthetic, oracle_probability
from .taxonomy import OccupationTaxonomy, build_default_taxonomy
from .template import NumericTitleMap, TemplateCodec, TemplateConfig
from .tokenizer import Vocabulary, train_template_vocab, train_vocab

__all__ = [
    "CareerHistory",
    "CareerRecord",
    "Dataset",
    "GeneratorParams",
    "NumericTitleMap",
    "OccupationTaxonomy",
    "OracleModel",
    "StaticCovariates",
    "SyntheticConfig",
    "TemplateCodec",
    "TemplateConfig",
    "Vocabulary",
    "build_default_taxonomy",
    "generate_synthetic",
    "oracle_probability",
    "split_dataset",
    "train_template_vocab",
    "train_vocab",
]
