"""augkit: speech corpus augmentation and hypothesis-combination toolkit.

Utterance- and word-level speed perturbation, SpecAugment masking, an
MFCC/VTLN/CMVN front-end, confidence-based corpus cleansing, word-lattice
union with minimum-Bayes-risk decoding, and calculators for the MMI and
sampled-softmax RNNLM objectives.
"""

__version__ = "0.1.0"

from .audio import Waveform, read_wav, write_wav
from .features import FeatureMatrix, FrontendConfig, VtlnConfig, cmvn, log_mel, mfcc
from .lattice import Hypothesis, Lattice, mbr_decode, nbest, union, word_edit_distance
from .manifest import Manifest, Segment, WordAlignment, cleanse, parse_ctm, parse_data_dir
from .objectives import LogitVector, ScoredHypothesis, mmi_objective, rnnlm_objective
from .pipeline import PipelineConfig, expand_corpus, featurize_corpus
from .resample import SpeedFactor, make_usp_copies, resample, speed_perturb
from .specaugment import SpecAugmentConfig, spec_augment
from .word_perturb import PerturbPlan, apply_plan, make_plan, make_wsp_copies

__all__ = [
    "FeatureMatrix",
    "FrontendConfig",
    "Hypothesis",
    "Lattice",
    "LogitVector",
    "Manifest",
    "PerturbPlan",
    "PipelineConfig",
    "ScoredHypothesis",
    "Segment",
    "SpecAugmentConfig",
    "SpeedFactor",
    "VtlnConfig",
    "Waveform",
    "WordAlignment",
    "apply_plan",
    "cleanse",
    "cmvn",
    "expand_corpus",
    "featurize_corpus",
    "log_mel",
    "make_plan",
    "make_usp_copies",
    "make_wsp_copies",
    "mbr_decode",
    "mfcc",
    "mmi_objective",
    "nbest",
    "parse_ctm",
    "parse_data_dir",
    "read_wav",
    "resample",
    "rnnlm_objective",
    "spec_augment",
    "speed_perturb",
    "union",
    "word_edit_distance",
    "write_wav",
]
