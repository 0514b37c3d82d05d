"""Cross-subject SSVEP decoding: TRCA, iTRCA and SS-iTRCA."""
from .estimators import ITRCA, SSITRCA, TRCA
from .evaluation import CvPlan, EvalReport, build_cv_plan, itr, run_eval
from .selection import SelectionConfig, SimilarityReport, select_subjects, similarity
from .signal import BandpassSpec, FilterBankSpec, default_filterbank, subband_weight
from .synth import SynthSpec, gen_dataset, gen_subject
from .transfer import TrainedModel, classify, fit_itrca

__version__ = "0.1.0"

__all__ = [
    "TRCA", "ITRCA", "SSITRCA",
    "CvPlan", "EvalReport", "build_cv_plan", "itr", "run_eval",
    "SelectionConfig", "SimilarityReport", "select_subjects", "similarity",
    "BandpassSpec", "FilterBankSpec", "default_filterbank", "subband_weight",
    "SynthSpec", "gen_dataset", "gen_subject",
    "TrainedModel", "classify", "fit_itrca",
]
