"""Coresets for logistic regression by square-root leverage score sampling."""
from .coreset import Coreset, RecursionConfig, build_base, build_recursive, build_uniform
from .data import Dataset, DatasetStats, LabeledData, dataset_stats, fold_labels, load_dataset
from .logreg import FitConfig, ModelParams, fit_mle, nll, nll_grad, softplus
from .mu import MuEstimate, mu_bruteforce, mu_lp
from .sampler import RoundedScores, SampleSizeParams, reservoir_stream, round_pow2, sample_iid, sample_size
from .scores import ScoreVector, SketchConfig, sketch_matrix, sqrt_leverage_exact, sqrt_leverage_sketched

__version__ = "0.1.0"
