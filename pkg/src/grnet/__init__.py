"""Gene regulatory network inference from time-series expression data.

A discrete-time recurrent model (one node per gene) is fitted to the
series either by gradient descent through the unrolled trajectory or by
a decoupled per-gene extended Kalman filter; the averaged weight matrix
is discretized by interquartile thresholds and scored against a gold
standard.
"""

from .data import (ExpressionDataset, GoldNetwork, add_gaussian_noise,
                   load_dataset, load_gold_network, normalize, save_dataset,
                   save_gold_network)
from .errors import DataError, GrnetError, NumericsError
from .evaluation import (ConfusionCounts, EvalReport, SignedAdjacency,
                         compare_reports, discretize_iqr, report_from_counts,
                         score, sif_lines)
from .model import (GrnModel, IDENTITY, LOGISTIC, StepConfig, free_run,
                    load_model, load_weight_matrix, one_step_predictions,
                    rollout, save_model, save_weight_matrix, sigmoid, step)
from .synth import SynthSpec, generate_dataset, generate_model
from .training import (GekfState, Gradient, TrainConfig, TrainResult,
                       bptt_gradient, bptt_update, free_run_sse, gekf_step,
                       kalman_update, one_step_sse, train)

__version__ = "0.1.0"

__all__ = [
    "ConfusionCounts", "DataError", "EvalReport", "ExpressionDataset",
    "GekfState", "GoldNetwork", "Gradient", "GrnModel", "GrnetError",
    "IDENTITY", "LOGISTIC", "NumericsError", "SignedAdjacency", "StepConfig",
    "SynthSpec", "TrainConfig", "TrainResult", "add_gaussian_noise",
    "bptt_gradient", "bptt_update", "compare_reports", "discretize_iqr",
    "free_run", "free_run_sse", "gekf_step", "generate_dataset",
    "generate_model", "kalman_update", "load_dataset", "load_gold_network",
    "load_model", "load_weight_matrix", "normalize", "one_step_predictions",
    "one_step_sse", "report_from_counts", "rollout", "save_dataset",
    "save_gold_network", "save_model", "save_weight_matrix", "score",
    "sif_lines", "sigmoid", "step", "train",
]
