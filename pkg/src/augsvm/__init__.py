"""Parallel SVM training via latent-scale data augmentation.

Binary, regression, and Crammer-Singer multiclass SVMs trained by either a
deterministic EM loop or a Gibbs sampler, both built on the same map/reduce
decomposition of the per-iteration sufficient statistics. Linear models scale
in the feature dimension; the Gaussian-kernel classifier works in coefficient
space over the Gram matrix.
"""

from .dataio import (load_libsvm, load_model, load_model_file, parse_libsvm,
                     partition, save_model, save_model_file, serialize_libsvm)
from .errors import DataError, NumericError
from .evaluation import EvalReport, evaluate_model, predict_many
from .kernel import build_gram, kernel_eval, kernel_objective, train_kernel
from .linear import train_linear
from .multiclass import train_multiclass
from .objectives import (objective_cls, objective_mlt, objective_svr, predict,
                         zero_one_cost)
from .runtime import TrainTrace
from .types import (Algo, AugmentedState, Dataset, KernelSpec, Model, Solver,
                    SparseRow, Task, TrainConfig)

__version__ = "0.1.0"


def train(data: Dataset, config: TrainConfig, with_timing: bool = False):
    """Train a model of whatever kind the config selects.

    Returns (Model, TrainTrace); the trace carries per-iteration objectives,
    the stop reason, and (with_timing) per-phase wall times.
    """
    if config.solver is Solver.KRN:
        return train_kernel(data, config, with_timing=with_timing)
    if config.task is Task.MLT:
        return train_multiclass(data, config, with_timing=with_timing)
    return train_linear(data, config, with_timing=with_timing)
