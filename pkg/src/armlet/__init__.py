"""ARM models for tabular click prediction, in numpy with a compiled entmax core.

Relation modeling with exponential neurons whose interaction weights
are produced by sparse (entmax) bilinear attention over field embeddings,
plus LR, FM, FM-with-neurons and DNN baselines, a training loop with early
stopping, and feature attribution tools.
"""

import os as _os

# Cap BLAS threads before numpy loads its backend; explicit settings win.
_threads = _os.environ.get("ARMLET_THREADS", "1")
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, _threads)

from .data import (  # noqa: E402
    Dataset,
    FieldSpec,
    Instance,
    PlantedTerm,
    Schema,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    load_schema,
    split,
)
from .errors import ArmletError
from .interpret import global_importance, interaction_catalog, local_attribution
from .model import ArmConfig, Model, transplant_neurons
from .persist import load_model, save_model
from .sparse_softmax import entmax, get_backend, set_backend, sparsemax, softmax
from .training import TrainConfig, auc, evaluate, logloss, train

__version__ = "0.1.0"

__all__ = [
    "ArmConfig",
    "ArmletError",
    "Dataset",
    "FieldSpec",
    "Instance",
    "Model",
    "PlantedTerm",
    "Schema",
    "SyntheticSpec",
    "TrainConfig",
    "auc",
    "entmax",
    "evaluate",
    "generate_synthetic",
    "get_backend",
    "global_importance",
    "interaction_catalog",
    "load_dataset",
    "load_model",
    "load_schema",
    "local_attribution",
    "logloss",
    "save_model",
    "set_backend",
    "softmax",
    "sparsemax",
    "split",
    "train",
    "transplant_neurons",
]
