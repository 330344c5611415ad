"""Monotonic neural additive models for binary default prediction.

One small neural network per feature, summed under a logistic link, with
squared-hinge penalties escalated until individual and pairwise
monotonicity constraints certify on a dense derivative grid.
"""

from .baselines import FcnnModel, LrModel, fcnn_predict, fcnn_train, lr_predict, lr_train
from .data import (
    Dataset,
    RawTable,
    RecipeSpec,
    load_csv,
    load_snapshot,
    normalize,
    preprocess_generic,
    preprocess_gmsc,
    preprocess_taiwan,
    save_snapshot,
    split,
)
from .errors import (
    CertificationError,
    ConfigError,
    DataError,
    DegenerateImportanceError,
    MnamError,
    TrainingError,
)
from .importance import ImportanceReport, feature_importance, top_k_cumulative
from .metrics import EvalReport, auc, confusion_and_error
from .model import FeatureMeta, NamModel, load_model, save_model
from .monotonic import (
    CertReport,
    ConstraintSet,
    PenaltyConfig,
    certify,
    penalty_h1,
    penalty_h2,
    penalty_param_grads,
)
from .subnet import (
    SubNet,
    SubnetGrads,
    sigmoid,
    subnet_forward,
    subnet_input_grad,
    subnet_mixed_grads,
    subnet_param_grads,
)
from .training import EscalationRound, TrainConfig, bce_loss, certified_train, train_nam

__version__ = "0.1.0"
