"""Ensemble mask networks: linear feedforward nets whose first layer is masked per input."""

from emnet.matdist import (
    MaskMatrix,
    NormLikelihood,
    SampleDistribution,
    generate_test_matrix,
    generate_training_set,
    norm_likelihood,
    sample_matrix_with_norm,
    training_set_size,
)
from emnet.netcore import (
    Architecture,
    MaskSnapshot,
    ModelState,
    TrainBatch,
    forward,
    mask_apply,
    merge,
    new_model,
    second_order_forward,
    sgd_step,
    tile_mask,
)
from emnet.trainer import TrainConfig, TrainLog, session, train
from emnet.evaluator import (
    CertificateReport,
    EvalConfig,
    EvalReport,
    certificate,
    eval_error,
    sparsity_sweep,
    weight_report,
)

__version__ = "0.1.0"
