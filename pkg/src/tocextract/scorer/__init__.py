from .model import (
    Batch,
    EmbeddingCache,
    Op,
    TrainingError,
    backward,
    cross_entropy,
    encode_node,
    encode_sequence,
    forward,
    gnn_forward,
    loss_and_grad,
    node_inputs,
    predict,
    score_ops,
)
from .params import (
    CHECKPOINT_VERSION,
    CheckpointError,
    CheckpointVersionError,
    ConfigError,
    ScorerConfig,
    ScorerParams,
    init_params,
    load_params,
    save_params,
)
