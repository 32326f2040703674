"""Contrastive optimal-transport flow at desk scale.

Neural OT map estimation, bridge-noised contrastive training of an origin
encoder, one-step/multi-step samplers with zero-shot editing, and the
exact-OT oracles everything is validated against.

Data conventions: a point is a 1-D float64 numpy array; a sample batch is
a row-major 2-D array, one sample per row.
"""

from .ablate import AblateConfig, run_ablation
from .bridge import (
    AugmentationPoint,
    CotPair,
    TimeGrid,
    augment_point,
    bridge_marginal,
    mode_time_density,
    sample_bridge_marginal,
    sample_bridge_mixture,
    sample_cot_pair,
    sample_timestep_pair,
)
from .checkpoints import (
    Checkpoint,
    checkpoint_from_encoder,
    checkpoint_from_model,
    encoder_from_checkpoint,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from .datasets import DatasetSpec, gen_dataset, sample_batch
from .encoder import CotEncoder, CotTrainConfig, cot_loss, encoder_eval, init_cot_encoder, train_cot
from .errors import CotFlowError, DataError, NumericError, UsageError, VersionError
from .neural_ot import (
    GaussianSpec,
    NeuralOTModel,
    TrainConfig,
    gaussian_ot_map,
    init_neural_ot,
    map_descent_step,
    psi_ascent_step,
    train_neural_ot,
    transport_cost,
    transport_map,
)
from .nn import (
    AdamState,
    MlpGrads,
    MlpParams,
    adam_step,
    init_adam,
    init_mlp,
    mlp_backward,
    mlp_forward,
    time_embed,
)
from .oracles import (
    CouplingPlan,
    MetricReport,
    compute_metrics,
    energy_distance,
    exact_ot_small,
    sinkhorn,
    sliced_w2,
    w2_1d,
)
from .rng import Rng
from .sampling import (
    MaskedGuidance,
    SampleSchedule,
    compose_guidance,
    edit_augment,
    edit_compose,
    edit_couple,
    sample_ancestral,
    sample_multi_step,
    sample_one_step,
)

__version__ = "0.1.0"
