"""Greedy shallow ReLU networks from sphere-sampled dictionaries.

Pipeline: sample candidate directions on the sphere, build the activation
dictionary on the training data, optionally prune it by thresholding the
collapsed ridgelet transform, select nodes with the orthogonal greedy
algorithm, solve the convex outer-weight problem, and optionally fine-tune
with Adam. The bench module reproduces the reference experiments at desk
scale, and the CLI exposes every stage.
"""

from .core import (
    Atom,
    Dataset,
    Dictionary,
    Direction,
    ShallowNetwork,
    batch_eval,
    network_eval,
    relu,
    rescale_node,
)
from .sampling import (
    SamplerConfig,
    build_dictionary,
    generate_dataset,
    golden_spiral,
    sample_circle,
    sample_gaussian_sphere,
)
from .ridgelet import (
    CollapsedField,
    RadialQuadrature,
    collapsed_ridgelet,
    prune_dictionary,
    reconstruct_from_crf,
    ridgelet_transform,
    tau,
)
from .greedy import GreedyPath, GreedyState, init_state, oga_run, oga_step, select_model
from .solve import DesignMatrix, assemble_design, fit_outer_weights
from .train import (
    InitSpec,
    OptimizerState,
    TrainConfig,
    adam_update,
    loss_and_gradients,
    lr_at,
    multi_restart,
)
from .bench import ExperimentConfig, compute_errors, default_config, node_sweep, run_experiment, target_registry

__version__ = "0.1.0"
