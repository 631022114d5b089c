"""Competitive worm propagation on sensor networks: exact simulator,
complex-network compiler, and snapshot-based learning."""

from .compiler import (
    LARGE_DEFAULT,
    EquivalenceReport,
    LocalBlockPlan,
    build_comparison_levels,
    build_format_adjustment,
    build_global_network,
    build_local_block,
    build_stage1_layer,
    network_final_state,
    verify_equivalence,
)
from .datagen import (
    SamplePool,
    audit_pool,
    gen_er_graph,
    gen_sample_pool,
    load_pool,
    load_sensor_graph,
    sample_model_params,
    save_pool,
    split_pool,
)
from .estimator import WormPropagationEstimator
from .graph import WsnGraph, load_graph, load_state, save_graph, save_state, topology_graph
from .learning import (
    EpochRecord,
    Metrics,
    ModelParams,
    TrainConfig,
    TrainingDivergedError,
    compute_metrics,
    evaluate,
    init_params,
    random_baseline,
    surrogate_loss,
    train,
)
from .network import (
    HARD,
    RELAXED,
    ActivationKind,
    BindingTable,
    ForwardTrace,
    LayerSpec,
    NetworkSpec,
    backward,
    finite_diff_check,
    forward,
    load_network,
    save_network,
)
from .simulate import (
    PropagationTrace,
    candidate_worms,
    exhaustive_oracle,
    export_trace,
    propagate,
    resolve_infection,
    step,
)
from .status import (
    InfectionState,
    decode_flat,
    decode_status,
    encode_flat,
    encode_status,
    flatten_status,
    node_loss,
    unflatten_status,
)

__version__ = "0.1.0"
