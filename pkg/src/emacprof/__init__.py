"""Energy profiling for spiking and conventional layered networks.

The package simulates discrete-time inference over manifest-described
networks, counts the synaptic events and neuron updates each layer
actually performs, and prices both in EMAC units (multiply-accumulate
equivalents, with accumulate-only operations at two thirds). A structural
analytic estimate, an exact event-driven count, and a least-squares bridge
from counts to measured joules share one set of per-model energy
parameters, so numbers stay comparable across the whole toolchain.
"""

from .build import NetworkBuilder
from .calib import (
    EnergyModel,
    Observation,
    fit_energy_model,
    model_from_json,
    model_to_json,
    observation_from_run,
    predict_energy,
    read_observations_csv,
    write_observations_csv,
)
from .codec import (
    Decision,
    EncodedInput,
    EncodingMode,
    decode_max_membrane,
    decode_roc,
    encode,
    load_input_tensor,
    poisson_slice,
    save_input_tensor,
)
from .emac import (
    EnergyReport,
    LayerEnergy,
    LayerRates,
    ann_mac_count,
    emac_analytic,
    emac_exact,
    rates_from_trace,
)
from .engine import (
    AggregateStats,
    InferenceResult,
    SpikeTrace,
    run_dataset,
    run_inference,
    static_split,
)
from .errors import (
    EmacProfError,
    EmptyDataset,
    EmptyHistory,
    EmptyRaster,
    IllConditioned,
    MaskViolation,
    MissingMeasurement,
    MissingRates,
    NonFiniteState,
    RankDeficient,
    RateOutOfRange,
    SchemaError,
    ShapeMismatch,
    TraceNetMismatch,
    UnknownRef,
)
from .netspec import (
    Coding,
    LayerCounts,
    LayerKind,
    LayerSpec,
    NetworkSpec,
    layer_counts,
    networks_equal,
    parse_manifest,
    parse_network,
    read_weights_container,
    serialize_manifest,
    serialize_network,
    structural_counts,
    write_weights_container,
)
from .neuron import (
    AC_EMAC,
    MAC_EMAC,
    EnergyParams,
    NeuronKind,
    NeuronModelSpec,
    NeuronState,
    OpCount,
    OpKind,
    ann_activation,
    classify_synaptic_ops,
    classify_update_ops,
    energy_params,
    ifl_step,
    lif_step,
    state_zeros,
)

__version__ = "0.1.0"

__all__ = [
    "AC_EMAC",
    "AggregateStats",
    "Coding",
    "Decision",
    "EmacProfError",
    "EmptyDataset",
    "EmptyHistory",
    "EmptyRaster",
    "EncodedInput",
    "EncodingMode",
    "EnergyModel",
    "EnergyParams",
    "EnergyReport",
    "IllConditioned",
    "InferenceResult",
    "LayerCounts",
    "LayerEnergy",
    "LayerKind",
    "LayerRates",
    "LayerSpec",
    "MAC_EMAC",
    "MaskViolation",
    "MissingMeasurement",
    "MissingRates",
    "NetworkBuilder",
    "NetworkSpec",
    "NeuronKind",
    "NeuronModelSpec",
    "NeuronState",
    "NonFiniteState",
    "Observation",
    "OpCount",
    "OpKind",
    "RankDeficient",
    "RateOutOfRange",
    "SchemaError",
    "ShapeMismatch",
    "SpikeTrace",
    "TraceNetMismatch",
    "UnknownRef",
    "ann_activation",
    "ann_mac_count",
    "classify_synaptic_ops",
    "classify_update_ops",
    "decode_max_membrane",
    "decode_roc",
    "emac_analytic",
    "emac_exact",
    "encode",
    "energy_params",
    "fit_energy_model",
    "ifl_step",
    "layer_counts",
    "lif_step",
    "load_input_tensor",
    "model_from_json",
    "model_to_json",
    "networks_equal",
    "observation_from_run",
    "parse_manifest",
    "parse_network",
    "poisson_slice",
    "predict_energy",
    "rates_from_trace",
    "read_observations_csv",
    "read_weights_container",
    "run_dataset",
    "run_inference",
    "save_input_tensor",
    "serialize_manifest",
    "serialize_network",
    "state_zeros",
    "static_split",
    "structural_counts",
    "write_weights_container",
    "__version__",
]
