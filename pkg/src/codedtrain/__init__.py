"""Straggler-tolerant distributed gradient descent on erasure-coded data.

Data is partitioned into k row blocks and stored coded across n workers.
Redundant workers built from fair-coin binary columns download about half
of the k blocks instead of all of them, halving the encoding bandwidth,
while the master still decodes each matrix-vector product from the fastest
decodable subset of worker responses.
"""

from .analysis import (
    BandwidthReport,
    CostScheme,
    OverheadEstimate,
    bandwidth_cost,
    monte_carlo_extra_workers,
    scale_table,
)
from .blocks import (
    EncodedBlock,
    NotDecodableError,
    RowBlockPartition,
    coded_matvec_reference,
    encode_block,
    partial_product,
    partition_rows,
    reconstruct,
)
from .coding import (
    DecodableSet,
    GeneratorMatrix,
    ProtocolError,
    Scheme,
    decodable,
    decode,
    rlnc,
    systematic_mds,
    vandermonde_rs,
)
from .harness import ExperimentConfig, load_csv, synth_dataset
from .runtime import (
    StragglerMode,
    StragglerPolicy,
    TransportKind,
    launch_local_cluster,
)
from .trainers import (
    LabeledDataset,
    LocalEngine,
    MatvecEngine,
    Model,
    TrainState,
    TrainingAbortedError,
    gd_step,
    lr_gradient,
    sigmoid,
    svm_gradient,
    svm_margin_vector,
    train,
)

__version__ = "0.1.0"
