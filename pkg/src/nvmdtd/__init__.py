"""Read-channel detection laboratory for two-state non-volatile memories.

Simulate the resistance read channel with unknown high-state offset, train
small neural detectors from scratch, derive dynamic sensing thresholds
from their outputs, and check everything against closed-form and numerical
optimum detectors via Monte-Carlo bit-error-rate estimation.
"""

from .analytic import (
    Method,
    ThresholdResult,
    ber_derivative,
    ber_fixed_offset,
    ber_variable_offset,
    optimal_threshold_bisection,
    optimal_threshold_closed_form,
    optimal_threshold_empirical,
    q_function,
)
from .channel import (
    Block,
    ChannelParams,
    NoiseModel,
    QuantizerSpec,
    beta_alpha_for_sigma,
    block_stream,
    derive_sigmas,
    derive_seed,
    load_dataset,
    quantize,
    sample_block,
    sample_block_matrix,
    sample_noise,
    save_dataset,
)
from .detectors import (
    DetectorOutput,
    DtdResult,
    GenieDetector,
    NnDetector,
    ThresholdDetector,
    detect_with_nn,
    dtd_search,
    hamming,
    hard_decision,
    threshold_detect,
)
from .harness import (
    BerEstimate,
    DriftSchedule,
    SessionLog,
    SweepSpec,
    TriggerPolicy,
    dtd_calibrate,
    estimate_ber,
    run_sweep,
    simulate_recalibration_session,
    training_curve,
)
from .nn import (
    MlpModel,
    RnnModel,
    TrainConfig,
    TrainResult,
    count_params,
    load_weights,
    save_weights,
    train,
)

__version__ = "0.1.0"
