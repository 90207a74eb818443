"""Private over-the-air aggregation toolkit.

Simulation of modulo-masked analog aggregation and its additive-noise
baselines, closed-form wrapped-Gaussian distortion analytics with bounds,
exact Gaussian leakage, exact finite-group privacy oracles, and a seeded
experiment harness with a CLI.
"""

from .analytics import (
    DistortionReport,
    LeakageReport,
    delta_bounds,
    delta_derivative,
    delta_derivative_sign,
    delta_pointwise,
    distortion_report,
    leakage_gaussian,
    leakage_p2,
    mask_covariance,
)
from .keys import (
    GeneratorMatrix,
    SecretKeyBundle,
    default_generator,
    sample_keys,
    verify_bundle,
)
from .numerics import GaussParams, gauss_moment_integrals, mod1, std_cdf, std_pdf
from .oracle import (
    DiscreteScenario,
    ExactMI,
    exact_client_leakage,
    exact_server_leakage,
    mc_mse,
)
from .protocol import (
    ChannelRealization,
    MessageModel,
    NoiseScheme,
    ProtocolConfig,
    RoundResult,
    decode_baseline,
    decode_p2,
    draw_channel,
    encode_baseline,
    encode_p2,
    run_round,
    transmit_and_superpose,
)

__version__ = "0.1.0"
