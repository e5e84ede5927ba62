"""Rate-splitting precoding for MU-MISO FDD downlinks with incomplete CSI."""

from .awamse_rs import SolveTrace, init_precoder, run_awamse_rs
from .baselines import awamse_no_rs, mmse_precoder
from .bounds import (
    FilterWeightState,
    PrecoderSet,
    average_mse,
    awamse,
    link_statistics,
    mmse_filters,
    optimal_weights,
    rate_lower_bounds,
    sum_rate_lower_bound,
)
from .channel import (
    ChannelEstimate,
    CovarianceModel,
    EstimateSet,
    SystemConfig,
    draw_channel,
    estimate_users,
    lmmse_estimate,
    make_pilot_matrix,
    observe,
    synth_covariance,
)
from .sim import SweepSpec, active_stream_count, high_snr_slope, run_sweep, run_trial

__version__ = "0.1.0"
