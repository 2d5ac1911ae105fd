"""Link-level 802.11p simulator and vehicular channel estimators.

Frequency-domain frame simulation over a Jakes-fading tapped-delay-line
channel, the classical decision-directed estimator family (LS, DPA, STA,
CDP, TRFI, temporal averaging), a from-scratch temporal convolutional
network with exact gradients, and a BER/NMSE evaluation harness.
"""

from .channel import (ChannelModel, apply_channel, default_channel_model,
                      frame_rng, generate_response, load_tap_profile, tap_gains)
from .dataset import (DatasetManifest, deinterleave, generate_dataset,
                      interleave, load_split, make_sample, read_samples,
                      write_samples)
from .estimators import (StaConfig, TaConfig, cdp_estimate, dpa_estimate,
                         floor_divisor, frequency_average, interpolate_unreliable,
                         ls_estimate, sta_estimate, ta_process, trfi_estimate)
from .evaluate import (ALL_ESTIMATORS, EvalRecord, SweepPlan, compute_ber,
                       compute_nmse, equalize_and_decode, run_sweep, write_csv,
                       write_plot_data)
from .ofdm import (ConstellationSpec, FrameSpec, assemble_frame,
                   build_frame_spec, nearest_constellation, qam16,
                   qam_demodulate, qam_modulate, random_frame_bits)
from .pipeline import (dpa_replay, tcn_baseline_estimate, tcn_dpa_estimate,
                       tcn_dpa_ta_estimate, tcn_refine)
from .tcn import (Adam, DivergenceError, TcnModel, TrainConfig,
                  load_checkpoint, save_checkpoint, train)

__version__ = "0.1.0"
