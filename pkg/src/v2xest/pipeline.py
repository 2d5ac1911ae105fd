"""TCN-based estimation pipelines.

The trained network refines a whole frame's DPA estimate grid in one
pass. The refined grid then drives a second decision-directed sweep over
the frame (TCN-DPA), optionally followed by temporal averaging
(TCN-DPA-TA). The baseline variant returns the refined grid as-is.
"""

import numpy as np

from .dataset import deinterleave, interleave
from .estimators import TaConfig, _decide, dpa_estimate, ta_process
from .ofdm import ConstellationSpec, FrameSpec
from .tcn import TcnModel


def tcn_refine(dpa_grid, model: TcnModel, spec: FrameSpec) -> np.ndarray:
    """Refine a (52, 50) DPA estimate grid through the network.

    The grid is interleaved into the (channels, positions) layout, run
    in inference mode, and the output at the data-subcarrier positions
    is deinterleaved back; pilot rows carry over from the input grid.
    """
    dpa_grid = np.asarray(dpa_grid, dtype=complex)
    expected = (spec.num_active, spec.num_data_symbols)
    if dpa_grid.shape != expected:
        raise ValueError(f"estimate grid must have shape {expected}")
    channels = 2 * spec.num_data_symbols
    if model.input_channels != channels or model.output_channels != channels:
        raise ValueError(
            f"model expects {model.input_channels}->{model.output_channels} channels, "
            f"frame needs {channels}->{channels}")
    batch = interleave(dpa_grid).T[None, :, :]
    out = model.forward(batch, training=False)[0]
    refined = dpa_grid.copy()
    refined[spec.data_rows, :] = deinterleave(out[:, spec.data_rows].T)
    return refined


def dpa_replay(y, ref_grid, spec: FrameSpec, c: ConstellationSpec) -> np.ndarray:
    """Decision-directed sweep over a frame using a fixed reference grid.

    Column ``j`` of the output equalizes the received symbol by the
    reference grid's column ``j-1`` (column 0 reuses the reference's
    first column as the start value), snaps to the constellation, and
    re-divides. With the plain DPA grid as reference this reproduces the
    DPA output exactly.
    """
    y = np.asarray(y, dtype=complex)
    ref_grid = np.asarray(ref_grid, dtype=complex)
    if y.shape != ref_grid.shape:
        raise ValueError("received grid and reference grid must match in shape")
    out = np.empty_like(y)
    for j in range(y.shape[1]):
        ref_col = ref_grid[:, 0] if j == 0 else ref_grid[:, j - 1]
        d = _decide(y[:, j], ref_col, spec, c)
        out[:, j] = y[:, j] / d
    return out


def tcn_dpa_estimate(y, h_ls, model: TcnModel, spec: FrameSpec,
                     c: ConstellationSpec) -> np.ndarray:
    """DPA pass, network refinement, then a decision-directed replay
    against the refined grid."""
    refined = tcn_refine(dpa_estimate(y, h_ls, spec, c), model, spec)
    return dpa_replay(y, refined, spec, c)


def tcn_dpa_ta_estimate(y, h_ls, model: TcnModel, spec: FrameSpec,
                        c: ConstellationSpec, ta: TaConfig = TaConfig()) -> np.ndarray:
    """Temporal averaging applied to the TCN-DPA output."""
    return ta_process(tcn_dpa_estimate(y, h_ls, model, spec, c), ta)


def tcn_baseline_estimate(y, h_ls, model: TcnModel, spec: FrameSpec,
                          c: ConstellationSpec) -> np.ndarray:
    """Network refinement without any post-processing."""
    return tcn_refine(dpa_estimate(y, h_ls, spec, c), model, spec)
