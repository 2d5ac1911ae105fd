"""Classical decision-directed channel estimators for 802.11p frames.

All estimators consume the received data-symbol grid ``y`` of shape
(52, 50) (rows: active subcarriers, columns: data symbols) plus an
initial estimate ``h0`` (normally the least-squares preamble estimate)
and return an estimate grid of the same shape, column ``j`` holding the
channel estimate used for / produced at data symbol ``j``.

Implemented methods:

* LS: average the two received preambles against the known sequence.
* DPA: equalize with the previous estimate, snap to the constellation,
  re-divide (data-pilot-aided decision feedback).
* STA: DPA plus frequency-domain moving average and temporal smoothing.
* CDP: DPA plus a reliability check that re-equalizes the previous
  received symbol with both candidate estimates and keeps the old
  estimate where their decisions disagree.
* TRFI: CDP-style reliability split into reliable/unreliable subcarrier
  sets, with cubic interpolation across the unreliable ones.
* TA: first-order recursive temporal averaging of any estimate grid.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .ofdm import ConstellationSpec, FrameSpec, nearest_constellation

EQUALIZATION_FLOOR = 1e-9


@dataclass(frozen=True)
class StaConfig:
    """Spectral-temporal averaging parameters: time constant ``alpha``
    and one-sided frequency window ``beta`` (window size ``2*beta+1``)."""

    alpha: float = 2.0
    beta: int = 2

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1")
        if self.beta < 0 or 2 * self.beta + 1 > 52:
            raise ValueError("beta must satisfy 0 <= 2*beta+1 <= 52")


@dataclass(frozen=True)
class TaConfig:
    """Temporal-averaging weight parameter (new sample weight ``1/alpha``)."""

    alpha: float = 2.0

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1")


def floor_divisor(z, eps: float = EQUALIZATION_FLOOR) -> np.ndarray:
    """Replace near-zero divisors by ``eps`` at the same phase.

    Prevents overflow when equalizing through deep fades; exact zeros
    take phase 1.
    """
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    small = mag < eps
    if not np.any(small):
        return z
    out = z.copy()
    phase = np.ones(int(small.sum()), dtype=complex)
    nonzero = mag[small] > 0.0
    phase[nonzero] = z[small][nonzero] / mag[small][nonzero]
    out[small] = eps * phase
    return out


def ls_estimate(y_p1, y_p2, spec: FrameSpec) -> np.ndarray:
    """Least-squares estimate from the two received preamble symbols:
    ``(y_p1 + y_p2) / (2 * p)`` per active subcarrier."""
    p = spec.preamble_values
    if np.any(p == 0):
        raise ValueError("preamble must be full-band (no zero entries)")
    y_p1 = np.asarray(y_p1, dtype=complex)
    y_p2 = np.asarray(y_p2, dtype=complex)
    if y_p1.shape != p.shape or y_p2.shape != p.shape:
        raise ValueError("preamble vectors must cover the active subcarriers")
    return (y_p1 + y_p2) / (2.0 * p)


def _decide(y_col, h_ref, spec, c):
    """Hard decisions for one received symbol given a channel reference:
    demapped points on data rows, known pilots on pilot rows."""
    eq = y_col / floor_divisor(h_ref)
    d = np.empty_like(y_col)
    d[spec.data_rows] = nearest_constellation(eq[spec.data_rows], c)
    d[spec.pilot_rows] = spec.pilot_values
    return d


def _nearest_of(z, points):
    """Hard decision against an arbitrary alphabet (lowest index on ties)."""
    idx = np.argmin(np.abs(np.asarray(z)[..., None] - points), axis=-1)
    return points[idx]


def _check_grid(y, h0, spec):
    y = np.asarray(y, dtype=complex)
    h0 = np.asarray(h0, dtype=complex)
    if y.ndim != 2 or y.shape[0] != spec.num_active:
        raise ValueError(f"received grid must be ({spec.num_active}, n_symbols)")
    if h0.shape != (spec.num_active,):
        raise ValueError("h0 must be one value per active subcarrier")
    return y, h0


def dpa_estimate(y, h0, spec: FrameSpec, c: ConstellationSpec) -> np.ndarray:
    """Data-pilot-aided estimation across the frame.

    Per symbol: equalize by the previous estimate, snap data subcarriers
    to the nearest constellation point (pilots use their known values),
    then update ``h = y / d``.
    """
    y, h_prev = _check_grid(y, h0, spec)
    out = np.empty_like(y)
    for j in range(y.shape[1]):
        d = _decide(y[:, j], h_prev, spec, c)
        h_prev = y[:, j] / d
        out[:, j] = h_prev
    return out


def frequency_average(values, beta: int) -> np.ndarray:
    """Uniform moving average of width ``2*beta+1`` along a subcarrier
    vector; the window truncates at the band edges and renormalizes."""
    values = np.asarray(values, dtype=complex)
    if beta == 0:
        return values.copy()
    window = np.ones(2 * beta + 1)
    num = np.convolve(values, window, mode="same")
    den = np.convolve(np.ones(values.size), window, mode="same")
    return num / den


def sta_estimate(y, h0, spec: FrameSpec, c: ConstellationSpec,
                 cfg: StaConfig = StaConfig()) -> np.ndarray:
    """Spectral-temporal averaging: the per-symbol decision-directed
    update, smoothed over ``2*beta+1`` adjacent subcarriers and blended
    with the previous output at weight ``1/alpha``.

    With ``beta=0, alpha=1`` this reduces exactly to :func:`dpa_estimate`.
    """
    y, h_prev = _check_grid(y, h0, spec)
    out = np.empty_like(y)
    a = 1.0 / cfg.alpha
    for j in range(y.shape[1]):
        d = _decide(y[:, j], h_prev, spec, c)
        h_fd = frequency_average(y[:, j] / d, cfg.beta)
        h_prev = (1.0 - a) * h_prev + a * h_fd
        out[:, j] = h_prev
    return out


def cdp_estimate(y, h0, y_prev0, spec: FrameSpec, c: ConstellationSpec) -> np.ndarray:
    """Constructed-data-pilot estimation.

    Per symbol, after the decision-directed update, the previously
    received symbol is equalized by both the fresh update and the
    surviving previous estimate. Where the two decisions agree the fresh
    update is kept, elsewhere the previous estimate survives. ``y_prev0``
    is the received symbol preceding the first data symbol (the second
    preamble); being a known BPSK symbol, it is demapped against its own
    two-point alphabet (the constellation grid would put every
    equalized preamble value on a quadrature decision boundary).
    """
    y, h_prev = _check_grid(y, h0, spec)
    y_prev = np.asarray(y_prev0, dtype=complex)
    if y_prev.shape != (spec.num_active,):
        raise ValueError("y_prev0 must be one value per active subcarrier")
    out = np.empty_like(y)
    data = spec.data_rows
    alphabet = np.unique(spec.preamble_values)
    for j in range(y.shape[1]):
        d = _decide(y[:, j], h_prev, spec, c)
        h_dpa = y[:, j] / d
        d_new = _nearest_of(y_prev[data] / floor_divisor(h_dpa[data]), alphabet)
        d_old = _nearest_of(y_prev[data] / floor_divisor(h_prev[data]), alphabet)
        h_next = h_dpa.copy()
        disagree = data[d_new != d_old]
        h_next[disagree] = h_prev[disagree]
        out[:, j] = h_next
        h_prev = h_next
        y_prev = y[:, j]
        alphabet = c.points
    return out


def _reliability_split(y_prev, h_dpa, h_prev, spec, alphabet):
    """Rows where re-equalization by both candidates demaps identically
    (pilot rows always count as reliable)."""
    data = spec.data_rows
    d_new = _nearest_of(y_prev[data] / floor_divisor(h_dpa[data]), alphabet)
    d_old = _nearest_of(y_prev[data] / floor_divisor(h_prev[data]), alphabet)
    agree = d_new == d_old
    reliable = np.sort(np.concatenate([spec.pilot_rows, data[agree]]))
    unreliable = data[~agree]
    return reliable, unreliable


def interpolate_unreliable(values, reliable, unreliable) -> np.ndarray:
    """Fill ``values`` at the unreliable row ordinals by cubic
    interpolation over the reliable ordinals.

    Unreliable rows outside the reliable hull clamp to the nearest
    reliable value. With fewer than 4 reliable rows the input is
    returned unchanged (cubic interpolation is not defined).
    """
    values = np.asarray(values, dtype=complex)
    out = values.copy()
    if unreliable.size == 0 or reliable.size < 4:
        return out
    spline = CubicSpline(reliable, values[reliable])
    lo, hi = reliable[0], reliable[-1]
    inside = (unreliable >= lo) & (unreliable <= hi)
    out[unreliable[inside]] = spline(unreliable[inside])
    out[unreliable[unreliable < lo]] = values[lo]
    out[unreliable[unreliable > hi]] = values[hi]
    return out


def trfi_estimate(y, h0, y_prev0, spec: FrameSpec, c: ConstellationSpec) -> np.ndarray:
    """Reliability-tested estimation with frequency-domain interpolation.

    Uses the CDP reliability test to split subcarriers into a reliable
    set (kept from the fresh update) and an unreliable set, then fills
    the unreliable set by cubic interpolation over the reliable rows
    (row ordinals as the abscissa). Unreliable rows outside the reliable
    hull clamp to the nearest reliable value; frames with fewer than 4
    reliable rows keep the fresh update everywhere. The known preamble
    symbol demaps against its own alphabet (see :func:`cdp_estimate`).
    """
    y, h_prev = _check_grid(y, h0, spec)
    y_prev = np.asarray(y_prev0, dtype=complex)
    if y_prev.shape != (spec.num_active,):
        raise ValueError("y_prev0 must be one value per active subcarrier")
    out = np.empty_like(y)
    alphabet = np.unique(spec.preamble_values)
    for j in range(y.shape[1]):
        d = _decide(y[:, j], h_prev, spec, c)
        h_dpa = y[:, j] / d
        reliable, unreliable = _reliability_split(y_prev, h_dpa, h_prev, spec, alphabet)
        h_next = interpolate_unreliable(h_dpa, reliable, unreliable)
        out[:, j] = h_next
        h_prev = h_next
        y_prev = y[:, j]
        alphabet = c.points
    return out


def ta_process(estimates, cfg: TaConfig = TaConfig()) -> np.ndarray:
    """First-order recursive temporal averaging along the symbol axis:
    ``out_j = (1 - 1/alpha) * out_{j-1} + (1/alpha) * in_j``, seeded with
    the first input column. ``alpha=1`` returns the input unchanged."""
    est = np.asarray(estimates, dtype=complex)
    if est.ndim != 2 or est.shape[1] == 0:
        raise ValueError("estimate grid must be 2-D with at least one column")
    out = np.empty_like(est)
    out[:, 0] = est[:, 0]
    a = 1.0 / cfg.alpha
    for j in range(1, est.shape[1]):
        out[:, j] = (1.0 - a) * out[:, j - 1] + a * est[:, j]
    return out
