"""IEEE 802.11p OFDM frame geometry, 16-QAM mapping, and frame assembly.

The 802.11p PHY occupies 52 of 64 subcarriers (indices -26..-1, 1..26);
four of them (-21, -7, 7, 21) carry fixed pilots and the remaining 48
carry data. A frame starts with two identical full-band BPSK preamble
symbols followed by 50 data symbols. Everything in this package works on
frequency-domain grids of shape (52, n_symbols): rows follow the active
subcarriers in ascending index order, columns are OFDM symbols in time
order.
"""

from dataclasses import dataclass, field

import numpy as np

# 802.11a/p long-training BPSK sequence over subcarriers -26..26 (DC = 0).
_LONG_TRAINING = np.array(
    [1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1,
     1, -1, 1, 1, 1, 1, 0, 1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1,
     -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1], dtype=float)

PILOT_SUBCARRIERS = (-21, -7, 7, 21)
PILOT_VALUES = (1.0, 1.0, 1.0, -1.0)


@dataclass(frozen=True)
class ConstellationSpec:
    """Gray-labeled square QAM constellation, unit average energy.

    ``points[m]`` is the symbol whose bit label is the integer ``m``
    (MSB first). The two high bits select the in-phase level and the two
    low bits the quadrature level, each through the Gray sequence
    00, 01, 11, 10 -> -3, -1, +1, +3 (scaled to unit mean energy).
    """

    order: int
    bits_per_symbol: int
    points: np.ndarray = field(repr=False)


def qam16() -> ConstellationSpec:
    """Canonical Gray-mapped 16-QAM constellation."""
    gray_levels = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
    scale = 1.0 / np.sqrt(10.0)
    points = np.empty(16, dtype=complex)
    for label in range(16):
        i_bits = (label >> 2) & 0b11
        q_bits = label & 0b11
        points[label] = (gray_levels[i_bits] + 1j * gray_levels[q_bits]) * scale
    points.setflags(write=False)
    return ConstellationSpec(order=16, bits_per_symbol=4, points=points)


def nearest_constellation(z, c: ConstellationSpec):
    """Map value(s) to the closest constellation point (hard decision).

    Ties break toward the lowest-index point of the labeling table.
    Accepts a scalar or an array; returns the same shape.

    Raises
    ------
    ValueError
        If any input value is not finite.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("nearest_constellation requires finite input")
    dist = np.abs(z[..., None] - c.points)
    idx = np.argmin(dist, axis=-1)
    out = c.points[idx]
    return out if out.ndim else complex(out)


def qam_modulate(bits, c: ConstellationSpec) -> np.ndarray:
    """Map a bit sequence (MSB first per symbol) to constellation points.

    Raises
    ------
    ValueError
        If the bit count is not a multiple of ``c.bits_per_symbol``.
    """
    bits = np.asarray(bits, dtype=int).ravel()
    k = c.bits_per_symbol
    if bits.size % k != 0:
        raise ValueError(f"bit count {bits.size} not divisible by {k}")
    if bits.size == 0:
        return np.empty(0, dtype=complex)
    groups = bits.reshape(-1, k)
    weights = 1 << np.arange(k - 1, -1, -1)
    labels = groups @ weights
    return c.points[labels]


def qam_demodulate(symbols, c: ConstellationSpec) -> np.ndarray:
    """Hard-decision demap: nearest constellation point, then its label bits."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    if symbols.size == 0:
        return np.empty(0, dtype=int)
    dist = np.abs(symbols[:, None] - c.points)
    labels = np.argmin(dist, axis=1)
    k = c.bits_per_symbol
    shifts = np.arange(k - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).ravel()


@dataclass(frozen=True)
class FrameSpec:
    """802.11p frame geometry in the frequency domain.

    ``active_subcarriers`` lists the signed subcarrier indices in
    ascending order; grid row ``r`` corresponds to
    ``active_subcarriers[r]``. ``pilot_rows``/``data_rows`` are row
    positions into that order. ``preamble_values`` are the known BPSK
    preamble symbols per active subcarrier, ``pilot_values`` the fixed
    pilot symbols aligned with ``pilot_rows``.
    """

    fft_size: int
    active_subcarriers: np.ndarray = field(repr=False)
    pilot_indices: np.ndarray = field(repr=False)
    data_indices: np.ndarray = field(repr=False)
    pilot_rows: np.ndarray = field(repr=False)
    data_rows: np.ndarray = field(repr=False)
    pilot_values: np.ndarray = field(repr=False)
    preamble_values: np.ndarray = field(repr=False)
    num_data_symbols: int = 50
    num_preambles: int = 2

    @property
    def num_active(self) -> int:
        return self.active_subcarriers.size

    @property
    def num_symbols(self) -> int:
        """Total columns per frame: preambles + data symbols."""
        return self.num_preambles + self.num_data_symbols


def build_frame_spec() -> FrameSpec:
    """Canonical 802.11p frame spec: 52 active subcarriers, 4 pilots,
    48 data subcarriers, 2 preambles, 50 data symbols."""
    active = np.array([k for k in range(-26, 27) if k != 0], dtype=int)
    pilot_idx = np.array(PILOT_SUBCARRIERS, dtype=int)
    data_idx = np.array([k for k in active if k not in set(PILOT_SUBCARRIERS)], dtype=int)
    pos = {k: r for r, k in enumerate(active)}
    pilot_rows = np.array([pos[k] for k in pilot_idx], dtype=int)
    data_rows = np.array([pos[k] for k in data_idx], dtype=int)
    pilot_values = np.array(PILOT_VALUES, dtype=complex)
    preamble = _LONG_TRAINING[active + 26].astype(complex)
    for arr in (active, pilot_idx, data_idx, pilot_rows, data_rows, pilot_values, preamble):
        arr.setflags(write=False)
    return FrameSpec(
        fft_size=64,
        active_subcarriers=active,
        pilot_indices=pilot_idx,
        data_indices=data_idx,
        pilot_rows=pilot_rows,
        data_rows=data_rows,
        pilot_values=pilot_values,
        preamble_values=preamble,
    )


def assemble_frame(data_bits, spec: FrameSpec, c: ConstellationSpec) -> np.ndarray:
    """Build the transmitted frequency-domain frame grid.

    Columns 0..1 carry the preamble, columns 2.. carry data symbols with
    pilots at the pilot rows. Data symbols fill column by column: bits
    ``[j*48*4 : (j+1)*48*4]`` land in data column ``j``, data rows in
    ascending subcarrier order.

    Returns an array of shape (52, 52) for the canonical spec.

    Raises
    ------
    ValueError
        If ``data_bits`` does not contain exactly
        ``48 * num_data_symbols * bits_per_symbol`` bits.
    """
    bits = np.asarray(data_bits, dtype=int).ravel()
    n_data = spec.data_rows.size
    expected = n_data * spec.num_data_symbols * c.bits_per_symbol
    if bits.size != expected:
        raise ValueError(f"expected {expected} data bits, got {bits.size}")
    symbols = qam_modulate(bits, c).reshape(spec.num_data_symbols, n_data)
    grid = np.empty((spec.num_active, spec.num_symbols), dtype=complex)
    grid[:, : spec.num_preambles] = spec.preamble_values[:, None]
    data_cols = grid[:, spec.num_preambles:]
    data_cols[spec.pilot_rows, :] = spec.pilot_values[:, None]
    data_cols[spec.data_rows, :] = symbols.T
    return grid


def random_frame_bits(spec: FrameSpec, c: ConstellationSpec, rng) -> np.ndarray:
    """Draw one frame worth of uniform data bits from ``rng``."""
    n = spec.data_rows.size * spec.num_data_symbols * c.bits_per_symbol
    return rng.integers(0, 2, size=n)
