"""Doubly selective vehicular channel simulation.

Each tap of a tapped-delay-line model fades as a complex sum-of-sinusoids
process with the classical Jakes Doppler spectrum, so its temporal
autocorrelation is ``power * J0(2*pi*f_d*dt)``. The per-symbol channel
frequency response over the active subcarriers is the delay-steered sum
of the tap gains, and the link itself is the per-subcarrier multiplicative
model ``y = h * x + n`` with circular complex AWGN.

Reproducibility: every randomized operation takes a Generator from
:func:`frame_rng`, which derives independent, replayable streams from
``(seed, stream_id, role)``.
"""

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

DEFAULT_PROFILE = "vtv_sdww_like"

# Roles used to split one frame's stream into independent substreams.
ROLE_BITS = 0
ROLE_CHANNEL = 1
ROLE_NOISE = 2

# Stream ids at or above this value are reserved for evaluation so they
# can never collide with dataset-generation frame indices.
EVAL_STREAM_BASE = 2 ** 32


def frame_rng(seed: int, stream_id: int, role: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, stream_id, role)``.

    Identical arguments reproduce the identical stream bit for bit.
    """
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(stream_id), int(role))))


@dataclass(frozen=True)
class ChannelModel:
    """Tapped-delay-line channel with Jakes Doppler fading.

    ``delays_s`` are tap delays in seconds (strictly increasing, >= 0);
    ``powers`` the linear mean-square tap gains, normalized to sum to 1.
    """

    delays_s: np.ndarray = field(repr=False)
    powers: np.ndarray = field(repr=False)
    doppler_hz: float = 550.0
    symbol_duration: float = 8e-6
    subcarrier_spacing: float = 156_250.0
    velocity_kmh: float = 100.0
    num_sinusoids: int = 64
    profile_name: str = "custom"

    def __post_init__(self):
        delays = np.asarray(self.delays_s, dtype=float)
        powers = np.asarray(self.powers, dtype=float)
        if delays.shape != powers.shape or delays.ndim != 1 or delays.size == 0:
            raise ValueError("delays and powers must be matching nonempty 1-D arrays")
        if delays[0] < 0 or np.any(np.diff(delays) <= 0):
            raise ValueError("tap delays must be >= 0 and strictly increasing")
        if abs(powers.sum() - 1.0) > 1e-9 or np.any(powers <= 0):
            raise ValueError("tap powers must be positive and sum to 1")
        if self.num_sinusoids < 2 or self.num_sinusoids % 2:
            raise ValueError("num_sinusoids must be an even count >= 2")
        delays.setflags(write=False)
        powers.setflags(write=False)
        object.__setattr__(self, "delays_s", delays)
        object.__setattr__(self, "powers", powers)

    @property
    def num_taps(self) -> int:
        return self.delays_s.size


def load_tap_profile(path) -> tuple[np.ndarray, np.ndarray, str]:
    """Read a tap-profile JSON file: ``(delays_s, normalized_powers, name)``.

    The file holds ``taps: [{delay_ns, power_db}, ...]``; powers are
    converted to linear scale and normalized to sum to 1.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    taps = doc.get("taps")
    if not taps:
        raise ValueError(f"tap profile {path}: no taps defined")
    delays = np.array([t["delay_ns"] for t in taps], dtype=float) * 1e-9
    powers = 10.0 ** (np.array([t["power_db"] for t in taps], dtype=float) / 10.0)
    powers /= powers.sum()
    return delays, powers, str(doc.get("name", "unnamed"))


def default_channel_model(**overrides) -> ChannelModel:
    """Channel model from the bundled illustrative VTV-SDWW-like profile."""
    ref = resources.files("v2xest") / "profiles" / f"{DEFAULT_PROFILE}.json"
    with resources.as_file(ref) as path:
        delays, powers, name = load_tap_profile(path)
    kwargs = dict(delays_s=delays, powers=powers, profile_name=name)
    kwargs.update(overrides)
    return ChannelModel(**kwargs)


def tap_gains(model: ChannelModel, num_symbols: int, rng: np.random.Generator) -> np.ndarray:
    """Complex tap gain trajectories, shape ``(num_taps, num_symbols)``.

    Sum-of-sinusoids Jakes synthesis: per tap, ``num_sinusoids`` complex
    exponentials at Doppler frequencies ``+-f_d*cos(alpha_n)`` with
    independent uniform phases. The arrival angles are stratified over a
    quarter circle and mirrored, which keeps every frequency distinct
    (time averages converge) while the phase-averaged autocorrelation
    matches ``power * J0(2*pi*f_d*dt)`` to quadrature accuracy.
    """
    n = model.num_sinusoids
    half = n // 2
    alphas = (np.arange(half) + 0.5) * (np.pi / 2) / half
    omega_pos = 2.0 * np.pi * model.doppler_hz * np.cos(alphas)
    omegas = np.concatenate([omega_pos, -omega_pos])
    t = np.arange(num_symbols) * model.symbol_duration
    gains = np.empty((model.num_taps, num_symbols), dtype=complex)
    for l in range(model.num_taps):
        phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
        phase_matrix = omegas[:, None] * t[None, :] + phases[:, None]
        gains[l] = np.sqrt(model.powers[l] / n) * np.exp(1j * phase_matrix).sum(axis=0)
    return gains


def steering_matrix(model: ChannelModel, spec) -> np.ndarray:
    """Delay-steering matrix ``exp(-j*2*pi*k*df*tau)``, shape (52, num_taps)."""
    k = spec.active_subcarriers[:, None]
    tau = model.delays_s[None, :]
    return np.exp(-2j * np.pi * k * model.subcarrier_spacing * tau)


def generate_response(model: ChannelModel, spec, rng: np.random.Generator,
                      num_symbols: int | None = None) -> np.ndarray:
    """True channel frequency response grid, shape ``(52, num_symbols)``.

    Covers every frame column (preambles included); column ``i`` is the
    response at time ``i * symbol_duration``.
    """
    if num_symbols is None:
        num_symbols = spec.num_symbols
    gains = tap_gains(model, num_symbols, rng)
    return steering_matrix(model, spec) @ gains


def noise_variance(snr_db: float) -> float:
    """Complex noise variance for unit mean symbol energy."""
    return 10.0 ** (-snr_db / 10.0)


def apply_channel(frame: np.ndarray, resp: np.ndarray, snr_db: float,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Pass a frame through the channel: ``y = h * x + n``.

    ``snr_db = inf`` disables noise entirely. Noise is circular complex
    Gaussian with per-element variance ``10**(-snr_db/10)`` (the mean
    transmitted symbol energy on active subcarriers is 1 by construction).
    """
    frame = np.asarray(frame)
    resp = np.asarray(resp)
    if frame.shape != resp.shape:
        raise ValueError(f"frame shape {frame.shape} != response shape {resp.shape}")
    y = resp * frame
    if np.isinf(snr_db):
        return y
    if rng is None:
        raise ValueError("rng required when noise is enabled")
    sigma = np.sqrt(noise_variance(snr_db) / 2.0)
    noise = sigma * (rng.standard_normal(frame.shape) + 1j * rng.standard_normal(frame.shape))
    return y + noise
