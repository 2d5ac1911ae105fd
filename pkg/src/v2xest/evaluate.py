"""BER/NMSE metrics and multi-SNR evaluation sweeps.

A sweep simulates fresh frames per (SNR, estimator) point, runs every
requested estimator on the same received frames, decodes through each
estimate, and accumulates bit error rate and normalized mean squared
error (both over data subcarriers and data symbols only). Evaluation RNG
streams start at ``EVAL_STREAM_BASE`` so they can never collide with
dataset-generation streams.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import (EVAL_STREAM_BASE, ROLE_BITS, ROLE_CHANNEL, ROLE_NOISE,
                      ChannelModel, apply_channel, frame_rng, generate_response)
from .estimators import (StaConfig, TaConfig, cdp_estimate, dpa_estimate,
                         floor_divisor, ls_estimate, sta_estimate, ta_process,
                         trfi_estimate)
from .ofdm import (ConstellationSpec, FrameSpec, assemble_frame, qam_demodulate,
                   random_frame_bits)
from .pipeline import dpa_replay, tcn_refine

NMSE_FLOOR_DB = -150.0

CLASSICAL_ESTIMATORS = ("ls", "dpa", "sta", "cdp", "trfi", "dpa-ta")
TCN_ESTIMATORS = ("tcn", "tcn-dpa", "tcn-dpa-ta")
ALL_ESTIMATORS = CLASSICAL_ESTIMATORS + TCN_ESTIMATORS


def compute_ber(tx_bits, rx_bits) -> float:
    """Fraction of differing bits between two equal-length sequences."""
    tx = np.asarray(tx_bits, dtype=int).ravel()
    rx = np.asarray(rx_bits, dtype=int).ravel()
    if tx.size != rx.size or tx.size == 0:
        raise ValueError("bit sequences must be nonempty and equally long")
    return float(np.mean(tx != rx))


def compute_nmse(est, truth) -> float:
    """Error energy relative to channel energy, in dB, floored at -150.

    Raises
    ------
    ValueError
        If the reference grid is identically zero.
    """
    est = np.asarray(est, dtype=complex)
    truth = np.asarray(truth, dtype=complex)
    if est.shape != truth.shape:
        raise ValueError("estimate and reference must have equal shapes")
    energy = float(np.sum(np.abs(truth) ** 2))
    if energy == 0.0:
        raise ValueError("reference channel is identically zero")
    ratio = float(np.sum(np.abs(est - truth) ** 2)) / energy
    if ratio <= 0.0:
        return NMSE_FLOOR_DB
    return max(10.0 * np.log10(ratio), NMSE_FLOOR_DB)


def equalize_and_decode(y_data, est, spec: FrameSpec, c: ConstellationSpec) -> np.ndarray:
    """Recover the frame's data bits by equalizing with an estimate grid
    and hard-demapping, in the bit order used by frame assembly."""
    y_data = np.asarray(y_data, dtype=complex)
    est = np.asarray(est, dtype=complex)
    if y_data.shape != est.shape:
        raise ValueError("received grid and estimate grid must match in shape")
    z = y_data[spec.data_rows] / floor_divisor(est[spec.data_rows])
    return qam_demodulate(z.T.ravel(), c)


@dataclass(frozen=True)
class EvalRecord:
    """One sweep point: metrics for a single estimator at a single SNR."""

    snr_db: float
    estimator: str
    ber: float
    nmse_db: float
    frames: int
    seed: int


@dataclass(frozen=True)
class SweepPlan:
    snr_grid_db: tuple = tuple(float(s) for s in range(0, 41, 5))
    estimators: tuple = ALL_ESTIMATORS
    frames_per_point: int = 500
    seed: int = 0

    def __post_init__(self):
        if not self.snr_grid_db or not self.estimators:
            raise ValueError("sweep needs at least one SNR point and one estimator")
        unknown = set(self.estimators) - set(ALL_ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimator(s): {sorted(unknown)}")
        if self.frames_per_point < 1:
            raise ValueError("frames_per_point must be >= 1")


def _estimate_frame(name, y, h_ls, spec, c, tcn_model, sta_cfg, ta_cfg, shared):
    """Estimate grid for one frame; DPA/refined grids are shared across
    the estimators that reuse them."""
    y_data = y[:, spec.num_preambles:]
    if name == "ls":
        return np.tile(h_ls[:, None], (1, spec.num_data_symbols))
    if name in ("dpa", "dpa-ta", "tcn", "tcn-dpa", "tcn-dpa-ta"):
        if "dpa" not in shared:
            shared["dpa"] = dpa_estimate(y_data, h_ls, spec, c)
        if name == "dpa":
            return shared["dpa"]
        if name == "dpa-ta":
            return ta_process(shared["dpa"], ta_cfg)
        if "refined" not in shared:
            shared["refined"] = tcn_refine(shared["dpa"], tcn_model, spec)
        if name == "tcn":
            return shared["refined"]
        if "tcn-dpa" not in shared:
            shared["tcn-dpa"] = dpa_replay(y_data, shared["refined"], spec, c)
        if name == "tcn-dpa":
            return shared["tcn-dpa"]
        return ta_process(shared["tcn-dpa"], ta_cfg)
    if name == "sta":
        return sta_estimate(y_data, h_ls, spec, c, sta_cfg)
    if name == "cdp":
        return cdp_estimate(y_data, h_ls, y[:, 1], spec, c)
    if name == "trfi":
        return trfi_estimate(y_data, h_ls, y[:, 1], spec, c)
    raise ValueError(f"unknown estimator {name!r}")


def _frame_point(plan, spec, c, model, tcn_model, sta_cfg, ta_cfg,
                 snr_db, stream_id):
    """Per-frame metric contributions: {estimator: (bit_errors, bits, nmse_ratio)}."""
    bits = random_frame_bits(spec, c, frame_rng(plan.seed, stream_id, ROLE_BITS))
    frame = assemble_frame(bits, spec, c)
    resp = generate_response(model, spec, frame_rng(plan.seed, stream_id, ROLE_CHANNEL))
    y = apply_channel(frame, resp, snr_db, frame_rng(plan.seed, stream_id, ROLE_NOISE))
    h_ls = ls_estimate(y[:, 0], y[:, 1], spec)
    y_data = y[:, spec.num_preambles:]
    truth = resp[:, spec.num_preambles:]
    truth_energy = float(np.sum(np.abs(truth[spec.data_rows]) ** 2))
    shared = {}
    out = {}
    for name in plan.estimators:
        grid = _estimate_frame(name, y, h_ls, spec, c, tcn_model, sta_cfg, ta_cfg, shared)
        rx = equalize_and_decode(y_data, grid, spec, c)
        errors = int(np.sum(rx != bits))
        err_energy = float(np.sum(np.abs(grid[spec.data_rows] - truth[spec.data_rows]) ** 2))
        out[name] = (errors, bits.size, err_energy / truth_energy)
    return out


def run_sweep(plan: SweepPlan, spec: FrameSpec, c: ConstellationSpec,
              model: ChannelModel, tcn_model=None,
              sta_cfg: StaConfig = StaConfig(), ta_cfg: TaConfig = TaConfig(),
              workers: int = 1) -> list:
    """Evaluate every (estimator, SNR) point of the plan.

    All estimators at a point see the same received frames, which keeps
    ordering comparisons free of cross-estimator Monte-Carlo noise.
    Records come back ordered by (estimator, snr) following the plan.

    Raises
    ------
    ValueError
        If a TCN-based estimator is requested without a trained model.
    """
    for name in plan.estimators:
        if name in TCN_ESTIMATORS and tcn_model is None:
            raise ValueError(f"estimator '{name}' requires a trained TCN checkpoint")

    per_point = {}
    for si, snr_db in enumerate(plan.snr_grid_db):
        base = EVAL_STREAM_BASE + si * plan.frames_per_point
        streams = [base + f for f in range(plan.frames_per_point)]

        def work(stream_id, _snr=snr_db):
            return _frame_point(plan, spec, c, model, tcn_model, sta_cfg, ta_cfg,
                                _snr, stream_id)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                frames = list(pool.map(work, streams))
        else:
            frames = [work(s) for s in streams]
        for name in plan.estimators:
            errors = sum(fr[name][0] for fr in frames)
            bits = sum(fr[name][1] for fr in frames)
            mean_ratio = float(np.mean([fr[name][2] for fr in frames]))
            nmse_db = (NMSE_FLOOR_DB if mean_ratio <= 0.0
                       else max(10.0 * np.log10(mean_ratio), NMSE_FLOOR_DB))
            per_point[(name, snr_db)] = EvalRecord(
                snr_db=float(snr_db), estimator=name, ber=errors / bits,
                nmse_db=nmse_db, frames=plan.frames_per_point, seed=plan.seed)

    return [per_point[(name, snr_db)] for name in plan.estimators
            for snr_db in plan.snr_grid_db]


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def write_csv(records, path) -> None:
    """Emit sweep records as CSV with 6-significant-digit numbers."""
    lines = ["snr_db,estimator,ber,nmse_db,frames,seed"]
    for r in records:
        lines.append(f"{_fmt(r.snr_db)},{r.estimator},{_fmt(r.ber)},"
                     f"{_fmt(r.nmse_db)},{r.frames},{r.seed}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> list:
    """Parse a results CSV written by :func:`write_csv`."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "snr_db,estimator,ber,nmse_db,frames,seed":
            raise ValueError(f"{path}: unrecognized results CSV header")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            snr, name, ber, nmse, frames, seed = line.split(",")
            records.append(EvalRecord(float(snr), name, float(ber), float(nmse),
                                      int(frames), int(seed)))
    return records


def write_plot_data(records, outdir) -> list:
    """Write one gnuplot-style data file per estimator:
    ``snr_db ber nmse_db`` rows ordered by SNR."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    names = []
    for r in records:
        if r.estimator not in names:
            names.append(r.estimator)
    for name in names:
        rows = sorted((r for r in records if r.estimator == name),
                      key=lambda r: r.snr_db)
        path = outdir / f"{name}.dat"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# estimator: {name}\n# snr_db ber nmse_db\n")
            for r in rows:
                fh.write(f"{_fmt(r.snr_db)} {_fmt(r.ber)} {_fmt(r.nmse_db)}\n")
        paths.append(path)
    return paths
