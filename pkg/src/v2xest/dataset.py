"""Training-data generation, the interleaved-real sample layout, and the
binary dataset file format.

One sample is one simulated frame: the network input is the DPA estimate
grid over all 52 active subcarriers and the target is the true channel
at the 48 data subcarriers, both stored as real matrices with the
real/imaginary parts of each symbol interleaved along the column axis
(50 complex symbols become 100 real columns).

Dataset files are little-endian binary: magic ``V2XDS01``, u32 sample
count, u32 rows, u32 cols, then ``count*rows*cols`` float32 values
row-major. Each split stores an inputs file and a targets file next to a
JSON manifest sidecar.
"""

import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .channel import (ROLE_BITS, ROLE_CHANNEL, ROLE_NOISE, ChannelModel,
                      apply_channel, frame_rng, generate_response)
from .estimators import dpa_estimate, ls_estimate
from .ofdm import ConstellationSpec, FrameSpec, assemble_frame, random_frame_bits

DATASET_MAGIC = b"V2XDS01"
DATASET_FORMAT_VERSION = 1
SPLITS = ("train", "val", "test")


def interleave(grid: np.ndarray) -> np.ndarray:
    """Complex (rows, n) grid -> real (rows, 2n) matrix; column ``2j``
    holds the real part of symbol ``j`` and column ``2j+1`` its imaginary
    part."""
    grid = np.asarray(grid)
    out = np.empty((grid.shape[0], 2 * grid.shape[1]), dtype=float)
    out[:, 0::2] = grid.real
    out[:, 1::2] = grid.imag
    return out


def deinterleave(matrix: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`interleave`.

    Raises
    ------
    ValueError
        If the column count is odd.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape[1] % 2:
        raise ValueError("interleaved matrix needs an even column count")
    return matrix[:, 0::2] + 1j * matrix[:, 1::2]


@dataclass(frozen=True)
class DatasetManifest:
    """Dataset generation parameters; splits are contiguous frame-index
    ranges [0, train), [train, train+val), [train+val, total)."""

    total: int = 18_000
    train: int = 12_000
    val: int = 4_000
    test: int = 2_000
    train_snr_db: float = 40.0
    profile: str = "vtv-sdww-like-12tap"
    seed: int = 0
    format_version: int = DATASET_FORMAT_VERSION

    def __post_init__(self):
        if self.train + self.val + self.test != self.total:
            raise ValueError("split sizes must sum to the total frame count")
        if min(self.train, self.val, self.test) < 0 or self.total <= 0:
            raise ValueError("split sizes must be nonnegative and total positive")

    def split_range(self, split: str) -> range:
        if split == "train":
            return range(0, self.train)
        if split == "val":
            return range(self.train, self.train + self.val)
        if split == "test":
            return range(self.train + self.val, self.total)
        raise ValueError(f"unknown split {split!r}")


def manifest_hash(manifest: DatasetManifest, model: ChannelModel) -> str:
    """Stable hash of everything that determines the dataset bytes."""
    doc = asdict(manifest)
    doc["channel"] = {
        "delays_s": list(model.delays_s),
        "powers": list(model.powers),
        "doppler_hz": model.doppler_hz,
        "symbol_duration": model.symbol_duration,
        "subcarrier_spacing": model.subcarrier_spacing,
        "num_sinusoids": model.num_sinusoids,
    }
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def make_sample(seed: int, frame_index: int, snr_db: float, spec: FrameSpec,
                model: ChannelModel, c: ConstellationSpec):
    """Simulate frame ``frame_index`` and build its (input, target) pair.

    Returns float32 matrices of shape (52, 100) and (48, 100). The RNG
    streams are keyed by (seed, frame_index), so any frame regenerates
    identically in isolation.
    """
    bits = random_frame_bits(spec, c, frame_rng(seed, frame_index, ROLE_BITS))
    frame = assemble_frame(bits, spec, c)
    resp = generate_response(model, spec, frame_rng(seed, frame_index, ROLE_CHANNEL))
    y = apply_channel(frame, resp, snr_db, frame_rng(seed, frame_index, ROLE_NOISE))
    h_ls = ls_estimate(y[:, 0], y[:, 1], spec)
    dpa = dpa_estimate(y[:, spec.num_preambles:], h_ls, spec, c)
    target = resp[spec.data_rows, spec.num_preambles:]
    return (interleave(dpa).astype(np.float32),
            interleave(target).astype(np.float32))


def write_samples(path, samples) -> None:
    """Stream an iterable of equally-shaped float32 matrices to disk."""
    samples = iter(samples)
    try:
        first = next(samples)
    except StopIteration:
        raise ValueError(f"{path}: cannot write an empty dataset file") from None
    rows, cols = first.shape
    count = 1
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        header_pos = fh.tell()
        fh.write(struct.pack("<III", 0, rows, cols))
        fh.write(np.ascontiguousarray(first, dtype="<f4").tobytes())
        for sample in samples:
            if sample.shape != (rows, cols):
                raise ValueError(f"{path}: inconsistent sample shape {sample.shape}")
            fh.write(np.ascontiguousarray(sample, dtype="<f4").tobytes())
            count += 1
        fh.seek(header_pos)
        fh.write(struct.pack("<III", count, rows, cols))


def read_samples(path) -> np.ndarray:
    """Load a dataset file into a (count, rows, cols) float32 array."""
    with open(path, "rb") as fh:
        magic = fh.read(7)
        if magic != DATASET_MAGIC:
            raise ValueError(f"{path}: not a dataset file")
        count, rows, cols = struct.unpack("<III", fh.read(12))
        data = np.fromfile(fh, dtype="<f4", count=count * rows * cols)
    if data.size != count * rows * cols:
        raise ValueError(f"{path}: truncated payload")
    return data.reshape(count, rows, cols)


def split_paths(outdir, split: str):
    outdir = Path(outdir)
    return outdir / f"{split}_inputs.v2xds", outdir / f"{split}_targets.v2xds"


def generate_dataset(manifest: DatasetManifest, spec: FrameSpec, model: ChannelModel,
                     c: ConstellationSpec, outdir, workers: int = 1) -> dict:
    """Generate every split of a dataset into ``outdir``.

    Frames compute independently (optionally on ``workers`` threads) but
    are written in frame-index order, so the output bytes depend only on
    the manifest and channel model. Writes the manifest sidecar
    ``manifest.json`` and returns the per-split file paths.
    """
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create dataset directory {outdir}: {err}") from err

    def compute(frame_index):
        return make_sample(manifest.seed, frame_index, manifest.train_snr_db,
                           spec, model, c)

    paths = {}
    for split in SPLITS:
        frames = manifest.split_range(split)
        if len(frames) == 0:
            continue
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(compute, frames))
        else:
            results = [compute(f) for f in frames]
        in_path, tgt_path = split_paths(outdir, split)
        write_samples(in_path, (inp for inp, _ in results))
        write_samples(tgt_path, (tgt for _, tgt in results))
        paths[split] = (in_path, tgt_path)

    meta = asdict(manifest)
    meta["config_hash"] = manifest_hash(manifest, model)
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["manifest"] = outdir / "manifest.json"
    return paths


def load_split(outdir, split: str):
    """Read one split back as (inputs, targets) float32 arrays."""
    in_path, tgt_path = split_paths(outdir, split)
    return read_samples(in_path), read_samples(tgt_path)
