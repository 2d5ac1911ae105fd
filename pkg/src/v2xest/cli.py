"""Command-line entry point: dataset generation, training, sweeps, plots.

Subcommands: ``generate``, ``train``, ``sweep``, ``plot-data``. Every
value resolves flag > config file (``--config``, JSON object keyed by
flag name) > built-in default; the seed's built-in default additionally
honors the ``V2X_SEED`` environment variable. Exit codes: 2 for
configuration errors, 3 for I/O errors, 4 when training diverges.

Each command writes a ``*.meta.json`` sidecar carrying the seed, a hash
of the resolved configuration, and the artifact format version, so any
artifact can be regenerated from its recorded inputs.
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import evaluate as ev
from .channel import ChannelModel, default_channel_model, load_tap_profile
from .estimators import StaConfig, TaConfig
from .ofdm import build_frame_spec, qam16
from .tcn import (DivergenceError, TcnModel, TrainConfig, load_checkpoint,
                  save_checkpoint, train)

META_FORMAT_VERSION = 1


def _default_seed() -> int:
    return int(os.environ.get("V2X_SEED", "0"))


def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return doc


class _Resolver:
    """Flag > config file > built-in default, recording resolved values."""

    def __init__(self, args):
        self.args = args
        self.config = _load_config(args.config)
        self.resolved = {}

    def get(self, key, default):
        val = getattr(self.args, key, None)
        if val is None:
            val = self.config.get(key, default)
        self.resolved[key] = val
        return val

    def hash(self) -> str:
        blob = json.dumps(self.resolved, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _write_meta(artifact_path, seed, config_hash):
    meta = {"seed": seed, "config_hash": config_hash,
            "format_version": META_FORMAT_VERSION}
    path = Path(str(artifact_path) + ".meta.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _channel_model(profile_path) -> ChannelModel:
    if profile_path is None:
        return default_channel_model()
    delays, powers, name = load_tap_profile(profile_path)
    return ChannelModel(delays_s=delays, powers=powers, profile_name=name)


def _parse_split(text, total):
    if text is None:
        train = round(total * 2 / 3)
        val = round(total * 2 / 9)
        return train, val, total - train - val
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("--split expects three comma-separated counts")
    return tuple(parts)


def cmd_generate(args) -> int:
    res = _Resolver(args)
    frames = int(res.get("frames", 18_000))
    snr = float(res.get("snr", 40.0))
    seed = int(res.get("seed", _default_seed()))
    profile = res.get("profile", None)
    split_text = res.get("split", None)
    outdir = Path(res.get("out", "dataset"))
    workers = int(res.get("threads", 1))
    train_n, val_n, test_n = _parse_split(split_text, frames)
    model = _channel_model(profile)
    manifest = ds.DatasetManifest(total=frames, train=train_n, val=val_n, test=test_n,
                                  train_snr_db=snr, profile=model.profile_name, seed=seed)
    spec = build_frame_spec()
    paths = ds.generate_dataset(manifest, spec, model, qam16(), outdir, workers=workers)
    _write_meta(paths["manifest"], seed, res.hash())
    print(f"dataset written to {outdir}")
    for split in ds.SPLITS:
        print(f"  {split}: {len(manifest.split_range(split))} frames")
    return 0


def cmd_train(args) -> int:
    res = _Resolver(args)
    data_dir = Path(res.get("data", "dataset"))
    outdir = Path(res.get("out", "run"))
    seed = int(res.get("seed", _default_seed()))
    cfg = TrainConfig(
        learning_rate=float(res.get("lr", 0.003)),
        epochs=int(res.get("epochs", 100)),
        step_size=int(res.get("step", 17)),
        gamma=float(res.get("gamma", 0.8)),
        batch_size=int(res.get("batch", 128)),
        dropout=float(res.get("dropout", 0.01)),
        seed=seed,
    )
    spec = build_frame_spec()
    train_x, train_y = ds.load_split(data_dir, "train")
    val_x, val_y = ds.load_split(data_dir, "val")
    # dataset layout is (frames, subcarriers, interleaved); the network
    # wants (frames, channels, positions)
    train_x = train_x.transpose(0, 2, 1)
    train_y = train_y.transpose(0, 2, 1)
    val_x = val_x.transpose(0, 2, 1)
    val_y = val_y.transpose(0, 2, 1)
    model = TcnModel(dropout_rate=cfg.dropout, rng=np.random.default_rng(seed))
    history = train(model, train_x, train_y, val_x, val_y, cfg,
                    positions=spec.data_rows,
                    log=lambda s: print(f"epoch {s.epoch:3d}  lr {s.lr:.6g}  "
                                        f"train {s.train_loss:.6e}  val {s.val_loss:.6e}"))
    outdir.mkdir(parents=True, exist_ok=True)
    ckpt_path = outdir / "tcn.ckpt"
    save_checkpoint(model, ckpt_path)
    hist_path = outdir / "history.csv"
    with open(hist_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,lr,train_loss,val_loss\n")
        for s in history:
            fh.write(f"{s.epoch},{s.lr:.10g},{s.train_loss:.10g},{s.val_loss:.10g}\n")
    _write_meta(ckpt_path, seed, res.hash())
    _write_meta(hist_path, seed, res.hash())
    best = min(history, key=lambda s: s.val_loss)
    print(f"checkpoint {ckpt_path} (best val loss {best.val_loss:.6e} at epoch {best.epoch})")
    return 0


def cmd_sweep(args) -> int:
    res = _Resolver(args)
    seed = int(res.get("seed", _default_seed()))
    estimators = tuple(res.get("estimators", ",".join(ev.ALL_ESTIMATORS)).split(","))
    snr_text = res.get("snr", ",".join(str(s) for s in range(0, 41, 5)))
    snr_grid = tuple(float(s) for s in str(snr_text).split(","))
    frames = int(res.get("frames", 500))
    checkpoint = res.get("checkpoint", None)
    profile = res.get("profile", None)
    out_path = Path(res.get("out", "results.csv"))
    workers = int(res.get("threads", 1))
    sta_cfg = StaConfig(alpha=float(res.get("sta_alpha", 2.0)),
                        beta=int(res.get("sta_beta", 2)))
    ta_cfg = TaConfig(alpha=float(res.get("ta_alpha", 2.0)))

    plan = ev.SweepPlan(snr_grid_db=snr_grid, estimators=estimators,
                        frames_per_point=frames, seed=seed)
    tcn_model = None
    needs_tcn = [e for e in estimators if e in ev.TCN_ESTIMATORS]
    if needs_tcn:
        if checkpoint is None or not Path(checkpoint).exists():
            raise ValueError(f"estimator '{needs_tcn[0]}' requires --checkpoint "
                             f"with a trained model file")
        tcn_model = load_checkpoint(checkpoint)
    records = ev.run_sweep(plan, build_frame_spec(), qam16(), _channel_model(profile),
                           tcn_model=tcn_model, sta_cfg=sta_cfg, ta_cfg=ta_cfg,
                           workers=workers)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    ev.write_csv(records, out_path)
    _write_meta(out_path, seed, res.hash())
    print(f"{len(records)} records -> {out_path}")
    return 0


def cmd_plot_data(args) -> int:
    res = _Resolver(args)
    results = res.get("results", "results.csv")
    outdir = Path(res.get("out", "plots"))
    records = ev.read_csv(results)
    paths = ev.write_plot_data(records, outdir)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v2xest",
        description="802.11p link simulator: dataset generation, TCN training, "
                    "and BER/NMSE estimator sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--seed", type=int, help="global seed (default: $V2X_SEED or 0)")
        p.add_argument("--threads", type=int, help="worker thread cap (default 1)")

    g = sub.add_parser("generate", help="generate a training dataset")
    common(g)
    g.add_argument("--frames", type=int, help="total frame count (default 18000)")
    g.add_argument("--split", help="train,val,test counts (default 2/3,2/9,1/9)")
    g.add_argument("--snr", type=float, help="generation SNR in dB (default 40)")
    g.add_argument("--profile", help="tap profile JSON (default: bundled profile)")
    g.add_argument("--out", help="output directory (default ./dataset)")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the TCN on a generated dataset")
    common(t)
    t.add_argument("--data", help="dataset directory (default ./dataset)")
    t.add_argument("--out", help="run directory (default ./run)")
    t.add_argument("--lr", type=float, help="learning rate (default 0.003)")
    t.add_argument("--epochs", type=int, help="epochs (default 100)")
    t.add_argument("--step", type=int, help="learning-rate step size (default 17)")
    t.add_argument("--gamma", type=float, help="learning-rate decay factor (default 0.8)")
    t.add_argument("--dropout", type=float, help="dropout rate (default 0.01)")
    t.add_argument("--batch", type=int, help="batch size (default 128)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="run a BER/NMSE sweep over estimators")
    common(s)
    s.add_argument("--estimators", help="comma list (default: all nine)")
    s.add_argument("--snr", help="comma list of SNR points in dB (default 0..40 step 5)")
    s.add_argument("--frames", type=int, help="frames per point (default 500)")
    s.add_argument("--checkpoint", help="trained model file (needed for tcn-*)")
    s.add_argument("--profile", help="tap profile JSON (default: bundled profile)")
    s.add_argument("--sta-alpha", dest="sta_alpha", type=float, help="STA alpha (default 2)")
    s.add_argument("--sta-beta", dest="sta_beta", type=int, help="STA beta (default 2)")
    s.add_argument("--ta-alpha", dest="ta_alpha", type=float, help="TA alpha (default 2)")
    s.add_argument("--out", help="results CSV path (default results.csv)")
    s.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot-data", help="emit gnuplot data files from a results CSV")
    common(p)
    p.add_argument("--results", help="results CSV (default results.csv)")
    p.add_argument("--out", help="output directory (default ./plots)")
    p.set_defaults(func=cmd_plot_data)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
