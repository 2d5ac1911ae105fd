"""Sweep BER/NMSE over SNR for classical and network-based estimators.

Expects the checkpoint from ``04_train_tcn.py`` (falls back to the
classical set when it is missing). Writes the results CSV plus one
gnuplot-ready data file per estimator into ``demo_out/``.
"""

from pathlib import Path

from v2xest import (SweepPlan, build_frame_spec, default_channel_model, qam16,
                    run_sweep, write_csv, write_plot_data)
from v2xest.tcn import load_checkpoint

OUT = Path("demo_out")
OUT.mkdir(exist_ok=True)
CKPT = OUT / "demo_tcn.ckpt"

estimators = ["ls", "dpa", "sta", "cdp", "trfi", "dpa-ta"]
tcn_model = None
if CKPT.exists():
    tcn_model = load_checkpoint(CKPT)
    estimators += ["tcn", "tcn-dpa", "tcn-dpa-ta"]
    print(f"using checkpoint {CKPT}")
else:
    print(f"no checkpoint at {CKPT} (run 04_train_tcn.py first); "
          "sweeping the classical set only")

plan = SweepPlan(snr_grid_db=(10.0, 20.0, 30.0, 40.0),
                 estimators=tuple(estimators), frames_per_point=50, seed=7)
records = run_sweep(plan, build_frame_spec(), qam16(), default_channel_model(),
                    tcn_model=tcn_model)

csv_path = OUT / "sweep.csv"
write_csv(records, csv_path)
write_plot_data(records, OUT / "plots")
print(f"results in {csv_path}, plot data in {OUT / 'plots'}/")

print(f"\n{'estimator':11s}" + "".join(f"  {s:>7.0f}dB" for s in plan.snr_grid_db))
for name in estimators:
    row = [r.ber for r in records if r.estimator == name]
    print(f"{name:11s}" + "".join(f"  {b:9.5f}" for b in row))
