"""Run every classical estimator on the same received frames.

Simulates a handful of frames at a moderate SNR and prints per-estimator
BER and NMSE, illustrating the usual ordering: the static LS estimate
ages badly over a time-varying frame, decision feedback (DPA) tracks it,
and the reliability-tested variants (CDP, TRFI) plus temporal averaging
clean up the decision-feedback errors.
"""

import numpy as np

from v2xest import (apply_channel, assemble_frame, build_frame_spec,
                    cdp_estimate, compute_ber, compute_nmse, default_channel_model,
                    dpa_estimate, equalize_and_decode, frame_rng, generate_response,
                    ls_estimate, qam16, random_frame_bits, sta_estimate, ta_process,
                    trfi_estimate)

SNR_DB = 25.0
FRAMES = 20

spec = build_frame_spec()
c = qam16()
model = default_channel_model()

totals = {}
for f in range(FRAMES):
    bits = random_frame_bits(spec, c, frame_rng(0, f, 0))
    frame = assemble_frame(bits, spec, c)
    resp = generate_response(model, spec, frame_rng(0, f, 1))
    y = apply_channel(frame, resp, SNR_DB, frame_rng(0, f, 2))
    h_ls = ls_estimate(y[:, 0], y[:, 1], spec)
    y_data = y[:, 2:]
    truth = resp[:, 2:]

    dpa = dpa_estimate(y_data, h_ls, spec, c)
    grids = {
        "ls": np.tile(h_ls[:, None], (1, spec.num_data_symbols)),
        "dpa": dpa,
        "sta": sta_estimate(y_data, h_ls, spec, c),
        "cdp": cdp_estimate(y_data, h_ls, y[:, 1], spec, c),
        "trfi": trfi_estimate(y_data, h_ls, y[:, 1], spec, c),
        "dpa-ta": ta_process(dpa),
    }
    for name, grid in grids.items():
        rx = equalize_and_decode(y_data, grid, spec, c)
        err, nm = totals.get(name, (0.0, 0.0))
        totals[name] = (err + compute_ber(bits, rx),
                        nm + 10 ** (compute_nmse(grid[spec.data_rows],
                                                 truth[spec.data_rows]) / 10))

print(f"{FRAMES} frames at {SNR_DB:.0f} dB over '{model.profile_name}'")
print(f"{'estimator':10s} {'BER':>10s} {'NMSE (dB)':>12s}")
for name, (err, nm) in totals.items():
    print(f"{name:10s} {err / FRAMES:10.5f} {10 * np.log10(nm / FRAMES):12.2f}")
