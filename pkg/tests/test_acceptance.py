"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run pytest with ``-s`` or read the
captured output). The scaled end-to-end experiment (criterion 9) trains
the network once per session; expect a few minutes of runtime.
"""

import time

import numpy as np
import pytest
from scipy.special import j0
from scipy.stats import spearmanr

import v2xest as vx
from v2xest.channel import ChannelModel
from v2xest.estimators import StaConfig, TaConfig
from v2xest.evaluate import SweepPlan, run_sweep
from v2xest.tcn import TcnModel, TrainConfig, mse_loss, train

SPEC = vx.build_frame_spec()
C = vx.qam16()
CHANNEL = vx.default_channel_model()

# Scaled experiment per the desk-scale ordering criterion: 1000 training
# frames, 20 epochs, 200 evaluation frames per SNR point. Training knobs
# that the experiment leaves free are rescaled for the 12x-smaller run:
# batch 1 with a faster step decay (5, 0.5) instead of the full-scale
# 128 / (17, 0.8) defaults, which would leave only 160 optimizer steps
# and a network worse than its own input.
SCALED_TRAIN_FRAMES = 1_000
SCALED_EPOCHS = 20
SCALED_EVAL_FRAMES = 200
SCALED_BATCH = 1
SCALED_STEP = 5
SCALED_GAMMA = 0.5
ORDERING_TOLERANCE = 1.1
SNR_GRID = tuple(float(s) for s in range(0, 41, 5))


def _report(criterion, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def _noise_free_frame(seed=0):
    """Noise-free frame over a frozen (time-invariant) channel."""
    model = ChannelModel(delays_s=CHANNEL.delays_s, powers=CHANNEL.powers,
                         doppler_hz=0.0)
    bits = vx.random_frame_bits(SPEC, C, vx.frame_rng(seed, 0, 0))
    frame = vx.assemble_frame(bits, SPEC, C)
    resp = vx.generate_response(model, SPEC, vx.frame_rng(seed, 0, 1))
    return bits, frame, resp, frame * resp


def _noisy_frame(seed, snr_db=15.0):
    bits = vx.random_frame_bits(SPEC, C, vx.frame_rng(seed, 0, 0))
    frame = vx.assemble_frame(bits, SPEC, C)
    resp = vx.generate_response(CHANNEL, SPEC, vx.frame_rng(seed, 0, 1))
    y = vx.apply_channel(frame, resp, snr_db, vx.frame_rng(seed, 0, 2))
    return bits, resp, y


def test_criterion_1_estimator_exactness():
    start = time.perf_counter()
    _, frame, resp, y = _noise_free_frame(1)
    h = resp[:, 0]
    truth = resp[:, 2:]
    h_ls = vx.ls_estimate(y[:, 0], y[:, 1], SPEC)
    grids = {
        "ls": np.tile(h_ls[:, None], (1, 50)),
        "dpa": vx.dpa_estimate(y[:, 2:], h_ls, SPEC, C),
        "sta": vx.sta_estimate(y[:, 2:], h_ls, SPEC, C, StaConfig(alpha=1.0, beta=0)),
        "cdp": vx.cdp_estimate(y[:, 2:], h_ls, y[:, 1], SPEC, C),
        "trfi": vx.trfi_estimate(y[:, 2:], h_ls, y[:, 1], SPEC, C),
    }
    worst = max(float(np.max(np.abs(g - truth) / np.abs(truth)))
                for g in grids.values())
    elapsed = time.perf_counter() - start
    _report(1, worst < 1e-10 and elapsed < 1.0,
            f"max relative error {worst:.2e}, runtime {elapsed:.2f}s")


def test_criterion_2_reduction_identities():
    model = TcnModel(rng=np.random.default_rng(99))
    ok = True
    for seed in range(100):
        _, _, y = _noisy_frame(seed, snr_db=12.0)
        h_ls = vx.ls_estimate(y[:, 0], y[:, 1], SPEC)
        y_data = y[:, 2:]
        dpa = vx.dpa_estimate(y_data, h_ls, SPEC, C)
        sta = vx.sta_estimate(y_data, h_ls, SPEC, C, StaConfig(alpha=1.0, beta=0))
        ok &= np.array_equal(sta, dpa)
        ok &= np.array_equal(vx.ta_process(dpa, TaConfig(alpha=1.0)), dpa)
        ok &= np.array_equal(vx.dpa_replay(y_data, dpa, SPEC, C), dpa)
        tcn_dpa = vx.tcn_dpa_estimate(y_data, h_ls, model, SPEC, C)
        composed = vx.ta_process(tcn_dpa, TaConfig(alpha=2.0))
        direct = vx.tcn_dpa_ta_estimate(y_data, h_ls, model, SPEC, C, TaConfig(alpha=2.0))
        ok &= np.array_equal(direct, composed)
        if not ok:
            break
    _report(2, ok, "STA(b=0,a=1)=DPA, TA(1)=id, identity-refined TCN-DPA=DPA, "
                   "TCN-DPA-TA=TA(TCN-DPA) on 100 random frames")


def test_criterion_3_oracle_equivalence():
    rng = np.random.default_rng(3)
    z = rng.normal(size=10_000) + 1j * rng.normal(size=10_000)
    got = vx.nearest_constellation(z, C)
    want = np.array([C.points[int(np.argmin(np.abs(v - C.points)))] for v in z])
    exact = np.array_equal(got, want)

    fd = vx.frequency_average(np.array([1.0, 2.0j, 3.0]), 1)
    fd_ok = abs(fd[1] - (1 + 2j + 3) / 3) < 1e-12

    v = 0.75 - 0.25j
    grid = np.full((3, 25), v)
    grid[:, 0] = 0.0
    out = vx.ta_process(grid, TaConfig(alpha=2.0))
    ta_ok = all(np.all(np.abs(out[:, j] - v * (1 - 0.5 ** j)) < 1e-12)
                for j in range(25))
    _report(3, exact and fd_ok and ta_ok,
            "nearest point = brute force on 1e4 draws; STA window and TA "
            "recursion match closed forms to 1e-12")


def test_criterion_4_gradient_check():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    model = TcnModel(input_channels=3, hidden_channels=(5, 4), output_channels=2,
                     kernel_size=2, dilations=(1, 2), dropout_rate=0.0,
                     rng=rng, dtype=np.float64)
    x = rng.normal(size=(2, 3, 10))
    pos = np.array([0, 2, 5, 9])
    targets = rng.normal(size=(2, 2, 4))
    model.zero_grads()
    model.loss_and_gradients(x, targets, positions=pos)
    eps = 1e-5
    checked = 0
    worst = 0.0
    for name, param, grad in model.parameters():
        flat, gflat = param.ravel(), grad.ravel()
        for i in rng.choice(flat.size, size=min(4, flat.size), replace=False):
            orig = flat[i]
            flat[i] = orig + eps
            lp = mse_loss(model.forward(x), targets, pos)
            flat[i] = orig - eps
            lm = mse_loss(model.forward(x), targets, pos)
            flat[i] = orig
            num = (lp - lm) / (2 * eps)
            worst = max(worst, abs(num - gflat[i]) / max(1e-12, abs(num) + abs(gflat[i])))
            checked += 1
    elapsed = time.perf_counter() - start
    _report(4, checked >= 25 and worst < 1e-4 and elapsed < 30.0,
            f"{checked} parameters across conv/bias/projection/head, max "
            f"relative error {worst:.2e}, runtime {elapsed:.1f}s")


def test_criterion_5_causality_and_receptive_field():
    rng = np.random.default_rng(5)
    ok = True
    for _ in range(50):
        ch_in = int(rng.integers(2, 5))
        hidden = tuple(int(rng.integers(2, 7)) for _ in range(int(rng.integers(1, 3))))
        dils = tuple(int(rng.integers(1, 4)) for _ in hidden)
        model = TcnModel(input_channels=ch_in, hidden_channels=hidden,
                         output_channels=int(rng.integers(1, 4)),
                         kernel_size=int(rng.integers(2, 4)), dilations=dils,
                         dropout_rate=0.0, rng=rng, dtype=np.float32)
        x = rng.normal(size=(1, ch_in, 16)).astype(np.float32)
        base = model.forward(x)
        t = int(rng.integers(3, 14))
        xp = x.copy()
        xp[:, :, t + 1:] = rng.normal(size=xp[:, :, t + 1:].shape)
        ok &= np.array_equal(model.forward(xp)[:, :, : t + 1], base[:, :, : t + 1])
        if not ok:
            break

    canon = TcnModel(input_channels=4, hidden_channels=(6, 6), output_channels=4,
                     kernel_size=2, dilations=(1, 2), dropout_rate=0.0,
                     rng=np.random.default_rng(6), dtype=np.float64)
    span_ok = canon.receptive_field() == 7
    x = np.random.default_rng(7).normal(size=(1, 4, 30))
    base = canon.forward(x)
    t = 20
    inside = x.copy()
    inside[0, :, t - 6] += 1.0
    outside = x.copy()
    outside[0, :, t - 7] += 1.0
    probe_ok = (not np.array_equal(canon.forward(inside)[0, :, t], base[0, :, t])
                and np.array_equal(canon.forward(outside)[0, :, t], base[0, :, t]))
    _report(5, ok and span_ok and probe_ok,
            "bitwise causality on 50 random models; (1,1,2,2)-dilation "
            "receptive field = 7 by perturbation probing")


def test_criterion_6_channel_statistics():
    start = time.perf_counter()
    gains = vx.tap_gains(CHANNEL, 100_000, vx.frame_rng(6, 0, 1))
    worst = 0.0
    for l, p in enumerate(CHANNEL.powers):
        g = gains[l]
        for lag in range(11):
            emp = np.mean(g[lag:] * np.conj(g[: g.size - lag]))
            want = p * j0(2 * np.pi * 550.0 * lag * 8e-6)
            worst = max(worst, abs(emp - want))
    n = 200_000
    noise = vx.apply_channel(np.zeros(n), np.zeros(n), 0.0, vx.frame_rng(6, 1, 2))
    var_err = abs(np.mean(np.abs(noise) ** 2) - 1.0)
    elapsed = time.perf_counter() - start
    _report(6, worst <= 0.05 and var_err < 0.02 and elapsed < 60.0,
            f"Jakes autocorrelation max deviation {worst:.3f} (12 taps, lags "
            f"0-10, 1e5 symbols); AWGN variance error {var_err:.3%}; "
            f"runtime {elapsed:.1f}s")


def test_criterion_7_ta_noise_contraction():
    rng = np.random.default_rng(7)
    sigma2 = 0.09
    trials, cols = 100_000, 40
    noise = np.sqrt(sigma2 / 2) * (rng.standard_normal((trials, cols))
                                   + 1j * rng.standard_normal((trials, cols)))
    h = 0.8 - 0.6j
    out = vx.ta_process(h + noise, TaConfig(alpha=2.0))
    emp = float(np.mean(np.abs(out[:, -1] - h) ** 2))
    want = sigma2 / 3.0
    rel = abs(emp - want) / want
    _report(7, rel < 0.10,
            f"steady-state error variance {emp:.5f} vs sigma^2/3 = {want:.5f} "
            f"({rel:.1%} off, 1e5 trials)")


def test_criterion_8_dpa_error_propagation_trend():
    frames = 120
    per_symbol = np.zeros(50)
    for seed in range(frames):
        bits, resp, y = _noisy_frame(seed, snr_db=40.0)
        h_ls = vx.ls_estimate(y[:, 0], y[:, 1], SPEC)
        dpa = vx.dpa_estimate(y[:, 2:], h_ls, SPEC, C)
        err = np.abs(dpa[SPEC.data_rows] - resp[SPEC.data_rows, 2:]) ** 2
        per_symbol += err.mean(axis=0)
    per_symbol /= frames
    rho, pvalue = spearmanr(np.arange(50), per_symbol)
    _report(8, rho > 0 and pvalue < 0.01,
            f"per-symbol DPA MSE vs symbol index: spearman rho {rho:.3f}, "
            f"p {pvalue:.2e} over {frames} frames at 40 dB")


@pytest.fixture(scope="module")
def scaled_experiment(tmp_path_factory):
    """Dataset -> training -> sweeps at the desk-scale criterion sizes."""
    outdir = tmp_path_factory.mktemp("scaled")
    manifest = vx.DatasetManifest(total=SCALED_TRAIN_FRAMES + 200,
                                  train=SCALED_TRAIN_FRAMES, val=150, test=50,
                                  train_snr_db=40.0, seed=101)
    vx.generate_dataset(manifest, SPEC, CHANNEL, C, outdir)
    train_x, train_y = vx.load_split(outdir, "train")
    val_x, val_y = vx.load_split(outdir, "val")
    model = TcnModel(rng=np.random.default_rng(101))
    cfg = TrainConfig(epochs=SCALED_EPOCHS, batch_size=SCALED_BATCH,
                      step_size=SCALED_STEP, gamma=SCALED_GAMMA, seed=101)
    train(model, train_x.transpose(0, 2, 1), train_y.transpose(0, 2, 1),
          val_x.transpose(0, 2, 1), val_y.transpose(0, 2, 1), cfg,
          positions=SPEC.data_rows)

    anchor_plan = SweepPlan(snr_grid_db=(30.0, 40.0),
                            estimators=("ls", "dpa", "sta", "cdp", "trfi",
                                        "dpa-ta", "tcn-dpa", "tcn-dpa-ta"),
                            frames_per_point=SCALED_EVAL_FRAMES, seed=202)
    anchors = run_sweep(anchor_plan, SPEC, C, CHANNEL, tcn_model=model)
    rest = tuple(s for s in SNR_GRID if s not in (30.0, 40.0))
    grid_plan = SweepPlan(snr_grid_db=rest,
                          estimators=("tcn-dpa", "tcn-dpa-ta"),
                          frames_per_point=SCALED_EVAL_FRAMES, seed=202)
    grid = run_sweep(grid_plan, SPEC, C, CHANNEL, tcn_model=model)
    ber = {(r.estimator, r.snr_db): r.ber for r in anchors + grid}
    return ber


def test_criterion_9_desk_scale_ordering(scaled_experiment):
    ber = scaled_experiment
    classical = ("ls", "dpa", "sta", "cdp", "trfi", "dpa-ta")
    clauses = {}
    for snr in (30.0, 40.0):
        clauses[f"tcn-dpa<=dpa@{snr:.0f}dB"] = (
            ber[("tcn-dpa", snr)] <= ORDERING_TOLERANCE * ber[("dpa", snr)])
        best_classical = min(ber[(name, snr)] for name in classical)
        clauses[f"tcn-dpa-ta<=classical@{snr:.0f}dB"] = (
            ber[("tcn-dpa-ta", snr)] <= ORDERING_TOLERANCE * best_classical)
    clauses["tcn-dpa-ta<=tcn-dpa@all"] = all(
        ber[("tcn-dpa-ta", snr)] <= ORDERING_TOLERANCE * ber[("tcn-dpa", snr)]
        for snr in SNR_GRID)
    numbers = ", ".join(
        f"{snr:.0f}dB: tcn-dpa {ber[('tcn-dpa', snr)]:.4f} / dpa "
        f"{ber[('dpa', snr)]:.4f} / tcn-dpa-ta {ber[('tcn-dpa-ta', snr)]:.4f} / "
        f"best classical {min(ber[(n, snr)] for n in classical):.4f}"
        for snr in (30.0, 40.0))
    verdicts = ", ".join(f"{name}={'ok' if ok else 'FAIL'}"
                         for name, ok in clauses.items())
    _report(9, all(clauses.values()), f"{verdicts} [{numbers}]")


def test_criterion_10_reproducibility(tmp_path):
    from v2xest.cli import main

    artifacts = []
    for run_id in ("a", "b"):
        base = tmp_path / run_id
        ds, run_dir = base / "ds", base / "run"
        csv = base / "results.csv"
        assert main(["generate", "--frames", "8", "--split", "5,2,1",
                     "--seed", "11", "--out", str(ds)]) == 0
        assert main(["train", "--data", str(ds), "--out", str(run_dir),
                     "--epochs", "2", "--batch", "4", "--seed", "11"]) == 0
        assert main(["sweep", "--estimators", "dpa,tcn-dpa", "--snr", "20",
                     "--frames", "2", "--seed", "11",
                     "--checkpoint", str(run_dir / "tcn.ckpt"),
                     "--out", str(csv)]) == 0
        blobs = [p.read_bytes() for p in sorted(ds.glob("*.v2xds"))]
        blobs.append((run_dir / "tcn.ckpt").read_bytes())
        blobs.append((run_dir / "history.csv").read_bytes())
        blobs.append(csv.read_bytes())
        artifacts.append(blobs)
    same = all(x == y for x, y in zip(*artifacts))
    _report(10, same, "generate/train/sweep reran byte-identically "
                      f"({len(artifacts[0])} artifacts compared)")
