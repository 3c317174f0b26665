"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, collected in the terminal summary.
"""

import hashlib
import math
import time

import numpy as np
import pytest

from mbqv.cli import main
from mbqv.gkp import GkpNoiseParams, flip_probability, infidelity_vs_squeezing
from mbqv.mbqc_dv import effective_channel_dv, standard_pattern
from mbqv.pauli import PauliString, average_gate_fidelity
from mbqv.qv import DvNoise, generate_model_circuit, instance_heavy_output, run_qv
from mbqv.sim import haar_su4, kak_decompose, task_rng

from oracles import rounding_flip_mc, trace_moment, trajectory_channel, wire_channel_dm

QV_INSTANCES = 100


def test_c01_ideal_heavy_output_level(criterion):
    t = time.perf_counter()
    # zero-rate DV noise compiles to the exact gate set and runs the density-matrix path
    r = run_qv(4, DvNoise(0.0, 0.0), n_instances=400, seed=0, mode="exact")
    wall = time.perf_counter() - t
    ok = 0.80 <= r.mean_h <= 0.90 and wall < 60
    criterion(1, ok, f"mean_h={r.mean_h:.4f}+-{r.stderr:.4f} (want [0.80, 0.90]), {wall:.1f}s")
    assert ok


def test_c02_random_guess_floor(criterion):
    values = []
    for i in range(200):
        ideal = generate_model_circuit(4, task_rng(0, 4, i, 0)).ideal_probabilities()
        assert len(np.unique(ideal)) == ideal.size
        values.append(instance_heavy_output(4, None, i, 0, mode="uniform"))
    ok = all(v == 0.5 for v in values)
    criterion(2, ok, f"uniform outputs give h_U == 0.5 on {len(values)}/{len(values)} instances")
    assert ok


def test_c03_dv_noiseless_identity(criterion):
    fids = {}
    for gate in ("hadamard", "cnot", "cz", "identity"):
        chan = effective_channel_dv(standard_pattern(gate), 0.0, 0.0)
        assert dict(chan.probs) == {PauliString(chan.n): 1.0}
        fids[gate] = average_gate_fidelity(chan)
    ok = all(f == 1.0 for f in fids.values())
    criterion(3, ok, f"channels are exactly {{I: 1}}, fidelities {fids}")
    assert ok


def test_c04_dv_hadamard_oracle(criterion):
    pat = standard_pattern("hadamard")
    worst = 0.0
    for p in (0.01, 0.05, 0.2):
        oracle = wire_channel_dm(pat, p, p)
        chan = effective_channel_dv(pat, p, p)
        worst = max(worst, max(abs(chan[k] - v) for k, v in oracle.items()))
    ok = worst < 1e-10
    criterion(4, ok, f"max |term - density matrix| = {worst:.2e} (want < 1e-10)")
    assert ok


def test_c05_dv_cnot_oracle(criterion):
    n = 10**6
    pat = standard_pattern("cnot")
    freqs, _ = trajectory_channel(pat, 0.02, 0.02, n, np.random.default_rng(2024))
    chan = effective_channel_dv(pat, 0.02, 0.02)
    worst = 0.0
    for lab, f in freqs.items():
        p = chan[lab]
        se = math.sqrt(max(p * (1 - p), 1e-300) / n)
        worst = max(worst, abs(f - p) / se if se > 0 else (0.0 if f == 0 else math.inf))
    ok = worst < 3
    criterion(5, ok, f"max deviation {worst:.2f} standard errors over 16 terms, {n} trajectories (want < 3)")
    assert ok


def test_c06_gkp_binning(criterion):
    details, ok = [], True
    for i, sigma in enumerate((0.1, 0.2, 0.4)):
        mc, se = rounding_flip_mc(sigma, 10**7, np.random.default_rng(100 + i))
        p = flip_probability(sigma**2)
        z = abs(p - mc) / se
        ok &= z < 3
        details.append(f"sigma={sigma}: {p:.6g} vs {mc:.6g} ({z:.2f} se)")
    criterion(6, ok, "; ".join(details))
    assert ok


def test_c07_saturation(criterion):
    lossy = infidelity_vs_squeezing("hadamard", 0.85, [25.0, 35.0], "equal")
    lossy_zero = infidelity_vs_squeezing("hadamard", 0.85, [25.0, 35.0], "zero")
    ideal = infidelity_vs_squeezing("hadamard", 1.0, [25.0, 35.0], "equal")
    rel_equal = abs(lossy[0] - lossy[1]) / lossy[1]
    rel_zero = abs(lossy_zero[0] - lossy_zero[1]) / lossy_zero[1]
    drop = ideal[0] / ideal[1]
    ok = max(rel_equal, rel_zero) < 0.10 and drop > 10
    criterion(
        7,
        ok,
        f"eta=0.85: relative change 25->35 dB = {rel_equal:.3f} (s_cz=s_gkp), {rel_zero:.3f} (no CZ noise), "
        f"want < 0.10; eta=1: drop factor {drop:.3g} (want > 10)",
    )
    assert ok


def test_c08_gray_region(criterion):
    params = GkpNoiseParams.for_cz_mode(60.0, 0.88, "zero")
    r = run_qv(10, params, n_instances=QV_INSTANCES, seed=0)
    # with d_max = 10, log2(QV) = 10 exactly when width 10 passes
    ok = not r.threshold_pass
    criterion(8, ok, f"eta=0.88, s=60 dB, d=10: mean_h={r.mean_h:.4f}+-{r.stderr:.4f}, log2(QV) < 10")
    assert ok


@pytest.fixture(scope="module")
def threshold_scan():
    grids = {"equal": [19.0, 20.0, 21.0, 22.0, 23.0, 24.0], "zero": [15.0, 16.0, 17.0, 18.0, 19.0, 20.0]}
    out = {}
    for mode, grid in grids.items():
        out[mode] = [(s, run_qv(10, GkpNoiseParams.for_cz_mode(s, 0.95, mode), n_instances=QV_INSTANCES, seed=0)) for s in grid]
    return out


def test_c09_squeezing_thresholds(criterion, threshold_scan):
    targets = {"equal": 22.0, "zero": 18.0}
    found, detail, ok = {}, [], True
    for mode, rows in threshold_scan.items():
        passes = [r.threshold_pass for _, r in rows]
        monotone = passes == sorted(passes)
        first = next((s for s, r in rows if r.threshold_pass), None)
        found[mode] = first
        ok &= monotone and first is not None and abs(first - targets[mode]) <= 2
        hs = ", ".join(f"{s:g}:{r.mean_h:.3f}" for s, r in rows)
        detail.append(f"{mode}: threshold {first} dB (want {targets[mode]:g}+-2, monotone={monotone}) [{hs}]")
    ok &= found["equal"] is not None and found["zero"] is not None and found["equal"] > found["zero"]
    criterion(9, ok, "; ".join(detail))
    assert ok


def test_c10_trajectory_matches_exact(criterion):
    noise = DvNoise(0.02, 0.02)
    exact = run_qv(4, noise, n_instances=QV_INSTANCES, seed=0, mode="exact")
    traj = run_qv(4, noise, n_instances=QV_INSTANCES, shots=10**4, seed=0, mode="trajectory")
    combined = math.hypot(exact.stderr, traj.stderr)
    diff = abs(exact.mean_h - traj.mean_h)
    ok = diff < 3 * combined
    criterion(10, ok, f"|{traj.mean_h:.5f} - {exact.mean_h:.5f}| = {diff:.2e} (want < {3 * combined:.2e})")
    assert ok


def test_c11_decomposition(criterion):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        u = haar_su4(rng)
        worst = max(worst, float(np.abs(kak_decompose(u).reconstruct() - u).max()))
    mean, se = trace_moment(np.array([haar_su4(rng) for _ in range(10**5)]))
    ok = worst < 1e-9 and abs(mean - 1) < 3 * se
    criterion(11, ok, f"KAK max error {worst:.2e} (want < 1e-9); E|tr U|^2 = {mean:.4f}+-{se:.4f}")
    assert ok


def test_c12_determinism(criterion, tmp_path):
    commands = [
        "qv-run --d 4 --noise dv --p-cz 0.01 --p-m 0.01 --instances 16 --seed 7",
        "qv-run --d 4 --noise gkp --s-gkp 16 --eta 0.95 --instances 8 --sim-mode trajectory --shots 64 --seed 7",
        "qv-sweep --eta-grid 0.95,1 --s-grid 10,18 --cz-mode equal --d-max 3 --instances 6 --seed 7",
        "gkp-channel --gate cnot --s-grid 8,12,16 --eta-grid 0.9,1 --seed 7",
        "fidelity-curve --seed 7",
    ]
    bad = []
    for j, cmd in enumerate(commands):
        digests = set()
        for i, workers in enumerate((1, 1, 8)):
            path = tmp_path / f"{j}_{i}.out"
            assert main([*cmd.split(), "--workers", str(workers), "--output", str(path)]) == 0
            digests.add(hashlib.sha256(path.read_bytes()).hexdigest())
        if len(digests) != 1:
            bad.append(cmd.split()[0])
    ok = not bad
    criterion(12, ok, f"{len(commands)} commands byte-identical across reruns and workers=8" + (f"; differ: {bad}" if bad else ""))
    assert ok
