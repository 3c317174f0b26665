import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mbqv.gkp import GkpNoiseParams
from mbqv.qv import (
    DvNoise,
    GateNoise,
    QvRunResult,
    SWEEP_HEADER,
    THRESHOLD,
    compile_noisy,
    gate_set_channels,
    generate_model_circuit,
    heavy_output_probability,
    heavy_set,
    instance_heavy_output,
    quantum_volume,
    qv_sweep,
    run_qv,
)
from mbqv.sim import ideal_distribution, outcome_distribution, task_rng


def phase_distance(a, b):
    ph = np.vdot(a.reshape(-1), b.reshape(-1))
    return np.max(np.abs(ph / abs(ph) * a - b))


def test_model_circuit_structure():
    mc = generate_model_circuit(2, np.random.default_rng(0))
    assert len(mc.layers) == 2 and all(len(b) == 1 for _, b in mc.layers)
    mc = generate_model_circuit(5, np.random.default_rng(0))
    for i in range(5):
        pairs = mc.pairs(i)
        assert len(pairs) == 2
        used = {q for p in pairs for q in p}
        assert len(used) == 4
    with pytest.raises(ValueError):
        generate_model_circuit(1, np.random.default_rng(0))


def test_model_circuit_determinism():
    a = generate_model_circuit(4, task_rng(3, 4, 0, 0))
    b = generate_model_circuit(4, task_rng(3, 4, 0, 0))
    assert all(pa == pb and all(np.array_equal(x, y) for x, y in zip(ba, bb)) for (pa, ba), (pb, bb) in zip(a.layers, b.layers))


def test_permutation_marginals_uniform():
    rng = np.random.default_rng(21)
    d = 4
    counts = np.zeros((d, d))
    for _ in range(2500):
        mc = generate_model_circuit(d, rng)
        for perm, _ in mc.layers:
            counts[np.arange(d), perm] += 1
    for slot in range(d):
        assert stats.chisquare(counts[slot]).pvalue > 0.001


def test_heavy_set_examples():
    assert heavy_set([0.25] * 4) == (frozenset(), 0.25)
    assert heavy_set([0.9, 0.1]) == (frozenset({"0"}), 0.5)
    hs, med = heavy_set([0.1, 0.4, 0.3, 0.2])
    assert hs == {"01", "10"} and med == pytest.approx(0.25)
    with pytest.raises(ValueError):
        heavy_set([0.5, 0.6])
    with pytest.raises(ValueError):
        heavy_set([0.2, 0.3, 0.5])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_heavy_set_is_upper_half(n, seed):
    p = np.random.default_rng(seed).exponential(size=2**n)
    p /= p.sum()
    hs, med = heavy_set(p)
    assert len(hs) == 2 ** (n - 1)
    mask = np.array([format(i, f"0{n}b") in hs for i in range(2**n)])
    assert heavy_output_probability(p, mask) >= 0.5
    assert heavy_output_probability(np.full(2**n, 2.0**-n), mask) == 0.5


def test_ideal_heavy_mass_near_085():
    vals = []
    for i in range(100):
        mc = generate_model_circuit(4, task_rng(1, 4, i, 0))
        p = mc.ideal_probabilities()
        hs, _ = heavy_set(p)
        vals.append(sum(p[int(s, 2)] for s in hs))
    assert 0.8 <= np.mean(vals) <= 0.9


@pytest.mark.parametrize("d", [2, 3, 4])
def test_noiseless_compilation_is_exact(d):
    mc = generate_model_circuit(d, np.random.default_rng(d))
    c = compile_noisy(mc, DvNoise(0.0, 0.0))
    assert c.census().get("channel", 0) == 0
    assert phase_distance(c.to_unitary(), mc.to_circuit().to_unitary()) < 1e-8


def test_channel_census():
    mc = generate_model_circuit(4, np.random.default_rng(5))
    c = compile_noisy(mc, DvNoise(0.01, 0.01))
    census = c.census()
    names = [op.name for op in c.ops]
    n_blocks = sum(len(b) for _, b in mc.layers)
    assert census["cnot"] == 3 * n_blocks
    assert census["channel"] == census["cnot"] + census["h"] + census["rz"]
    # every primitive is immediately followed by its own channel
    for i, op in enumerate(c.ops):
        if op.name in ("cnot", "h", "rz") and hasattr(op, "matrix"):
            assert names[i + 1] == op.name and c.ops[i + 1].qubits == op.qubits


def test_dv_noise_moves_distribution():
    mc = generate_model_circuit(4, np.random.default_rng(6))
    noisy = outcome_distribution(compile_noisy(mc, DvNoise(0.01, 0.01)), "exact")
    assert 0.5 * np.abs(noisy - mc.ideal_probabilities()).sum() > 0


def test_gate_channels_cover_noise_models():
    for noise in (None, DvNoise(0.01, 0.02), GateNoise(0.1, 0.2), GkpNoiseParams(20.0, eta=0.95)):
        chans = gate_set_channels(noise)
        assert chans["cnot"].n == 2 and chans["h"].n == 1 and chans["rz"].n == 1
    with pytest.raises(ValueError):
        DvNoise(1.2, 0)
    with pytest.raises(ValueError):
        GateNoise(0.1, -0.1)


def test_ideal_run_level():
    r = run_qv(4, None, n_instances=400, seed=0)
    assert 0.80 <= r.mean_h <= 0.90
    assert r.threshold_pass and r.confidence_pass
    assert r.metadata["seed"] == 0


def test_uniform_outputs_give_half():
    for i in range(20):
        assert instance_heavy_output(4, None, i, 3, mode="uniform") == 0.5


def test_strong_dv_noise_fails():
    r = run_qv(4, DvNoise(0.2, 0.2), n_instances=20, seed=1)
    assert r.mean_h < THRESHOLD and not r.threshold_pass


def test_run_result_consistency_and_json():
    r = run_qv(3, DvNoise(0.002, 0.002), n_instances=12, seed=4)
    assert r.threshold_pass == (r.mean_h >= THRESHOLD)
    assert r.confidence_pass == (r.mean_h - 2 * r.stderr >= THRESHOLD)
    assert QvRunResult.from_json(r.to_json()) == r
    assert run_qv(3, None, n_instances=1).stderr == 0.0
    with pytest.raises(ValueError):
        run_qv(1, None)
    with pytest.raises(ValueError):
        run_qv(13, None, mode="exact")


def test_exact_runs_are_deterministic():
    a = run_qv(3, DvNoise(0.005, 0.01), n_instances=10, seed=9)
    b = run_qv(3, DvNoise(0.005, 0.01), n_instances=10, seed=9)
    assert a == b


def test_parallel_map_matches_serial():
    from concurrent.futures import ProcessPoolExecutor

    kw = dict(n_instances=8, shots=64, seed=2, mode="trajectory")
    serial = run_qv(3, DvNoise(0.01, 0.01), **kw)
    with ProcessPoolExecutor(2) as pool:
        par = run_qv(3, DvNoise(0.01, 0.01), map_fn=pool.map, **kw)
    assert serial == par


def test_quantum_volume_limits():
    assert quantum_volume(None, 6) == 6
    assert quantum_volume(GateNoise(0.75, 15 / 16), 4, n_instances=10) == 0
    with pytest.raises(ValueError):
        quantum_volume(None, 1)
    with pytest.raises(ValueError):
        quantum_volume(None, 3, policy="vote")


def test_quantum_volume_monotone_in_noise():
    ladder = [GateNoise(0.002, 0.01), GateNoise(0.005, 0.03), GateNoise(0.02, 0.1)]
    qs = [quantum_volume(n, 5, n_instances=40, seed=3) for n in ladder]
    assert qs[0] >= qs[1] >= qs[2]
    assert qs[0] > qs[2]


def test_sweep_rows_and_determinism():
    kw = dict(cz_mode="zero", d_max=3, n_instances=6, seed=5)
    rows = qv_sweep([0.9, 1.0], [4.0, 20.0], **kw)
    assert len(rows) == 4
    assert list(rows[0]) == SWEEP_HEADER.split(",")
    assert rows == qv_sweep([0.9, 1.0], [4.0, 20.0], **kw)
    assert [r["log2_qv"] for r in rows] == [0, 3, 0, 3]
    for eta in (0.9, 1.0):
        q = [r["log2_qv"] for r in rows if r["eta"] == eta]
        assert q == sorted(q)
    with pytest.raises(ValueError):
        qv_sweep([], [10.0])
