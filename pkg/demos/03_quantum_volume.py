"""Quantum volume of a noisy measurement-based machine.

Builds one random model circuit, shows its heavy set, compiles it onto the
noisy CNOT/H/Rz gate set and compares heavy-output probabilities. Then runs
a small width scan. Full-size runs belong to the CLI (``mbqv qv-sweep``).
"""

import numpy as np

from mbqv.gkp import GkpNoiseParams
from mbqv.qv import DvNoise, compile_noisy, generate_model_circuit, heavy_output_probability, heavy_set, quantum_volume, run_qv
from mbqv.sim import distribution_csv, outcome_distribution

# %% One model circuit
mc = generate_model_circuit(4, np.random.default_rng(1))
ideal = mc.ideal_probabilities()
heavy, p_med = heavy_set(ideal)
mask = ideal > p_med
print("median:", p_med, "heavy:", sorted(heavy))
print("ideal heavy mass:", heavy_output_probability(ideal, mask))

# %% Noisy execution
noisy = outcome_distribution(compile_noisy(mc, DvNoise(0.002, 0.002)), "exact")
print("noisy heavy mass:", heavy_output_probability(noisy, mask))
print(distribution_csv(noisy)[:200])

# %% Pass/fail at a few widths
for d in (3, 4, 5):
    r = run_qv(d, GkpNoiseParams.for_cz_mode(21.0, 0.95, "equal"), n_instances=30, seed=0)
    print(d, round(r.mean_h, 4), round(r.stderr, 4), r.threshold_pass)

print("log2 QV (d_max=5):", quantum_volume(GkpNoiseParams.for_cz_mode(21.0, 0.95, "equal"), 5, n_instances=30))
