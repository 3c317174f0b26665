"""Logical noise of qubit cluster-state gates.

Walks through the 5-site Hadamard wire: its measurement pattern, where the
noise sits, and how a few physical error rates turn into one logical Pauli
channel. Ends with the fidelity curves for Hadamard and CNOT.

Run with ``python3 demos/01_dv_channels.py``.
"""

import numpy as np

from mbqv.mbqc_dv import effective_channel_dv, enumerate_locations, fidelity_curve, propagate_error, standard_pattern
from mbqv.pauli import PauliString, average_gate_fidelity

# %% The Hadamard wire
h = standard_pattern("hadamard")
print(h.to_json())
for loc in enumerate_locations(h):
    print(loc)

# %% Single errors
# Z before an X-measured site flips its outcome, which shows up as that
# site's byproduct Pauli on the output.
meas0 = [loc for loc in enumerate_locations(h) if loc.kind == "measurement"][0]
print("Z on site 0 ->", propagate_error(h, meas0, PauliString.from_label("Z")).label)
print("X on site 0 ->", propagate_error(h, meas0, PauliString.from_label("X")).label)

# %% Effective channels
# Measurement noise alone already makes the channel anisotropic.
chan = effective_channel_dv(h, 0.0, 0.05)
print(chan.labels())
print("average gate fidelity:", average_gate_fidelity(chan))

cnot = effective_channel_dv(standard_pattern("cnot"), 0.02, 0.02)
top = sorted(cnot.labels().items(), key=lambda kv: -kv[1])[:6]
print("largest CNOT terms:", top)

# %% Fidelity curves
grid = np.linspace(0, 0.1, 11)
for gate in ("hadamard", "cnot"):
    for case in (1, 2, 3):
        _, f = fidelity_curve(gate, case, grid)
        print(f"{gate:8s} case {case}:", np.round(f, 4))
