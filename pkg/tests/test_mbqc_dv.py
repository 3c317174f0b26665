import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbqv.mbqc_dv import (
    ErrorLocation,
    MeasurementPattern,
    effective_channel_dv,
    enumerate_locations,
    fidelity_curve,
    location_channels,
    pattern_census,
    propagate_error,
    standard_pattern,
)
from mbqv.pauli import PauliString, all_paulis, average_gate_fidelity

from oracles import PatternStatevector, bell_choi, labels, pauli_matrix, pauli_product, wire_channel_dm

TWO_QUBIT = ("cnot", "cz")


@pytest.fixture(scope="module")
def statevectors():
    return {g: PatternStatevector(standard_pattern(g)) for g in TWO_QUBIT}


def _local_label(pattern, loc_index):
    return 2 if loc_index < len(pattern.edges) else 1


def test_wire_shapes():
    h = standard_pattern("hadamard")
    assert h.n_sites == 5 and len(h.measured_sites) == 4 and h.output_sites == (4,)
    assert [b for _, b in h.bases] == ["X", "Y", "Y", "Y"]
    c = standard_pattern("cnot")
    assert c.n_sites == 15 and c.n_logical == 2
    assert pattern_census(c)["edges"] == len(c.edges)


def test_unknown_gate():
    with pytest.raises(ValueError):
        standard_pattern("toffoli")
    with pytest.raises(ValueError):
        standard_pattern("rotation")


def test_pattern_json_export():
    import json

    data = json.loads(standard_pattern("cnot").to_json())
    for key in ("sites", "edges", "bases", "byproduct_frame", "target_gate"):
        assert key in data
    assert data["target_gate"] == "cnot"


@pytest.mark.parametrize("gate", ["hadamard", "identity"])
def test_wires_are_exact_when_noiseless(gate):
    chan = wire_channel_dm(standard_pattern(gate), 0.0, 0.0)
    assert chan["I"] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("gate", TWO_QUBIT)
def test_two_qubit_patterns_implement_their_gate(gate, statevectors):
    assert statevectors[gate].ideal_is_target()


@pytest.mark.parametrize("gate", TWO_QUBIT)
def test_offset_matches_all_plus_branch(gate, statevectors):
    pat = standard_pattern(gate)
    sv = statevectors[gate]
    want = np.kron(np.eye(4), pauli_matrix(pat.byproduct_offset.label) @ sv.u) @ bell_choi(2)
    assert abs(abs(np.vdot(want, sv.reference)) - 1) < 1e-9


def test_rotation_zero_is_identity_wire():
    pat = standard_pattern("rotation", 0.0)
    assert pat.is_clifford
    assert all(b == "X" for _, b in pat.bases)
    assert effective_channel_dv(pat, 0, 0).labels() == {"I": 1.0}


def test_rotation_needs_skeleton():
    pat = standard_pattern("rotation", 0.3)
    assert not pat.is_clifford
    with pytest.raises(ValueError):
        effective_channel_dv(pat, 0.01, 0.01)
    assert effective_channel_dv(pat.clifford_skeleton(), 0.0, 0.0).labels() == {"I": 1.0}


def test_location_counts():
    h = standard_pattern("hadamard")
    assert len(enumerate_locations(h)) == 8
    c = standard_pattern("cnot")
    assert len(enumerate_locations(c)) == len(c.edges) + len(c.measured_sites)
    single = MeasurementPattern(
        2, (), (1,), (1,), ((0, "X"),), "identity", PauliString.from_label("I"), ((0, PauliString.from_label("I")),)
    )
    locs = enumerate_locations(single)
    assert [loc.kind for loc in locs] == ["measurement"]


def test_location_validation():
    with pytest.raises(ValueError):
        ErrorLocation("cz_gate", (0,), 0)
    h = standard_pattern("hadamard")
    with pytest.raises(ValueError):
        propagate_error(h, ErrorLocation("measurement", (4,), 4), PauliString.from_label("X"))
    with pytest.raises(ValueError):
        propagate_error(h, ErrorLocation("cz_gate", (0, 2), 0), PauliString.from_label("XX"))


def test_single_site_rules():
    h = standard_pattern("hadamard")
    meas = {loc.sites[0]: loc for loc in enumerate_locations(h) if loc.kind == "measurement"}
    # X before an X measurement is invisible, Z flips it
    assert propagate_error(h, meas[0], PauliString.from_label("X")).is_identity()
    assert propagate_error(h, meas[0], PauliString.from_label("Z")) == h.frame[0]
    # after the last CZ touching site 0, X is invisible and Z is a flip
    first = enumerate_locations(h)[0]
    assert propagate_error(h, first, PauliString.from_label("XI")).is_identity()
    assert propagate_error(h, first, PauliString.from_label("ZI")) == h.frame[0]


def test_input_error_before_wire_maps_through_gate():
    # an error on the input qubit at preparation time is equivalent to a
    # logical error before the gate, i.e. U P U^dag after it
    pat = standard_pattern("hadamard")
    from mbqv.mbqc_dv import _absorb

    # CZ(0, 1) carries an input X to X0 Z1
    for label, image in (("XZIII", "Z"), ("ZIIII", "X"), ("YZIII", "Y")):
        assert _absorb(pat, PauliString.from_label(label)).label == image


@pytest.mark.parametrize("p", [0.01, 0.05, 0.2])
@pytest.mark.parametrize("case", [(1, 0), (0, 1), (1, 1)])
def test_hadamard_matches_density_matrix(p, case):
    pat = standard_pattern("hadamard")
    p_cz, p_m = p * case[0], p * case[1]
    oracle = wire_channel_dm(pat, p_cz, p_m)
    chan = effective_channel_dv(pat, p_cz, p_m)
    for lab, v in oracle.items():
        assert abs(chan[lab] - v) < 1e-10


def test_identity_wire_matches_density_matrix():
    pat = standard_pattern("identity")
    oracle = wire_channel_dm(pat, 0.03, 0.07)
    chan = effective_channel_dv(pat, 0.03, 0.07)
    assert max(abs(chan[k] - v) for k, v in oracle.items()) < 1e-10


def test_hadamard_channel_is_anisotropic():
    c = effective_channel_dv(standard_pattern("hadamard"), 0.0, 0.05)
    assert not (c["X"] == pytest.approx(c["Y"]) and c["Y"] == pytest.approx(c["Z"]))


@pytest.mark.parametrize("gate", TWO_QUBIT)
def test_every_single_error_matches_statevector(gate, statevectors):
    pat = standard_pattern(gate)
    sv = statevectors[gate]
    for k, loc in enumerate(enumerate_locations(pat)):
        for lab in labels(_local_label(pat, k))[1:]:
            got = propagate_error(pat, loc, PauliString.from_label(lab))
            assert got.label == sv.logical({k: lab}), (loc, lab)


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_multi_error_configurations_match_statevector(statevectors, data):
    gate = data.draw(st.sampled_from(TWO_QUBIT))
    pat = standard_pattern(gate)
    locs = enumerate_locations(pat)
    chosen = data.draw(st.lists(st.integers(0, len(locs) - 1), min_size=2, max_size=5, unique=True))
    errors = {k: data.draw(st.sampled_from(labels(_local_label(pat, k))[1:])) for k in chosen}
    total = "II"
    for k, lab in errors.items():
        total = pauli_product(total, propagate_error(pat, locs[k], PauliString.from_label(lab)).label)
    assert total == statevectors[gate].logical(errors)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["hadamard", "cnot", "cz"]), st.integers(1, 6), st.data())
def test_flip_parity(gate, k, data):
    pat = standard_pattern(gate)
    meas = [loc for loc in enumerate_locations(pat) if loc.kind == "measurement"]
    loc = data.draw(st.sampled_from(meas))
    basis = pat.basis[loc.sites[0]]
    flip = PauliString.from_label("X" if basis == "Z" else "Z")
    total = PauliString(pat.n_logical)
    for _ in range(k):
        total = total * propagate_error(pat, loc, flip)
    assert total == (pat.frame[loc.sites[0]] if k % 2 else PauliString(pat.n_logical))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["hadamard", "cnot", "cz", "identity"]), st.floats(0, 1), st.floats(0, 1))
def test_channels_are_valid(gate, p_cz, p_m):
    chan = effective_channel_dv(standard_pattern(gate), p_cz, p_m)
    assert all(v >= 0 for v in chan.probs.values())
    assert math.fsum(chan.probs.values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("gate", ["hadamard", "cnot", "cz", "identity"])
def test_noiseless_is_exactly_identity(gate):
    chan = effective_channel_dv(standard_pattern(gate), 0.0, 0.0)
    assert dict(chan.probs) == {PauliString(chan.n): 1.0}
    assert average_gate_fidelity(chan) == 1.0


def test_invalid_rates():
    with pytest.raises(ValueError):
        effective_channel_dv(standard_pattern("hadamard"), -0.1, 0)
    with pytest.raises(ValueError):
        effective_channel_dv(standard_pattern("hadamard"), 0, 1.1)


@pytest.mark.parametrize("gate", ["hadamard", "cnot"])
def test_first_order_additivity(gate):
    pat = standard_pattern(gate)
    n_cz, n_m = len(pat.edges), len(pat.measured_sites)

    def mass(p):
        return sum(c.error_mass for c in location_channels(pat, p, p)), effective_channel_dv(pat, p, p).error_mass

    # Richardson: (4 m(h/2) - m(h)) / h cancels the quadratic term
    h = 1e-5
    slope = (4 * mass(h / 2)[1] - mass(h)[1]) / h
    visible = mass(1.0)[0]  # per-location non-identity logical mass at p = 1
    assert slope == pytest.approx(visible, rel=1e-5)
    assert visible <= n_cz + n_m


@pytest.mark.parametrize("gate", ["hadamard", "cnot"])
@pytest.mark.parametrize("case", [1, 2, 3])
def test_fidelity_curve_shape(gate, case):
    ps, f = fidelity_curve(gate, case, np.linspace(0, 0.75, 76))
    assert f[0] == 1.0
    assert np.all(np.diff(f) <= 1e-15)


def test_fidelity_curve_linear_leading_order():
    ps, f = fidelity_curve("hadamard", 3, [0, 1e-4, 2e-4])
    slope1, slope2 = (1 - f[1]) / ps[1], (1 - f[2]) / ps[2]
    assert slope1 > 0
    assert slope2 == pytest.approx(slope1, rel=1e-2)


def test_cnot_below_hadamard():
    grid = np.linspace(0.005, 0.3, 30)
    _, fh = fidelity_curve("hadamard", 3, grid)
    _, fc = fidelity_curve("cnot", 3, grid)
    assert np.all(fc < fh)


def test_case_names():
    a = fidelity_curve("hadamard", "meas", [0.1])[1]
    b = fidelity_curve("hadamard", 1, [0.1])[1]
    assert a[0] == b[0]
