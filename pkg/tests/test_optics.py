import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ablsim.cohen import BS1, BS2, BS3, build_scenario
from ablsim.errors import NoAncillaError, UnknownLabelError, ValidationError
from ablsim.hilbert import Measurement, apply, born_probabilities, make_state
from ablsim.optics import (
    ANCILLA,
    PARTICLE_MODES,
    BeamSplitter,
    Circuit,
    DetectorSpec,
    ModeRegistry,
    WhichWayCoupler,
    beam_splitter_unitary,
    d3_click_projector,
    detector_measurement,
    detector_projector,
    run_circuit,
    which_way_unitary,
)

R2 = 1 / math.sqrt(2)
REG = ModeRegistry(PARTICLE_MODES)              # a c d b e
REG_ANC = ModeRegistry(PARTICLE_MODES, ANCILLA)


def ket(reg, **amps):
    """Particle state from keyword amplitudes, e.g. ket(REG, a=R2, e=R2)."""
    return make_state(reg.modes, [amps.get(m, 0) for m in reg.modes], normalize=False)


def full(reg, terms):
    """State on particle ⊗ ancilla from {(mode, anc): amp}."""
    amps = np.zeros(reg.dim, dtype=complex)
    for (mode, anc), amp in terms.items():
        amps[2 * reg.modes.index(mode) + reg.ancilla.index(anc)] = amp
    return make_state(reg.space, amps, normalize=False)


class TestBeamSplitter:
    def test_bs3_matrix_written_out(self):
        # columns/rows ordered a c d b e; c -> (e-b)/√2, d -> (e+b)/√2
        # and the completion e -> (d+c)/√2, b -> (d-c)/√2
        expected = np.array([
            [1, 0, 0, 0, 0],
            [0, 0, 0, -R2, R2],
            [0, 0, 0, R2, R2],
            [0, -R2, R2, 0, 0],
            [0, R2, R2, 0, 0],
        ])
        u = beam_splitter_unitary(REG, BS3)
        np.testing.assert_allclose(u.matrix, expected, atol=1e-15)

    def test_c_and_d_outputs(self):
        u = beam_splitter_unitary(REG, BS3)
        np.testing.assert_allclose(apply(u, ket(REG, c=1)).amps, ket(REG, e=R2, b=-R2).amps,
                                   atol=1e-15)
        np.testing.assert_allclose(apply(u, ket(REG, d=1)).amps, ket(REG, e=R2, b=R2).amps,
                                   atol=1e-15)

    def test_tuning_condition(self):
        out = apply(beam_splitter_unitary(REG, BS3), ket(REG, c=R2, d=R2))
        np.testing.assert_allclose(out.amps, ket(REG, e=1).amps, atol=1e-15)

    def test_swapped_roles_undo(self):
        back = BeamSplitter("e", "b", "d", "c")
        u = beam_splitter_unitary(REG, BS3)
        v = beam_splitter_unitary(REG, back)
        np.testing.assert_allclose((v @ u).matrix, np.eye(5), atol=1e-12)

    def test_unknown_mode(self):
        with pytest.raises(UnknownLabelError):
            beam_splitter_unitary(REG, BeamSplitter("a", "z", "b", "e"))

    def test_ancilla_extension(self):
        u = beam_splitter_unitary(REG_ANC, BS3)
        assert u.dim == 10
        np.testing.assert_allclose(u.matrix, np.kron(beam_splitter_unitary(REG, BS3).matrix,
                                                     np.eye(2)), atol=1e-15)

    @settings(max_examples=80, deadline=None)
    @given(ports=st.permutations(PARTICLE_MODES), anc=st.booleans())
    def test_unitary_for_any_assignment(self, ports, anc):
        reg = REG_ANC if anc else REG
        u = beam_splitter_unitary(reg, BeamSplitter(*ports[:4]))
        assert u.unitarity_error() <= 1e-12


class TestWhichWay:
    def test_flips_watched_mode(self):
        u = which_way_unitary(REG_ANC, "c")
        out = apply(u, full(REG_ANC, {("c", "anc0"): 1}))
        np.testing.assert_allclose(out.amps, full(REG_ANC, {("c", "anc1"): 1}).amps)

    def test_leaves_other_modes(self):
        u = which_way_unitary(REG_ANC, "c")
        s = full(REG_ANC, {("a", "anc0"): 1})
        np.testing.assert_allclose(apply(u, s).amps, s.amps)

    def test_linearity(self):
        u = which_way_unitary(REG_ANC, "c")
        s = full(REG_ANC, {("c", "anc0"): R2, ("d", "anc0"): R2})
        expected = full(REG_ANC, {("c", "anc1"): R2, ("d", "anc0"): R2})
        np.testing.assert_allclose(apply(u, s).amps, expected.amps)

    def test_needs_ancilla(self):
        with pytest.raises(NoAncillaError):
            which_way_unitary(REG, "c")

    @pytest.mark.parametrize("mode", PARTICLE_MODES)
    def test_unitary(self, mode):
        assert which_way_unitary(REG_ANC, mode).unitarity_error() <= 1e-12


class TestRunCircuit:
    def test_empty_circuit(self):
        s = ket(REG, a=R2, e=R2)
        np.testing.assert_array_equal(run_circuit(s, Circuit(REG, ())).amps, s.amps)

    def test_first_two_splitters(self):
        out = run_circuit(ket(REG, b=1), Circuit(REG, (BS1, BS2)))
        np.testing.assert_allclose(out.amps, ket(REG, a=R2, c=0.5, d=0.5).amps, atol=1e-15)

    def test_d3_absent(self):
        out = run_circuit(ket(REG, b=1), Circuit(REG, (BS1, BS2, BS3)))
        np.testing.assert_allclose(out.amps, ket(REG, a=R2, e=R2).amps, atol=1e-15)
        assert abs(out.amplitude("b")) <= 1e-12   # tuning: nothing leaves towards D1 via b

    def test_d3_present_hand_fold(self):
        circuit = Circuit(REG_ANC, (BS1, BS2, WhichWayCoupler("c"), BS3))
        out = run_circuit(REG_ANC.embed(ket(REG, b=1)), circuit)
        k = 1 / (2 * math.sqrt(2))
        expected = full(REG_ANC, {
            ("a", "anc0"): R2,
            ("e", "anc1"): k, ("b", "anc1"): -k,
            ("e", "anc0"): k, ("b", "anc0"): k,
        })
        np.testing.assert_allclose(out.amps, expected.amps, atol=1e-15)
        d1 = detector_projector(REG_ANC, DetectorSpec("D1", (ket(REG, a=1), ket(REG, b=1))))
        d2 = detector_projector(REG_ANC, DetectorSpec("D2", (ket(REG, e=1),)))
        click = d3_click_projector(REG_ANC)
        assert np.linalg.norm(d1.matrix @ out.amps) ** 2 == pytest.approx(0.75, abs=1e-12)
        assert np.linalg.norm(d2.matrix @ out.amps) ** 2 == pytest.approx(0.25, abs=1e-12)
        assert np.linalg.norm(click.matrix @ out.amps) ** 2 == pytest.approx(0.25, abs=1e-12)
        assert np.linalg.norm(click.complement().matrix @ out.amps) ** 2 == \
            pytest.approx(0.75, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 6))
    def test_norm_preserved(self, seed, n):
        rng = np.random.default_rng(seed)
        elements = []
        for _ in range(n):
            if rng.random() < 0.3:
                elements.append(WhichWayCoupler(str(rng.choice(PARTICLE_MODES))))
            else:
                elements.append(BeamSplitter(*rng.permutation(PARTICLE_MODES)[:4]))
        amps = rng.normal(size=10) + 1j * rng.normal(size=10)
        s = make_state(REG_ANC.space, amps)
        assert abs(run_circuit(s, Circuit(REG_ANC, tuple(elements))).norm - 1) <= 1e-10


class TestDetectors:
    def test_d2_rank_one(self):
        p = detector_projector(REG_ANC, DetectorSpec("D2", (ket(REG, e=1),)))
        assert p.rank == 2   # rank 1 on particles, ⊗ I on the ancilla

    def test_d1_subspace(self):
        p = detector_projector(REG, DetectorSpec("D1", (ket(REG, a=1), ket(REG, b=1))))
        assert p.rank == 2

    def test_plus_minus_family(self):
        plus = DetectorSpec("D1+", (ket(REG, a=R2, b=R2),))
        minus = DetectorSpec("D1-", (ket(REG, a=R2, b=-R2),))
        d2 = DetectorSpec("D2", (ket(REG, e=1),))
        meas = detector_measurement(REG_ANC, (plus, minus, d2))
        assert meas.labels == ("D1+", "D1-", "D2", "undetected")
        assert detector_projector(REG, plus).rank == 1

    def test_click_projector_on_anc0_state(self):
        s = full(REG_ANC, {("a", "anc0"): R2, ("e", "anc0"): R2})
        assert np.linalg.norm(d3_click_projector(REG_ANC).matrix @ s.amps) == 0

    def test_click_projector_needs_ancilla(self):
        with pytest.raises(NoAncillaError):
            d3_click_projector(REG)

    @pytest.mark.parametrize("present", [True, False])
    @pytest.mark.parametrize("variant", ["subspace", "plus_minus"])
    def test_detector_families_are_measurements(self, present, variant):
        s = build_scenario(present, variant)
        meas = s.final_measurement
        assert isinstance(meas, Measurement)
        total = sum(p.matrix for _, p in meas.outcomes)
        assert np.max(np.abs(total - np.eye(s.registry.dim))) <= 1e-12
        probs = born_probabilities(run_circuit(s.initial_full(), s.circuit), meas)
        assert probs["undetected"] <= 1e-24


class TestCircuitValidation:
    def test_coupler_needs_ancilla(self):
        with pytest.raises(NoAncillaError):
            Circuit(REG, (WhichWayCoupler("c"),))

    def test_distinct_ports(self):
        with pytest.raises(ValidationError):
            Circuit(REG, (BeamSplitter("a", "a", "b", "e"),))

    def test_registry_dimensions(self):
        assert REG.dim == 5
        assert REG_ANC.dim == 10
