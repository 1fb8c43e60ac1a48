import cmath
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from qiup import qcore
from qiup.qcore import (Mode, ObjectResponse, build_blocked_state, build_joint_state,
                        closed_form_probabilities, coincidence_table,
                        detection_probabilities, signal_coherence)

T_GRID = np.round(np.arange(0.0, 1.01, 0.1), 10)
ANGLE_GRID = np.arange(8) * math.pi / 4.0


def brute_force_probabilities(t, gamma, phi):
    """Independent oracle: explicit matrix propagation and partial trace.

    Builds the amplitude vector over (signal in {c,e}) x (idler in {f,w}),
    applies the 2x2 recombination matrix [[1, 1], [1, -1]]/sqrt(2) on the
    signal index and sums squared magnitudes over the idler index.
    """
    psi = np.zeros((2, 2), dtype=complex)  # [signal, idler]
    psi[0, 0] = t * cmath.exp(1j * gamma) / math.sqrt(2)      # c, f
    psi[1, 0] = cmath.exp(-1j * phi) / math.sqrt(2)           # e, f
    psi[0, 1] = math.sqrt(1 - t * t) / math.sqrt(2)           # c, w
    bs = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    out = bs @ psi
    probs = np.sum(np.abs(out) ** 2, axis=1)
    return probs[0], probs[1]


class TestBuildJointState:
    def test_transparent_object_splits_evenly(self):
        state = build_joint_state(ObjectResponse(1.0, 0.0), 0.0)
        assert abs(state.amplitude(Mode.C_S, Mode.F_I)) ** 2 == pytest.approx(0.5)
        assert abs(state.amplitude(Mode.E_S, Mode.F_I)) ** 2 == pytest.approx(0.5)
        assert state.amplitude(Mode.C_S, Mode.W_I) == 0

    def test_opaque_object_routes_to_sink(self):
        state = build_joint_state(ObjectResponse(0.0, 2.7), 0.0)
        assert state.amplitude(Mode.C_S, Mode.F_I) == 0
        assert abs(state.amplitude(Mode.E_S, Mode.F_I)) ** 2 == pytest.approx(0.5)
        assert abs(state.amplitude(Mode.C_S, Mode.W_I)) ** 2 == pytest.approx(0.5)

    def test_partial_object_amplitudes(self):
        # direct evaluation of the state coefficients at T=0.6
        state = build_joint_state(ObjectResponse(0.6, math.pi / 2), 0.0)
        assert abs(state.amplitude(Mode.C_S, Mode.F_I)) ** 2 == pytest.approx(0.18)
        assert abs(state.amplitude(Mode.E_S, Mode.F_I)) ** 2 == pytest.approx(0.5)
        assert abs(state.amplitude(Mode.C_S, Mode.W_I)) ** 2 == pytest.approx(0.32)
        assert state.norm_sq() == pytest.approx(1.0, abs=1e-12)

    def test_normalized_on_grid(self):
        for t in T_GRID:
            for gamma in ANGLE_GRID:
                for phi in ANGLE_GRID:
                    state = build_joint_state(ObjectResponse(t, gamma), phi)
                    assert abs(state.norm_sq() - 1.0) < 1e-12

    def test_rejects_bad_transmittance(self):
        with pytest.raises(ValueError):
            ObjectResponse(1.2, 0.0)
        with pytest.raises(ValueError):
            ObjectResponse(-0.1, 0.0)
        with pytest.raises(ValueError):
            ObjectResponse(float("nan"), 0.0)

    def test_phase_is_canonicalized(self):
        assert ObjectResponse(1.0, -math.pi).phase == pytest.approx(math.pi)
        assert ObjectResponse(1.0, 2 * math.pi).phase == 0.0
        assert 0.0 <= ObjectResponse(1.0, 123.456).phase < 2 * math.pi


class TestDetectionProbabilities:
    def test_no_object_gives_perfect_contrast(self):
        pair = detection_probabilities(build_joint_state(ObjectResponse(1.0, 0.0), 0.0))
        assert pair.p_g == pytest.approx(1.0, abs=1e-12)
        assert pair.p_h == pytest.approx(0.0, abs=1e-12)

    def test_opaque_object_kills_interference(self):
        for gamma in (0.0, 1.0, 4.0):
            pair = detection_probabilities(build_joint_state(ObjectResponse(0.0, gamma), 0.0))
            assert pair.p_g == pytest.approx(0.5, abs=1e-12)
            assert pair.p_h == pytest.approx(0.5, abs=1e-12)

    def test_partial_transmittance_against_brute_force(self):
        pair = detection_probabilities(
            build_joint_state(ObjectResponse(0.5, math.pi / 3), 0.0))
        ref = brute_force_probabilities(0.5, math.pi / 3, 0.0)
        assert pair.p_g == pytest.approx(ref[0], abs=1e-12)
        assert pair.p_h == pytest.approx(ref[1], abs=1e-12)
        assert pair.p_g == pytest.approx(0.625, abs=1e-12)
        assert pair.p_h == pytest.approx(0.375, abs=1e-12)

    def test_rejects_unnormalized_state(self):
        state = qcore.JointState(amplitudes={(Mode.C_S, Mode.F_I): 0.9 + 0j})
        with pytest.raises(ValueError):
            detection_probabilities(state)

    def test_oracle_equivalence_on_grid(self):
        # closed form and trace must agree to 1e-12 across the whole grid
        for t in T_GRID:
            for gamma in ANGLE_GRID:
                for phi in ANGLE_GRID:
                    traced = detection_probabilities(
                        build_joint_state(ObjectResponse(t, gamma), phi))
                    closed = closed_form_probabilities(t, gamma, 0.0, phi, 1.0)
                    assert abs(traced.p_g - closed.p_g) < 1e-12
                    assert abs(traced.p_h - closed.p_h) < 1e-12
                    assert abs(traced.p_g + traced.p_h - 1.0) < 1e-12


class TestClosedForm:
    def test_ideal_instrument(self):
        pair = closed_form_probabilities(1.0, 0.0, 0.0, 0.0, 1.0)
        assert pair.as_tuple() == pytest.approx((1.0, 0.0), abs=1e-15)

    def test_setup_visibility_factor(self):
        pair = closed_form_probabilities(1.0, 0.0, 0.0, 0.0, 0.77)
        assert pair.p_g == pytest.approx(0.885, abs=1e-12)
        assert pair.p_h == pytest.approx(0.115, abs=1e-12)

    def test_full_turn_phase_is_invisible(self):
        pair = closed_form_probabilities(1.0, 2 * math.pi, 0.0, 0.0, 1.0)
        assert pair.p_g == pytest.approx(1.0, abs=1e-12)
        assert pair.p_h == pytest.approx(0.0, abs=1e-12)

    def test_signal_phase_enters_with_opposite_sign(self):
        a = closed_form_probabilities(0.8, 0.9, 0.4, 0.1, 1.0)
        b = closed_form_probabilities(0.8, 0.9 - 0.4, 0.0, 0.1, 1.0)
        assert a.p_g == pytest.approx(b.p_g, abs=1e-12)

    def test_broadcasts_over_arrays(self):
        t = np.array([0.0, 0.5, 1.0])
        pair = closed_form_probabilities(t, 0.0, 0.0, 0.0, 1.0)
        assert np.allclose(pair.p_g, [0.5, 0.75, 1.0])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            closed_form_probabilities(1.5, 0.0)
        with pytest.raises(ValueError):
            closed_form_probabilities(0.5, 0.0, setup_visibility=1.2)


class TestBlockedState:
    def test_fifty_fifty_for_any_object(self):
        for t in T_GRID:
            for gamma in ANGLE_GRID:
                for phi in ANGLE_GRID:
                    pair = detection_probabilities(
                        build_blocked_state(ObjectResponse(t, gamma), phi))
                    assert pair.p_g == pytest.approx(0.5, abs=1e-12)
                    assert pair.p_h == pytest.approx(0.5, abs=1e-12)

    def test_matches_opaque_object_state(self):
        blocked = build_blocked_state(ObjectResponse(1.0, 0.0), 0.0)
        opaque = build_joint_state(ObjectResponse(0.0, 0.0), 0.0)
        for pair_key in blocked.amplitudes:
            assert blocked.amplitude(*pair_key) == pytest.approx(opaque.amplitude(*pair_key))

    def test_blocked_flag_and_zero_coherence(self):
        state = build_blocked_state(ObjectResponse(0.5, 1.0), 0.7)
        assert state.blocked
        assert abs(signal_coherence(state)) == 0.0


class TestCoincidences:
    def test_opaque_object_clicks_on_h(self):
        # amplitude oracle: the e branch carries the shared idler mode and
        # splits 1/4 / 1/4 over the two outputs
        table = coincidence_table(build_joint_state(ObjectResponse(0.0, 0.0), 0.0), 1.0)
        assert table.p_h_click == pytest.approx(0.25, abs=1e-12)
        assert table.p_g_click == pytest.approx(0.25, abs=1e-12)

    def test_transparent_object_never_coincides_at_h(self):
        table = coincidence_table(build_joint_state(ObjectResponse(1.0, 0.0), 0.0), 1.0)
        assert table.p_h_click == pytest.approx(0.0, abs=1e-12)

    def test_dead_detector(self):
        table = coincidence_table(build_joint_state(ObjectResponse(0.3, 0.4), 0.2), 0.0)
        assert table.p_g_click == 0.0
        assert table.p_h_click == 0.0

    def test_entries_sum_to_one_and_marginalize(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            t, gamma, phi = rng.uniform(0, 1), rng.uniform(0, 7), rng.uniform(0, 7)
            eta = rng.uniform(0, 1)
            state = build_joint_state(ObjectResponse(t, gamma), phi)
            table = coincidence_table(state, eta)
            assert table.total() == pytest.approx(1.0, abs=1e-12)
            marg = table.signal_marginals()
            pair = detection_probabilities(state)
            assert marg.p_g == pytest.approx(pair.p_g, abs=1e-12)
            assert marg.p_h == pytest.approx(pair.p_h, abs=1e-12)

    def test_click_probability_linear_in_eta(self):
        state = build_joint_state(ObjectResponse(0.0, 0.0), 0.0)
        half = coincidence_table(state, 0.5)
        assert half.p_h_click == pytest.approx(0.125, abs=1e-12)

    def test_rejects_bad_eta(self):
        state = build_joint_state(ObjectResponse(1.0, 0.0), 0.0)
        with pytest.raises(ValueError):
            coincidence_table(state, 1.5)


class TestSignalCoherence:
    def test_magnitude_equals_transmittance(self):
        for t in (0.0, 0.37, 1.0):
            state = build_joint_state(ObjectResponse(t, 1.1), 0.0)
            assert abs(signal_coherence(state)) == pytest.approx(t, abs=1e-12)

    def test_perfect_coherence_without_object(self):
        state = build_joint_state(ObjectResponse(1.0, 0.0), 0.0)
        assert abs(signal_coherence(state)) == pytest.approx(1.0, abs=1e-12)

    def test_visibility_equals_coherence(self):
        # numerically locate the fringe extrema of the traced-out
        # probability and compare peak-to-valley with the coherence
        for t in (0.2, 0.7, 1.0):
            for gamma in (0.0, 1.3, 4.0):
                def p_g(phi):
                    return detection_probabilities(
                        build_joint_state(ObjectResponse(t, gamma), phi)).p_g

                coarse = np.linspace(0.0, 2 * math.pi, 512)
                values = np.array([p_g(x) for x in coarse])
                lo = minimize_scalar(p_g, bracket=None, bounds=(0, 2 * math.pi),
                                     method="bounded",
                                     options={"xatol": 1e-12})
                hi = minimize_scalar(lambda x: -p_g(x), bounds=(0, 2 * math.pi),
                                     method="bounded", options={"xatol": 1e-12})
                swing = -hi.fun - lo.fun
                assert values.max() <= -hi.fun + 1e-12
                expected = abs(signal_coherence(
                    build_joint_state(ObjectResponse(t, gamma), 0.0)))
                assert swing == pytest.approx(expected, abs=1e-9)


def test_phase_transfer_between_object_and_pump():
    # moving phase from the object to the pump (with opposite sign) must
    # leave the observable statistics untouched
    rng = np.random.default_rng(8)
    for _ in range(100):
        t, gamma, phi = rng.uniform(0, 1), rng.uniform(0, 6), rng.uniform(0, 6)
        delta = rng.uniform(-3, 3)
        a = detection_probabilities(
            build_joint_state(ObjectResponse(t, gamma + delta), phi - delta))
        b = detection_probabilities(build_joint_state(ObjectResponse(t, gamma), phi))
        assert a.p_g == pytest.approx(b.p_g, abs=1e-12)
        assert a.p_h == pytest.approx(b.p_h, abs=1e-12)


def test_mode_families_are_disjoint():
    assert not (qcore.SIGNAL_MODES & qcore.IDLER_MODES)
    assert len(qcore.SIGNAL_MODES | qcore.IDLER_MODES) == 7
