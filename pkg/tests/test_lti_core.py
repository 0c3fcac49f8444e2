import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahss.duct_model import DuctGeometry, build_duct, duct_eigenvalues
from ahss.harmonic import extract
from ahss.lti_core import (
    ConfigurationError,
    ResonantEvaluationError,
    StateSpaceModel,
    TonalDisturbance,
    ValidationError,
    _rk4_matrices,
    is_asymptotically_stable,
    simulate,
    transfer_at,
)
from oracles import leakage_closed_form, transfer_oracle

# frozen from transfer_oracle (Gaussian elimination) and the modal-sum formula,
# both evaluated before the library routine existed
DUCT_M_PORT1_W251 = np.array([2503574.49786232 + 15867022.3093875j, 1478211.03337669 + 4582272.97536129j])


def first_order():
    return StateSpaceModel(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])


def cos_input(omega, amp=1.0):
    return lambda t: amp * np.cos(omega * np.asarray(t))[:, None]


class TestModel:
    def test_defaults_fill_zero_matrices(self):
        m = StateSpaceModel(A=np.diag([-1.0, -2.0]), B=np.ones((2, 1)), C=np.ones((3, 2)))
        assert m.D.shape == (3, 1)
        assert m.D1.shape == (2, 1) and m.D2.shape == (3, 1)
        assert np.all(m.x0 == 0)
        assert (m.n_states, m.n_inputs, m.n_outputs, m.n_disturbances) == (2, 1, 3, 1)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(A=np.zeros((2, 3)), B=np.ones((2, 1)), C=np.ones((1, 2))),
            dict(A=-np.eye(2), B=np.ones((3, 1)), C=np.ones((1, 2))),
            dict(A=-np.eye(2), B=np.ones((2, 1)), C=np.ones((1, 3))),
            dict(A=-np.eye(2), B=np.ones((2, 1)), C=np.ones((1, 2)), D=np.ones((2, 1))),
            dict(A=-np.eye(2), B=np.ones((2, 1)), C=np.ones((1, 2)), D1=np.ones((2, 2)), D2=np.ones((1, 1))),
            dict(A=-np.eye(2), B=np.ones((2, 1)), C=np.ones((1, 2)), x0=[1.0]),
            dict(A=[[np.nan]], B=[[1.0]], C=[[1.0]]),
        ],
    )
    def test_dimension_validation(self, kwargs):
        with pytest.raises(ValidationError):
            StateSpaceModel(**kwargs)

    def test_select_keeps_requested_channels(self):
        full = build_duct(DuctGeometry())
        sub = full.select([1], [0])
        np.testing.assert_array_equal(sub.B[:, 0], full.B[:, 1])
        np.testing.assert_array_equal(sub.C[0], full.C[0])


class TestTonalDisturbance:
    def test_evaluation(self):
        d = TonalDisturbance([2.0, 3.0], [[1.0], [0.5]], [[0.0], [2.0]])
        t = np.array([0.0, 0.3])
        expected = np.cos(2 * t) + 0.5 * np.cos(3 * t) + 2 * np.sin(3 * t)
        np.testing.assert_allclose(d(t)[:, 0], expected)
        assert d.phasor(1) == pytest.approx(np.array([0.5 - 2j]))

    @pytest.mark.parametrize("freqs", [[0.0], [-1.0], [2.0, 2.0]])
    def test_invalid_frequencies(self, freqs):
        with pytest.raises(ValidationError):
            TonalDisturbance(freqs, np.ones((len(freqs), 1)), np.zeros((len(freqs), 1)))


class TestTransferAt:
    def test_dc_gain_first_order(self):
        assert transfer_at(first_order(), 0.0)[0, 0] == pytest.approx(1.0)

    def test_first_order_at_unit_frequency(self):
        assert transfer_at(first_order(), 1.0)[0, 0] == pytest.approx(0.5 - 0.5j)

    def test_duct_port1_frozen(self):
        model = build_duct(DuctGeometry())
        np.testing.assert_allclose(transfer_at(model, 251.0)[:, 0], DUCT_M_PORT1_W251, rtol=1e-12)

    def test_matches_elimination_oracle_on_random_stable_models(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n, m, ell = rng.integers(1, 6, size=3)
            A = rng.normal(size=(n, n))
            A -= (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n)
            model = StateSpaceModel(A, rng.normal(size=(n, m)), rng.normal(size=(ell, n)), rng.normal(size=(ell, m)))
            w = rng.uniform(0.1, 10)
            np.testing.assert_allclose(
                transfer_at(model, w), transfer_oracle(model.A, model.B, model.C, model.D, w), rtol=1e-10, atol=1e-12
            )

    def test_disturbance_port(self):
        model = StateSpaceModel(A=[[-2.0]], B=[[1.0]], C=[[1.0]], D1=[[3.0]], D2=[[0.5]])
        assert transfer_at(model, 0.0, "disturbance")[0, 0] == pytest.approx(1.5 + 0.5)

    def test_resonant_evaluation(self):
        osc = StateSpaceModel(A=[[0.0, 1.0], [-1.0, 0.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]])
        with pytest.raises(ResonantEvaluationError):
            transfer_at(osc, 1.0)

    def test_unknown_port(self):
        with pytest.raises(ValidationError):
            transfer_at(first_order(), 1.0, "sensor")


class TestStability:
    def test_first_order_stable(self):
        assert is_asymptotically_stable(first_order())

    def test_undamped_oscillator_not_stable(self):
        osc = StateSpaceModel(A=[[0.0, 1.0], [-1.0, 0.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]])
        assert not is_asymptotically_stable(osc)

    def test_margin_rejects_marginal_poles(self):
        m = StateSpaceModel(A=[[-1e-12]], B=[[1.0]], C=[[1.0]])
        assert not is_asymptotically_stable(m)

    def test_duct_is_stable_and_poles_match_modal_formula(self):
        g = DuctGeometry()
        model = build_duct(g)
        assert is_asymptotically_stable(model)
        expected = duct_eigenvalues(g)
        assert np.max(expected.real) < 0
        # each block's poles: -zeta wn +/- j wn sqrt(1 - zeta^2)
        wn1 = math.pi * 343 / 2
        assert expected[0] == pytest.approx(complex(-0.2 * wn1, wn1 * math.sqrt(0.96)))


class TestRk4Matrices:
    def test_matches_textbook_rk4(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(3, 3)) - 2 * np.eye(3)
        f = lambda t: np.array([np.sin(3 * t), np.cos(t), t * t])  # noqa: E731
        h, t, x = 0.01, 0.2, rng.normal(size=3)
        k1 = A @ x + f(t)
        k2 = A @ (x + h / 2 * k1) + f(t + h / 2)
        k3 = A @ (x + h / 2 * k2) + f(t + h / 2)
        k4 = A @ (x + h * k3) + f(t + h)
        ref = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        phi, g0, gh, g1 = _rk4_matrices(A, h)
        got = phi @ x + g0 @ f(t) + gh @ f(t + h / 2) + g1 @ f(t + h)
        np.testing.assert_allclose(got, ref, rtol=1e-13)


class TestSimulate:
    def test_zero_inputs_give_zero_output(self):
        res = simulate(first_order(), None, None, (0.0, 1.0), 1000.0)
        assert res.y.shape == (1000, 1)
        assert np.all(res.y == 0)
        np.testing.assert_allclose(res.t[:3], [0.0, 0.001, 0.002])

    def test_first_order_steady_state_matches_transfer(self):
        # 2 pi * 10 rad/s over a whole 1 s tail: integer cycle window
        w = 2 * math.pi * 10
        res = simulate(first_order(), cos_input(w), None, (0.0, 12.0), 1000.0, frequencies=[w])
        tail = slice(11000, 12000)
        ph = extract(res.y[tail], res.t[tail], w).value[0]
        expected = transfer_at(first_order(), w)[0, 0]
        assert abs(ph - expected) / abs(expected) < 1e-3

    def test_first_order_unit_frequency_amplitude_and_phase(self):
        w = 1.0
        res = simulate(first_order(), cos_input(w), None, (0.0, 40 * math.pi), 100.0, frequencies=[w])
        n = int(round(2 * math.pi * 100)) * 5
        # ~5 periods in the tail; compare against the leakage-corrected expectation
        t, y = res.t[-n:], res.y[-n:]
        p = transfer_at(first_order(), w)[0, 0]
        got = extract(y, t, w).value[0]
        want = leakage_closed_form(p, w, t[0], t[1] - t[0], n)
        assert abs(got - want) < 1e-3 * abs(p)
        assert abs(p) == pytest.approx(1 / math.sqrt(2))
        assert math.degrees(np.angle(p)) == pytest.approx(-45.0)

    def test_duct_disturbance_tail_phasor(self):
        model = build_duct(DuctGeometry())
        w = 251.0
        dist = TonalDisturbance([w], [[2.0]], [[1.0]])
        res = simulate(model, None, dist, (0.0, 2.0), 1000.0, frequencies=[w])
        t, y = res.t[-1000:], res.y[-1000:]
        dh = transfer_at(model, w, "disturbance")[:, 0] * (2 - 1j)
        for ch in range(2):
            want = leakage_closed_form(dh[ch], w, t[0], t[1] - t[0], t.size)
            got = extract(y[:, ch], t, w).value[0]
            assert abs(got - want) / abs(dh[ch]) < 1e-3

    def test_linearity(self):
        model = build_duct(DuctGeometry())
        u1 = lambda t: np.column_stack([np.sin(251 * t), 0.3 * np.cos(100 * t)])  # noqa: E731
        u2 = lambda t: np.column_stack([np.cos(50 * t), np.sin(251 * t)])  # noqa: E731
        both = lambda t: u1(t) + u2(t)  # noqa: E731
        run = lambda u: simulate(model, u, None, (0.0, 0.3), 1000.0).y  # noqa: E731
        zero = run(None)
        combo = run(both) - run(u1) - run(u2) + zero
        assert np.max(np.abs(combo)) <= 1e-9 * np.max(np.abs(run(both)))

    def test_refinement_converges_at_fourth_order(self):
        model = build_duct(DuctGeometry())
        dist = TonalDisturbance([251.0], [[1.0]], [[0.0]])
        ys = [simulate(model, None, dist, (0.0, 0.2), 1000.0, substeps=s).y for s in (5, 10, 20)]
        e1 = np.max(np.abs(ys[0] - ys[1]))
        e2 = np.max(np.abs(ys[1] - ys[2]))
        assert e1 / e2 > 8  # ideal ratio 16 for a fourth-order scheme

    def test_deterministic(self):
        model = build_duct(DuctGeometry())
        dist = TonalDisturbance([251.0], [[2.0]], [[1.0]])
        a = simulate(model, None, dist, (0.0, 0.5), 1000.0)
        b = simulate(model, None, dist, (0.0, 0.5), 1000.0)
        assert np.array_equal(a.y, b.y)

    def test_continuation_equals_single_run(self):
        model = build_duct(DuctGeometry())
        dist = TonalDisturbance([251.0], [[2.0]], [[1.0]])
        whole = simulate(model, None, dist, (0.0, 0.2), 1000.0)
        first = simulate(model, None, dist, (0.0, 0.1), 1000.0)
        second = simulate(model, None, dist, (0.1, 0.2), 1000.0, x0=first.x_final, start_index=100)
        np.testing.assert_allclose(np.vstack([first.y, second.y]), whole.y, rtol=1e-12, atol=1e-6)

    def test_rejects_under_resolved_tone(self):
        with pytest.raises(ConfigurationError):
            simulate(first_order(), cos_input(1000.0), None, (0.0, 1.0), 1000.0, frequencies=[1000.0])

    def test_rejects_under_resolved_mode(self):
        model = build_duct(DuctGeometry())
        with pytest.raises(ConfigurationError):
            simulate(model, None, None, (0.0, 0.1), 1000.0, substeps=1)

    def test_rejects_unstable_model(self):
        osc = StateSpaceModel(A=[[0.0, 1.0], [-1.0, 0.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]])
        with pytest.raises(ConfigurationError):
            simulate(osc, None, None, (0.0, 1.0), 100.0)

    def test_rejects_wrong_channel_count(self):
        with pytest.raises(ValidationError):
            simulate(first_order(), lambda t: np.zeros((np.size(t), 2)), None, (0.0, 1.0), 100.0)

    @settings(max_examples=25, deadline=None)
    @given(
        st.floats(0.5, 5.0),
        st.floats(-2.0, 2.0),
        st.floats(-2.0, 2.0),
    )
    def test_single_tone_steady_state_property(self, pole, uc, us):
        # stable first-order model with pole -pole; tail starts after > 10 time constants
        model = StateSpaceModel(A=[[-pole]], B=[[pole]], C=[[1.0]])
        w = 2 * math.pi * 2.0
        u = lambda t: (uc * np.cos(w * t) + us * np.sin(w * t))[:, None]  # noqa: E731
        res = simulate(model, u, None, (0.0, 25.0), 200.0, frequencies=[w])
        t, y = res.t[-200:], res.y[-200:]
        got = extract(y, t, w).value[0]
        want = transfer_at(model, w)[0, 0] * (uc - 1j * us)
        assert abs(got - want) <= 1e-3 * max(abs(want), 1e-12) + 1e-9
