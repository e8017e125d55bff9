import math

import numpy as np
import pytest

from oscillnet.analysis import (
    BOUNDED,
    FASTER,
    PHASE_DIFFERENCE_PANELS,
    LOGARITHMIC,
    InsufficientSamplesError,
    available_panels,
    classify_divergence,
    phase_difference_stats,
    sign_change_events,
    spike_phase,
)
from oscillnet.degenerate import JordanBlockModel
from oscillnet.phase import PhaseIntegrationError, PhaseState, Trajectory, integrate_phases


def synthetic(times, im_1u, re_1u=None, re_1d=None, diverged=False):
    """m = 1 trajectory with prescribed Im[delta_1u] (and optional real parts)."""
    n = len(times)
    states = np.zeros((n, 4))
    states[:, 1] = im_1u
    if re_1u is not None:
        states[:, 0] = re_1u
    if re_1d is not None:
        states[:, 2] = re_1d
    return Trajectory(np.asarray(times, float), states, 1, {"d": 1.0, "omega": 0.0},
                      diverged=diverged)


T = np.linspace(0, 1000, 10001)


@pytest.fixture(scope="module")
def reference():
    return integrate_phases(JordanBlockModel(0, 1, 3), "direct", dt=1e-3, T=1000, stride=100)


class TestClassification:
    def test_pure_logarithm(self):
        rep = classify_divergence(synthetic(T, -np.log1p(T)))
        m = rep["1u"]
        assert m.classification == LOGARITHMIC and m.slope == pytest.approx(1, rel=1e-2)
        assert m.r2 > 0.999 and m.text == "logarithmic divergence"

    def test_zero_series(self):
        m = classify_divergence(synthetic(T, np.zeros_like(T)))["1u"]
        assert m.classification == BOUNDED and m.slope == 0 and m.onset is None

    def test_bounded_oscillation(self):
        m = classify_divergence(synthetic(T, 0.5 * np.sin(T)))["1u"]
        assert m.classification == BOUNDED

    def test_power_law_is_faster(self):
        m = classify_divergence(synthetic(T, -np.sqrt(T)))["1u"]
        assert m.classification == FASTER and m.curvature > 0.2

    def test_guard_hit_is_faster(self):
        y = -np.log1p(T)
        y[-1] = -701.0
        m = classify_divergence(synthetic(T, y, diverged=True))["1u"]
        assert m.classification == FASTER

    def test_onset(self):
        m = classify_divergence(synthetic(T, -np.log1p(T)))["1u"]
        # |Im| = ln(1 + t) >= 1 from t = e - 1 on; first sample after that is 1.8
        assert m.onset == pytest.approx(1.8)

    def test_explicit_window(self):
        rep = classify_divergence(synthetic(T, -np.log1p(T)), window=(100, 1000))
        assert rep.window == (100, 1000) and rep["1u"].r2 > 0.9999

    def test_thresholds_recorded(self):
        rep = classify_divergence(synthetic(T, np.zeros_like(T)), slope_min=0.05)
        assert rep.thresholds["slope_min"] == 0.05 and rep.thresholds["r2_min"] == 0.99

    def test_needs_decades(self):
        with pytest.raises(InsufficientSamplesError):
            classify_divergence(synthetic(np.linspace(1, 10, 1001), np.zeros(1001)))

    def test_needs_samples(self):
        with pytest.raises(InsufficientSamplesError):
            classify_divergence(synthetic(np.array([0.0, 1.0, 1000.0]), np.zeros(3)))

    def test_reference(self, reference):
        rep = classify_divergence(reference)
        assert rep.classifications() == {"1u": LOGARITHMIC, "1d": LOGARITHMIC,
                                         "2u": BOUNDED, "2d": BOUNDED,
                                         "3u": BOUNDED, "3d": BOUNDED}

    def test_zero_coupling_modes(self):
        """d = 0 still leaves the nilpotent chain: psi_1 ~ t^2, psi_2 ~ t.

        Generic initial phases keep every psi_k away from zero.
        """
        rng = np.random.default_rng(1)
        init = PhaseState(*(rng.uniform(-0.3, 0.3, 3) for _ in range(4)))
        tr = integrate_phases(JordanBlockModel(0, 0, 3), initial=init, dt=1e-3, T=1000,
                              stride=100)
        rep = classify_divergence(tr)
        assert rep["1u"].classification == LOGARITHMIC
        assert rep["1u"].slope == pytest.approx(2.0, abs=0.05)
        assert rep["2u"].classification == LOGARITHMIC
        assert rep["2u"].slope == pytest.approx(1.0, abs=0.05)
        assert rep["3u"].classification == BOUNDED and abs(rep["3u"].slope) < 1e-15

    def test_zero_coupling_from_zero_phases_hits_phase_singularity(self):
        """With all phases 0 and d = 0, psi_1u(t) = 1 - t - t^2/2 is real and
        vanishes at t = sqrt(3) - 1, where the phase is undefined."""
        with pytest.raises(PhaseIntegrationError) as info:
            integrate_phases(JordanBlockModel(0, 0, 3), dt=1e-3, T=1000)
        assert info.value.time == pytest.approx(math.sqrt(3) - 1, abs=0.01)


class TestPhaseDifferenceStats:
    def test_converging(self):
        tr = synthetic(T, np.zeros_like(T), re_1u=np.zeros_like(T),
                       re_1d=np.exp(-T / 50) * np.sin(T))
        s = phase_difference_stats(tr, ("1d", "1u"), t_min=200)
        assert s.converged and abs(s.limit) < 1e-3

    def test_not_converging(self):
        tr = synthetic(T, np.zeros_like(T), re_1u=np.zeros_like(T), re_1d=1 + np.sin(T))
        s = phase_difference_stats(tr, ("1d", "1u"))
        assert not s.converged and s.limit is None
        assert s.min == pytest.approx(0, abs=1e-4) and s.max == pytest.approx(2, abs=1e-4)

    def test_default_tail_is_second_half(self):
        re = np.where(T < 500, 10.0, 0.0)
        tr = synthetic(T, np.zeros_like(T), re_1u=np.zeros_like(T), re_1d=re)
        s = phase_difference_stats(tr, ("1d", "1u"))
        assert s.max == 0.0 and s.converged

    def test_reference_landmarks(self, reference):
        a = phase_difference_stats(reference, PHASE_DIFFERENCE_PANELS["a"], t_min=200)
        b = phase_difference_stats(reference, PHASE_DIFFERENCE_PANELS["b"], t_min=200)
        c = phase_difference_stats(reference, PHASE_DIFFERENCE_PANELS["c"], t_min=200)
        assert a.converged and abs(a.limit) < 0.01
        assert not b.converged and abs(b.max - 4 * math.pi / 5) < 0.15 and b.min < math.pi / 2
        assert not c.converged and abs(c.min - math.pi / 5) < 0.15 and c.max < math.pi / 2

    def test_panels_limited_by_m(self):
        assert set(available_panels(1, PHASE_DIFFERENCE_PANELS)) == {"a"}
        assert set(available_panels(2, PHASE_DIFFERENCE_PANELS)) == {"a", "b", "c", "d"}
        assert set(available_panels(3, PHASE_DIFFERENCE_PANELS)) == set("abcdef")


class TestSignChanges:
    def test_sine_derivative(self):
        t = np.linspace(0, 4 * math.pi, 4001)
        ev = sign_change_events(t, np.cos(t))  # derivative of sin
        assert np.allclose(ev.peaks, [math.pi / 2, 5 * math.pi / 2], atol=1e-6)
        assert np.allclose(ev.troughs, [3 * math.pi / 2, 7 * math.pi / 2], atol=1e-6)

    def test_reference_spike_timing(self, reference):
        rep = spike_phase(reference, t_min=100)
        # peaks of Im 1u sit on troughs of Im 1d ...
        assert np.median(rep.opposite_type_fraction) < 0.01
        # ... while same-type events are offset by 2 atan(2) / pi ~ 0.70 half-periods
        assert np.median(rep.same_type_ratio) == pytest.approx(2 * math.atan(2) / math.pi,
                                                               abs=0.02)
        assert np.median(rep.local_period) == pytest.approx(math.pi, rel=1e-3)
