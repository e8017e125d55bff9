"""Post-hoc analysis of phase trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .phase import OVERFLOW_GUARD, PhaseState, Trajectory, rhs_direct, rhs_unitary

# Panels (a)-(f): Re[delta_first] - Re[delta_second].
PHASE_DIFFERENCE_PANELS = {
    "a": ("1d", "1u"),
    "b": ("2d", "1u"),
    "c": ("2u", "1d"),
    "d": ("2d", "2u"),
    "e": ("3d", "2u"),
    "f": ("3u", "3d"),
}
IMAG_PANELS = {"a": "1u", "b": "1d", "c": "2u", "d": "2d", "e": "3u", "f": "3d"}
LOG_TIME_PANELS = {"a": "1u", "b": "1d"}

BOUNDED = "bounded"
LOGARITHMIC = "logarithmic"
FASTER = "faster-than-logarithmic"
CLASS_TEXT = {
    BOUNDED: "bounded",
    LOGARITHMIC: "logarithmic divergence",
    FASTER: "faster-than-logarithmic divergence",
}


class InsufficientSamplesError(ValueError):
    pass


def phase_difference(traj: Trajectory, pair: tuple[str, str]) -> np.ndarray:
    a, b = pair
    return traj.re(a) - traj.re(b)


def available_panels(m: int, panels: dict) -> dict:
    top = str(m)

    def ok(label):
        return int(label[:-1]) <= int(top)

    return {k: v for k, v in panels.items()
            if all(ok(x) for x in (v if isinstance(v, tuple) else (v,)))}


def _tail_mask(times, t_min, tail_fraction):
    if t_min is not None:
        mask = times >= t_min
    else:
        mask = times >= times[-1] - tail_fraction * (times[-1] - times[0])
    if mask.sum() < 2:
        raise InsufficientSamplesError("tail window holds fewer than 2 samples")
    return mask


@dataclass(frozen=True)
class PhaseDifferenceStats:
    pair: tuple[str, str]
    min: float
    max: float
    amplitude: float
    converged: bool
    limit: float | None


def phase_difference_stats(traj: Trajectory, pair: tuple[str, str], t_min: float | None = None,
                           tail_fraction: float = 0.5,
                           converge_amplitude: float = 0.05) -> PhaseDifferenceStats:
    """Range of ``Re[delta_a] - Re[delta_b]`` over the tail window.

    The window is ``t >= t_min`` when given, else the last ``tail_fraction``
    of the time span. Converged means half the peak-to-peak range is below
    ``converge_amplitude``; the limit is then the window mean.
    """
    diff = phase_difference(traj, pair)
    tail = diff[_tail_mask(traj.times, t_min, tail_fraction)]
    lo, hi = float(tail.min()), float(tail.max())
    amp = 0.5 * (hi - lo)
    converged = amp < converge_amplitude
    return PhaseDifferenceStats(tuple(pair), lo, hi, amp, converged,
                                float(tail.mean()) if converged else None)


@dataclass(frozen=True)
class ModeDivergence:
    label: str
    classification: str
    slope: float
    intercept: float
    r2: float
    curvature: float
    onset: float | None

    @property
    def text(self) -> str:
        return CLASS_TEXT[self.classification]


@dataclass(frozen=True)
class DivergenceReport:
    modes: dict[str, ModeDivergence]
    thresholds: dict = field(default_factory=dict)
    window: tuple[float, float] = (0.0, 0.0)

    def __getitem__(self, label):
        return self.modes[label]

    def classifications(self) -> dict[str, str]:
        return {k: v.classification for k, v in self.modes.items()}


def _r2(y, fit):
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0
    return 1.0 - float(np.sum((y - fit) ** 2)) / ss_tot


def classify_divergence(traj: Trajectory, window: tuple[float, float] | None = None,
                        tail_fraction: float = 0.5, slope_min: float = 0.01,
                        r2_min: float = 0.99, convex_max: float = 0.2,
                        onset_level: float = 1.0, min_decades: float = 1.5,
                        min_samples: int = 10,
                        guard: float = OVERFLOW_GUARD) -> DivergenceReport:
    """Classify the growth of ``|Im delta_k|`` against ``ln t``.

    A straight line and a parabola are fitted to ``|Im delta|`` over the
    window in ``s = ln t`` (the explicit ``window`` in ``t``, else the last
    ``tail_fraction`` of the log-time span).

    * faster-than-logarithmic: the mode hit the overflow guard, or the fit
      has slope >= ``slope_min`` and the parabola's rise over the window
      exceeds ``convex_max`` times the linear rise (convex residual);
    * logarithmic: slope >= ``slope_min`` and linear ``R^2 >= r2_min``;
    * bounded: everything else.

    ``curvature`` is that quadratic-to-linear rise ratio. ``onset`` is the
    earliest sample time after which ``|Im delta| >= onset_level`` holds
    (diverging modes only).
    """
    positive = traj.times > 0
    t = traj.times[positive]
    if len(t) < min_samples:
        raise InsufficientSamplesError(f"need at least {min_samples} samples with t > 0")
    decades = math.log10(t[-1] / t[0])
    if decades < min_decades:
        raise InsufficientSamplesError(
            f"trajectory spans {decades:.2f} decades of time, need {min_decades}")
    s = np.log(t)
    if window is None:
        lo = s[-1] - tail_fraction * (s[-1] - s[0])
        mask = s >= lo
        win = (float(math.exp(lo)), float(t[-1]))
    else:
        mask = (t >= window[0]) & (t <= window[1])
        win = (float(window[0]), float(window[1]))
    if mask.sum() < min_samples:
        raise InsufficientSamplesError(f"window holds {int(mask.sum())} samples")
    sw = s[mask]
    span = sw[-1] - sw[0]
    modes = {}
    for label in traj.labels:
        y_all = np.abs(traj.im(label)[positive])
        y = y_all[mask]
        slope, intercept = np.polyfit(sw, y, 1)
        r2 = _r2(y, slope * sw + intercept)
        quad = np.polyfit(sw - sw[0], y, 2)[0]
        curvature = quad * span * span / max(abs(slope) * span, 1e-300)
        hit_guard = traj.diverged and y_all[-1] > guard
        if hit_guard or (slope >= slope_min and curvature > convex_max):
            cls = FASTER
        elif slope >= slope_min and r2 >= r2_min:
            cls = LOGARITHMIC
        else:
            cls = BOUNDED
        onset = None
        if cls != BOUNDED:
            below = np.nonzero(y_all < onset_level)[0]
            if len(below) == 0:
                onset = float(t[0])
            elif below[-1] + 1 < len(t):
                onset = float(t[below[-1] + 1])
        modes[label] = ModeDivergence(label, cls, float(slope), float(intercept),
                                      float(r2), float(curvature), onset)
    thresholds = {"slope_min": slope_min, "r2_min": r2_min, "convex_max": convex_max,
                  "tail_fraction": tail_fraction, "onset_level": onset_level}
    return DivergenceReport(modes, thresholds, win)


def phase_derivatives(traj: Trajectory) -> np.ndarray:
    """Exact right-hand side evaluated at every sample, same layout as ``states``."""
    meta = traj.meta
    rhs = rhs_direct if meta.get("variant", "direct") == "direct" else rhs_unitary
    d, omega = meta.get("d", 1.0), meta.get("omega", 0.0)
    out = np.empty_like(traj.states)
    for i, (t, y) in enumerate(zip(traj.times, traj.states)):
        out[i] = rhs(PhaseState.from_vector(y, float(t)), d, omega).to_vector()
    return out


@dataclass(frozen=True)
class SignEvents:
    """Zero crossings of a derivative: peaks (+ to -) and troughs (- to +)."""

    peaks: np.ndarray
    troughs: np.ndarray


def sign_change_events(times, derivative) -> SignEvents:
    """Linearly interpolated sign-change times of a sampled derivative."""
    times = np.asarray(times)
    g = np.asarray(derivative)
    a, b = g[:-1], g[1:]
    idx = np.nonzero((a > 0) & (b <= 0) | (a < 0) & (b >= 0))[0]
    frac = a[idx] / (a[idx] - b[idx])
    tc = times[idx] + frac * (times[idx + 1] - times[idx])
    falling = a[idx] > 0
    return SignEvents(tc[falling], tc[~falling])


def _nearest_offsets(src, dst):
    pos = np.searchsorted(dst, src)
    lo = np.clip(pos - 1, 0, len(dst) - 1)
    hi = np.clip(pos, 0, len(dst) - 1)
    d_lo, d_hi = src - dst[lo], dst[hi] - src
    return np.where(np.abs(d_lo) <= np.abs(d_hi), np.abs(d_lo), np.abs(d_hi))


@dataclass(frozen=True)
class SpikePhaseReport:
    """Relative timing of the derivative sign-change events of two series.

    ``same_type_ratio``: offset from each peak of the first series to the
    nearest peak of the second, divided by half the local period (1 for
    exact anti-phase, 0 for in-phase). ``opposite_type_fraction``: offset
    from each peak of the first series to the nearest trough of the second,
    as a fraction of the local period.
    """

    peak_times: np.ndarray
    local_period: np.ndarray
    same_type_ratio: np.ndarray
    opposite_type_fraction: np.ndarray


def spike_phase(traj: Trajectory, first: str = "1u", second: str = "1d",
                t_min: float = 0.0, t_max: float | None = None) -> SpikePhaseReport:
    """Compare the sign-change events of ``d Im[delta]/dt`` for two modes."""
    deriv = phase_derivatives(traj)
    ca, cb = traj._col(first, True), traj._col(second, True)
    ea = sign_change_events(traj.times, deriv[:, ca])
    eb = sign_change_events(traj.times, deriv[:, cb])
    t_max = traj.times[-1] if t_max is None else t_max
    peaks = ea.peaks
    if len(peaks) < 3 or len(eb.peaks) < 2 or len(eb.troughs) < 2:
        raise InsufficientSamplesError("too few sign-change events")
    period = np.gradient(peaks)
    keep = (peaks >= t_min) & (peaks <= t_max)
    keep[0] = keep[-1] = False
    p, per = peaks[keep], period[keep]
    same = _nearest_offsets(p, eb.peaks) / (0.5 * per)
    opposite = _nearest_offsets(p, eb.troughs) / per
    return SpikePhaseReport(p, per, same, opposite)
