"""Fixed-step classical Runge-Kutta integration."""

from __future__ import annotations

import math

import numpy as np

# |h * lambda| bound of RK4 on the imaginary axis; oscillatory modes with
# dt * frequency beyond this grow spuriously.
RK4_IMAG_STABILITY = 2.0 * math.sqrt(2.0)


class StepSizeError(ValueError):
    """Requested step is outside the integrator's stability region."""


def step_count(dt: float, T: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    return int(round(T / dt))


def check_oscillatory_step(dt: float, max_frequency: float) -> None:
    if dt * max_frequency > RK4_IMAG_STABILITY:
        raise StepSizeError(
            f"dt * max frequency = {dt * max_frequency:.3g} exceeds the RK4 "
            f"stability limit {RK4_IMAG_STABILITY:.4f}"
        )


def rk4(f, y0, dt: float, nsteps: int, stride: int = 1, t0: float = 0.0):
    """Integrate ``y' = f(t, y)`` with ``nsteps`` RK4 steps.

    Samples are taken every ``stride`` steps (the initial state included);
    sample times are ``t0 + k * dt`` computed by multiplication so they do
    not accumulate rounding.

    Returns
    -------
    times : ndarray, shape (nsamples,)
    ys : ndarray, shape (nsamples, len(y0))
    """
    y = np.array(y0, copy=True)
    nsamples = nsteps // stride + 1
    times = np.empty(nsamples)
    ys = np.empty((nsamples,) + y.shape, dtype=y.dtype)
    times[0], ys[0] = t0, y
    half = 0.5 * dt
    for k in range(nsteps):
        t = t0 + k * dt
        k1 = f(t, y)
        k2 = f(t + half, y + half * k1)
        k3 = f(t + half, y + half * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % stride == 0:
            s = (k + 1) // stride
            times[s] = t0 + (k + 1) * dt
            ys[s] = y
    return times, ys
