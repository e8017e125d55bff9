"""Wave and fundamental equations on diagonalizable networks.

``x'' = -L x`` is integrated directly (RK4 on the first-order ``(x, v)``
system) and also solved exactly in the eigenmode basis; the two routes are
independent checks of each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrate import check_oscillatory_step, rk4, step_count
from .spectral import (
    NotDiagonalizableError,
    NonRealSpectrumError,
    NegativeEigenvalueError,
    SqrtOperator,
    Spectrum,
)


@dataclass(frozen=True)
class NodeTrajectory:
    """Sampled node states. ``v`` is ``None`` for first-order solutions."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    return sign


def integrate_wave_direct(L, x0, v0, dt: float = 1e-3, T: float = 10.0,
                          stride: int = 1) -> NodeTrajectory:
    """RK4 solution of ``x'' = -L x`` from ``(x0, v0)``.

    Raises :class:`~oscillnet.integrate.StepSizeError` when
    ``dt * sqrt(max |lambda|)`` exceeds the RK4 imaginary-axis limit.
    """
    L = np.asarray(L, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    n = L.shape[0]
    if x0.shape != (n,) or v0.shape != (n,):
        raise ValueError(f"initial state must have length {n}")
    nsteps = step_count(dt, T)
    check_oscillatory_step(dt, float(np.sqrt(np.max(np.abs(np.linalg.eigvals(L))))))

    def f(t, y):
        return np.concatenate((y[n:], -L @ y[:n]))

    times, ys = rk4(f, np.concatenate((x0, v0)), dt, nsteps, stride)
    return NodeTrajectory(times, ys[:, :n], ys[:, n:],
                          {"method": "rk4", "dt": dt, "stride": stride})


def oscillation_energy(L, x, v) -> np.ndarray:
    """``0.5 |v|^2 + 0.5 x.L.x`` per sample (conserved for symmetric ``L``)."""
    L = np.asarray(L)
    x = np.atleast_2d(x)
    v = np.atleast_2d(v)
    return 0.5 * np.sum(v * v, axis=1) + 0.5 * np.einsum("ti,ij,tj->t", x, L, x)


def _mode_frequencies(spectrum: Spectrum) -> np.ndarray:
    if not spectrum.is_real:
        raise NonRealSpectrumError("mode solution needs a real spectrum")
    if not spectrum.is_diagonalizable:
        raise NotDiagonalizableError("mode solution needs a diagonalizable matrix")
    lam = spectrum.eigenvalues.real
    if np.any(lam < -spectrum.tol):
        raise NegativeEigenvalueError(f"negative eigenvalue {lam.min():.3g}")
    return np.sqrt(np.clip(lam, 0.0, None))


def solve_mode_exact(spectrum: Spectrum, phi0, t: float, sign: int = 1) -> np.ndarray:
    """``phi(t) = exp(-+ i Omega t) phi0`` with ``Omega = diag(sqrt(lambda))``.

    ``sign=+1`` selects the upper sign (``exp(-i Omega t)``).
    """
    omega = _mode_frequencies(spectrum)
    phi0 = np.asarray(phi0, dtype=complex)
    return np.exp(-1j * _sign(sign) * omega * t) * phi0


def wave_spectral(spectrum: Spectrum, x0, v0, times) -> np.ndarray:
    """Exact ``x(t)`` of the wave equation via the eigenmode expansion.

    Each mode evolves as ``cos(w t) phi0 + sin(w t)/w dphi0``; the zero
    mode drifts linearly. Returns shape ``(len(times), n)``.
    """
    omega = _mode_frequencies(spectrum)
    P = spectrum.eigenvectors
    phi0 = np.linalg.solve(P, np.asarray(x0, dtype=complex))
    dphi0 = np.linalg.solve(P, np.asarray(v0, dtype=complex))
    t = np.asarray(times, dtype=float)[:, None]
    wt = omega * t
    safe = np.where(omega > 0, omega, 1.0)
    sinc_term = np.where(omega > 0, np.sin(wt) / safe, t)
    phi = np.cos(wt) * phi0 + sinc_term * dphi0
    return (phi @ P.T).real


def solve_fundamental(H, x0, dt: float = 1e-3, T: float = 10.0, sign: int = 1,
                      stride: int = 1) -> NodeTrajectory:
    """RK4 solution of ``+-i dx/dt = H x``; ``sign=+1`` is the upper sign."""
    Hm = H.entries if isinstance(H, SqrtOperator) else np.asarray(H)
    Hm = Hm.astype(complex)
    s = _sign(sign)
    nsteps = step_count(dt, T)
    check_oscillatory_step(dt, float(np.max(np.abs(np.linalg.eigvals(Hm)))))
    A = -1j * s * Hm

    def f(t, y):
        return A @ y

    times, xs = rk4(f, np.asarray(x0, dtype=complex), dt, nsteps, stride)
    return NodeTrajectory(times, xs, None,
                          {"method": "rk4", "dt": dt, "stride": stride, "sign": s})
