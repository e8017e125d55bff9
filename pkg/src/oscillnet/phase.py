"""Complex phase deviations of the Pauli-extended Jordan-block modes.

Every component of the ``2m``-vector is written as
``psi_k^u = exp(-i omega t + i delta_k^u)`` and
``psi_k^d = exp(+i omega t + i delta_k^d)``. Substituting into
``i dpsi/dt = M psi`` gives, for the interaction-picture ("unitary")
operator, ``omega``-free equations

    d delta_k^u/dt = -d e^{i(delta_k^d - delta_k^u)} + i e^{i(delta_{k+1}^d - delta_k^u)}
    d delta_k^d/dt = -d e^{i(delta_k^u - delta_k^d)} - i e^{i(delta_{k+1}^u - delta_k^d)}

(the neighbour term is absent for ``k = m``). The constant ("direct")
operator adds the phase factor ``exp(+-2 i omega t)`` to every term. The
real/imaginary split of these is what :func:`rhs_unitary` and
:func:`rhs_direct` evaluate.

State vectors are laid out as ``[Re up (m), Im up (m), Re down (m), Im down (m)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .degenerate import JordanBlockModel, _coupling, _spins
from .integrate import step_count

VARIANTS = ("direct", "unitary")
OVERFLOW_GUARD = 700.0
UNDERFLOW_GUARD = 1e-200

_OK, _GUARD, _NONFINITE, _BRANCH, _UNDERFLOW = 0, 1, 2, 3, 4


class PhaseIntegrationError(RuntimeError):
    """Integration produced a non-finite value or an undefined phase."""

    def __init__(self, message, time=None, component=None):
        super().__init__(message)
        self.time = time
        self.component = component


def mode_labels(m: int) -> list[str]:
    """``['1u', '1d', '2u', '2d', ...]`` in the interleaved order."""
    return [f"{k}{s}" for k in range(1, m + 1) for s in ("u", "d")]


def _parse_label(label: str, m: int) -> tuple[int, bool]:
    k, spin = int(label[:-1]), label[-1]
    if spin not in ("u", "d") or not 1 <= k <= m:
        raise KeyError(f"no mode {label!r} for m={m}")
    return k - 1, spin == "u"


@dataclass(frozen=True)
class PhaseState:
    re_up: np.ndarray
    im_up: np.ndarray
    re_dn: np.ndarray
    im_dn: np.ndarray
    t: float = 0.0

    @property
    def m(self) -> int:
        return len(self.re_up)

    @classmethod
    def zeros(cls, m: int, t: float = 0.0) -> "PhaseState":
        z = np.zeros(m)
        return cls(z, z.copy(), z.copy(), z.copy(), t)

    @classmethod
    def from_vector(cls, y, t: float = 0.0) -> "PhaseState":
        y = np.asarray(y, dtype=float)
        m = len(y) // 4
        return cls(y[:m].copy(), y[m:2 * m].copy(), y[2 * m:3 * m].copy(), y[3 * m:].copy(), t)

    @classmethod
    def from_complex(cls, up, down, t: float = 0.0) -> "PhaseState":
        up, down = np.asarray(up, dtype=complex), np.asarray(down, dtype=complex)
        return cls(up.real.copy(), up.imag.copy(), down.real.copy(), down.imag.copy(), t)

    def to_vector(self) -> np.ndarray:
        return np.concatenate((self.re_up, self.im_up, self.re_dn, self.im_dn)).astype(float)

    def to_psi(self) -> np.ndarray:
        """Interleaved ``psi`` at ``omega t = 0``: ``exp(i delta)``."""
        up = np.exp(1j * (self.re_up + 1j * self.im_up))
        dn = np.exp(1j * (self.re_dn + 1j * self.im_dn))
        out = np.empty(2 * self.m, dtype=complex)
        out[0::2], out[1::2] = up, dn
        return out


@njit(cache=True)
def _rhs_kernel(y, t, m, d, omega, direct, out):
    c = 1.0
    s = 0.0
    if direct:
        c = math.cos(2.0 * omega * t)
        s = math.sin(2.0 * omega * t)
    for k in range(m):
        au = y[k]
        bu = y[m + k]
        ad = y[2 * m + k]
        bd = y[3 * m + k]
        e1 = math.exp(bu - bd)
        f1 = math.exp(bd - bu)
        d1 = ad - au
        g1 = au - ad
        if k + 1 < m:
            e2 = math.exp(bu - y[3 * m + k + 1])
            d2 = y[2 * m + k + 1] - au
            f2 = math.exp(bd - y[m + k + 1])
            g2 = y[k + 1] - ad
        else:
            e2 = 0.0
            d2 = 0.0
            f2 = 0.0
            g2 = 0.0
        if direct:
            out[k] = d * e1 * (-c * math.cos(d1) + s * math.sin(d1)) \
                + e2 * (-c * math.sin(d2) - s * math.cos(d2))
            out[m + k] = d * e1 * (-c * math.sin(d1) - s * math.cos(d1)) \
                + e2 * (c * math.cos(d2) - s * math.sin(d2))
            out[2 * m + k] = d * f1 * (-c * math.cos(g1) - s * math.sin(g1)) \
                + f2 * (c * math.sin(g2) - s * math.cos(g2))
            out[3 * m + k] = d * f1 * (-c * math.sin(g1) + s * math.cos(g1)) \
                + f2 * (-c * math.cos(g2) - s * math.sin(g2))
        else:
            out[k] = d * e1 * (-math.cos(d1)) + e2 * (-math.sin(d2))
            out[m + k] = d * e1 * (-math.sin(d1)) + e2 * math.cos(d2)
            out[2 * m + k] = d * f1 * (-math.cos(g1)) + f2 * math.sin(g2)
            out[3 * m + k] = d * f1 * (-math.sin(g1)) + f2 * (-math.cos(g2))


@njit(cache=True)
def _phase_rk4(y0, m, d, omega, direct, dt, nsteps, stride, guard):
    n = y0.shape[0]
    nsamples = nsteps // stride + 2
    times = np.empty(nsamples)
    states = np.empty((nsamples, n))
    y = y0.copy()
    tmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    times[0] = 0.0
    states[0, :] = y
    count = 1
    half = 0.5 * dt
    for step in range(nsteps):
        t = step * dt
        _rhs_kernel(y, t, m, d, omega, direct, k1)
        for i in range(n):
            tmp[i] = y[i] + half * k1[i]
        _rhs_kernel(tmp, t + half, m, d, omega, direct, k2)
        for i in range(n):
            tmp[i] = y[i] + half * k2[i]
        _rhs_kernel(tmp, t + half, m, d, omega, direct, k3)
        for i in range(n):
            tmp[i] = y[i] + dt * k3[i]
        _rhs_kernel(tmp, t + dt, m, d, omega, direct, k4)
        for i in range(n):
            y[i] = y[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t_next = (step + 1) * dt
        for i in range(n):
            if not math.isfinite(y[i]):
                return times[:count], states[:count], _NONFINITE, t_next, i
        for i in range(m, 2 * m):
            if abs(y[i]) > guard or abs(y[i + 2 * m]) > guard:
                times[count] = t_next
                states[count, :] = y
                return times[:count + 1], states[:count + 1], _GUARD, t_next, i
        if (step + 1) % stride == 0:
            times[count] = t_next
            states[count, :] = y
            count += 1
    return times[:count], states[:count], _OK, 0.0, -1


@njit(cache=True)
def _linear_rhs(psi, t, X, spins, omega, unitary, out):
    n = psi.shape[0]
    for j in range(n):
        acc = spins[j] * omega * psi[j]
        for l in range(n):
            x = X[j, l]
            if x != 0:
                if unitary:
                    ph = -(spins[j] - spins[l]) * omega * t
                    x = x * complex(math.cos(ph), math.sin(ph))
                acc += x * psi[l]
        out[j] = -1j * acc


@njit(cache=True)
def _recover(psi, t, spins, omega, prev, first, re_out, im_out):
    n = psi.shape[0]
    for j in range(n):
        ph = spins[j] * omega * t
        z = psi[j] * complex(math.cos(ph), math.sin(ph))
        r = abs(z)
        if r < 1e-200:
            return _UNDERFLOW, j
        ang = math.atan2(z.imag, z.real)
        unwrapped = ang + 2.0 * math.pi * round((prev[j] - ang) / (2.0 * math.pi))
        if not first and abs(unwrapped - prev[j]) > 0.5 * math.pi:
            return _BRANCH, j
        re_out[j] = unwrapped
        im_out[j] = -math.log(r)
    return _OK, -1


@njit(cache=True)
def _oracle_rk4(psi0, re0, X, spins, omega, unitary, dt, nsteps, stride):
    n = psi0.shape[0]
    nsamples = nsteps // stride + 1
    times = np.empty(nsamples)
    psis = np.empty((nsamples, n), dtype=np.complex128)
    res = np.empty((nsamples, n))
    ims = np.empty((nsamples, n))
    psi = psi0.copy()
    tmp = np.empty(n, dtype=np.complex128)
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    cur_re = re0.copy()
    cur_im = np.empty(n)
    status, comp = _recover(psi, 0.0, spins, omega, cur_re, True, cur_re, cur_im)
    times[0] = 0.0
    psis[0, :] = psi
    res[0, :] = cur_re
    ims[0, :] = cur_im
    if status != _OK:
        return times[:1], psis[:1], res[:1], ims[:1], status, 0.0, comp
    count = 1
    half = 0.5 * dt
    for step in range(nsteps):
        t = step * dt
        _linear_rhs(psi, t, X, spins, omega, unitary, k1)
        for i in range(n):
            tmp[i] = psi[i] + half * k1[i]
        _linear_rhs(tmp, t + half, X, spins, omega, unitary, k2)
        for i in range(n):
            tmp[i] = psi[i] + half * k2[i]
        _linear_rhs(tmp, t + half, X, spins, omega, unitary, k3)
        for i in range(n):
            tmp[i] = psi[i] + dt * k3[i]
        _linear_rhs(tmp, t + dt, X, spins, omega, unitary, k4)
        for i in range(n):
            psi[i] = psi[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t_next = (step + 1) * dt
        status, comp = _recover(psi, t_next, spins, omega, cur_re, False, cur_re, cur_im)
        if status != _OK:
            return times[:count], psis[:count], res[:count], ims[:count], status, t_next, comp
        if (step + 1) % stride == 0:
            times[count] = t_next
            psis[count, :] = psi
            res[count, :] = cur_re
            ims[count, :] = cur_im
            count += 1
    return times, psis, res, ims, _OK, 0.0, -1


@dataclass(frozen=True)
class Trajectory:
    """Sampled phase states.

    ``states[i]`` is the state vector at ``times[i]``. ``diverged`` marks a
    run halted by the overflow guard (its last sample is the halting state).
    ``psi`` holds the raw linear solution for oracle trajectories.
    """

    times: np.ndarray
    states: np.ndarray
    m: int
    meta: dict = field(default_factory=dict)
    diverged: bool = False
    halt_time: float | None = None
    psi: np.ndarray | None = None

    @property
    def labels(self) -> list[str]:
        return mode_labels(self.m)

    def __len__(self):
        return len(self.times)

    def _col(self, label: str, imag: bool) -> int:
        k, up = _parse_label(label, self.m)
        block = (0 if up else 2) + (1 if imag else 0)
        return block * self.m + k

    def re(self, label: str) -> np.ndarray:
        return self.states[:, self._col(label, False)]

    def im(self, label: str) -> np.ndarray:
        return self.states[:, self._col(label, True)]

    def state(self, i: int) -> PhaseState:
        return PhaseState.from_vector(self.states[i], float(self.times[i]))


def _check_variant(variant: str) -> bool:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant == "direct"


def rhs_unitary(state: PhaseState, d: float, omega: float = 0.0) -> PhaseState:
    """Time derivative of the phase state for the interaction-picture operator.

    ``omega`` is accepted for symmetry with :func:`rhs_direct`; the phase
    equations of this variant do not depend on it.
    """
    y = state.to_vector()
    out = np.empty_like(y)
    _rhs_kernel(y, float(state.t), state.m, float(d), float(omega), False, out)
    return PhaseState.from_vector(out, state.t)


def rhs_direct(state: PhaseState, d: float, omega: float, t: float | None = None) -> PhaseState:
    """Time derivative for the constant operator; depends on ``t`` via ``2 omega t``."""
    t = state.t if t is None else t
    y = state.to_vector()
    out = np.empty_like(y)
    _rhs_kernel(y, float(t), state.m, float(d), float(omega), True, out)
    return PhaseState.from_vector(out, t)


def _meta(model, variant, dt, stride, T, source):
    return {"omega": float(model.omega), "d": float(model.d), "m": model.m,
            "variant": variant, "dt": dt, "stride": stride, "T": T,
            "integrator": "rk4-fixed", "source": source}


def integrate_phases(model: JordanBlockModel, variant: str = "direct",
                     initial: PhaseState | None = None, dt: float = 1e-3,
                     T: float = 1000.0, stride: int = 100,
                     guard: float = OVERFLOW_GUARD) -> Trajectory:
    """RK4 integration of the phase equations.

    Stops early, with ``diverged=True``, once any ``|Im delta|`` exceeds
    ``guard``. Raises :class:`PhaseIntegrationError` on NaN/Inf.
    """
    direct = _check_variant(variant)
    initial = PhaseState.zeros(model.m) if initial is None else initial
    if initial.m != model.m:
        raise ValueError(f"initial state has m={initial.m}, model has m={model.m}")
    y0 = initial.to_vector()
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial phase state must be finite")
    nsteps = step_count(dt, T)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    times, states, status, t_fail, comp = _phase_rk4(
        y0, model.m, float(model.d), float(model.omega), direct, float(dt),
        nsteps, int(stride), float(guard))
    if status == _NONFINITE:
        label = _state_component_name(comp, model.m)
        raise PhaseIntegrationError(f"non-finite {label} at t={t_fail:.6g}", t_fail, label)
    return Trajectory(times.copy(), states.copy(), model.m,
                      _meta(model, variant, dt, stride, T, "phase"),
                      diverged=status == _GUARD,
                      halt_time=t_fail if status == _GUARD else None)


def _state_component_name(i: int, m: int) -> str:
    block, k = divmod(i, m)
    part = ("Re", "Im", "Re", "Im")[block]
    spin = "u" if block < 2 else "d"
    return f"{part}_d{k + 1}{spin}"


def integrate_psi_oracle(model: JordanBlockModel, variant: str = "direct",
                         psi0=None, dt: float = 1e-3, T: float = 20.0,
                         stride: int = 100, initial_re=None) -> Trajectory:
    """Integrate the linear ``2m`` system and recover phases from it.

    ``Re delta`` is the argument of ``psi e^{+-i omega t}``, unwrapped to the
    branch nearest the previous step; ``Im delta = -ln|psi|``.
    ``initial_re`` fixes the branch at ``t = 0`` (defaults to the principal
    argument of ``psi0``).
    """
    unitary = not _check_variant(variant)
    m = model.m
    psi0 = np.ones(2 * m, dtype=complex) if psi0 is None else np.asarray(psi0, dtype=complex)
    if psi0.shape != (2 * m,):
        raise ValueError(f"psi0 must have length {2 * m}")
    re0 = np.angle(psi0) if initial_re is None else np.asarray(initial_re, dtype=float)
    nsteps = step_count(dt, T)
    X = _coupling(model)
    spins = _spins(m)
    times, psis, res, ims, status, t_fail, comp = _oracle_rk4(
        psi0, re0, X, spins, float(model.omega), unitary, float(dt), nsteps, int(stride))
    if status != _OK:
        label = mode_labels(m)[comp]
        reason = {_UNDERFLOW: "amplitude underflow (phase undefined)",
                  _BRANCH: "phase step exceeds pi/2; reduce dt"}[status]
        raise PhaseIntegrationError(f"{reason} for {label} at t={t_fail:.6g}", t_fail, label)
    states = np.concatenate((res[:, 0::2], ims[:, 0::2], res[:, 1::2], ims[:, 1::2]), axis=1)
    return Trajectory(times.copy(), states, m,
                      _meta(model, variant, dt, stride, T, "oracle"), psi=psis.copy())


def oracle_from_state(model: JordanBlockModel, variant: str, initial: PhaseState,
                      **kwargs) -> Trajectory:
    """Oracle run started from the same phase state as :func:`integrate_phases`."""
    re0 = np.empty(2 * model.m)
    re0[0::2], re0[1::2] = initial.re_up, initial.re_dn
    return integrate_psi_oracle(model, variant, initial.to_psi(), initial_re=re0, **kwargs)


def amplitudes(traj: Trajectory, guard: float = OVERFLOW_GUARD):
    """``|psi_k| = exp(-Im delta_k)`` per mode.

    Returns ``(values, saturated)``: dicts keyed by mode label. Exponents
    beyond ``guard`` are clamped and reported as saturated.
    """
    values, saturated = {}, {}
    for label in traj.labels:
        expo = -traj.im(label)
        sat = expo > guard
        values[label] = np.exp(np.minimum(expo, guard))
        saturated[label] = bool(np.any(sat))
    return values, saturated
