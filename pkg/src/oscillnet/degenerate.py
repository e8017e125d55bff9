"""Analytic Jordan-block oscillation model and its Pauli extension.

A degenerate block ``Omega_J = omega*I + d*I + N`` (``N`` the superdiagonal
nilpotent) is doubled into up/down states by Kronecker products with the
Pauli matrices so that the three parts pairwise anticommute and the square of
their sum has no cross terms. Identities are checked on concrete instances in
exact arithmetic whenever ``omega`` and ``d`` are integers or fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from numbers import Integral, Rational

import numpy as np
from scipy.linalg import expm

FLOAT_TOL = 1e-12


def _is_exact(x) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


@dataclass(frozen=True)
class GaussianMatrix:
    """Complex matrix held as separate real and imaginary parts.

    With ``object`` dtype entries (Python ints / Fractions) every operation
    is exact; with ``float`` dtype it is ordinary floating point.
    """

    re: np.ndarray
    im: np.ndarray

    @classmethod
    def real(cls, a) -> "GaussianMatrix":
        a = np.asarray(a)
        return cls(a, np.zeros_like(a))

    @property
    def shape(self):
        return self.re.shape

    @property
    def exact(self) -> bool:
        return self.re.dtype == object

    def __add__(self, other):
        return GaussianMatrix(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return GaussianMatrix(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return GaussianMatrix(-self.re, -self.im)

    def __matmul__(self, other):
        return GaussianMatrix(self.re @ other.re - self.im @ other.im,
                              self.re @ other.im + self.im @ other.re)

    def kron(self, other) -> "GaussianMatrix":
        return GaussianMatrix(np.kron(self.re, other.re) - np.kron(self.im, other.im),
                              np.kron(self.re, other.im) + np.kron(self.im, other.re))

    def scale(self, c) -> "GaussianMatrix":
        return GaussianMatrix(self.re * c, self.im * c)

    def trace(self):
        return sum(np.diagonal(self.re).tolist(), 0), sum(np.diagonal(self.im).tolist(), 0)

    def is_zero(self) -> bool:
        return not (np.any(self.re != 0) or np.any(self.im != 0))

    def max_abs(self) -> float:
        if self.re.size == 0:
            return 0.0
        return max(math.hypot(float(a), float(b))
                   for a, b in zip(self.re.ravel().tolist(), self.im.ravel().tolist()))

    def to_complex(self) -> np.ndarray:
        return self.re.astype(float) + 1j * self.im.astype(float)

    def __eq__(self, other):
        if not isinstance(other, GaussianMatrix) or self.shape != other.shape:
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None


def _identity(m: int, exact: bool) -> np.ndarray:
    if exact:
        I = np.zeros((m, m), dtype=object)
        I[:] = 0
        for k in range(m):
            I[k, k] = 1
        return I
    return np.eye(m)


def _zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        z = np.empty(shape, dtype=object)
        z[...] = 0
        return z
    return np.zeros(shape)


_PAULI_PARTS = {
    1: (((0, 1), (1, 0)), ((0, 0), (0, 0))),
    2: (((0, 0), (0, 0)), ((0, -1), (1, 0))),
    3: (((1, 0), (0, -1)), ((0, 0), (0, 0))),
}


def _pauli_exact(i: int, exact: bool = True) -> GaussianMatrix:
    if i not in _PAULI_PARTS:
        raise ValueError(f"Pauli index must be 1, 2 or 3, got {i!r}")
    re, im = _PAULI_PARTS[i]
    dtype = object if exact else float
    return GaussianMatrix(np.array(re, dtype=dtype), np.array(im, dtype=dtype))


def pauli(i: int) -> np.ndarray:
    """``sigma_1``, ``sigma_2`` or ``sigma_3`` as a complex 2x2 array."""
    return _pauli_exact(i).to_complex()


@dataclass(frozen=True)
class JordanBlockModel:
    """Degenerate block with base frequency ``omega``, shift ``d``, size ``m``.

    ``omega + d`` is the eigenfrequency of the degenerate mode.
    """

    omega: float = 0
    d: float = 1
    m: int = 3

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ValueError(f"block size m must be an integer >= 1, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        for name in ("omega", "d"):
            v = getattr(self, name)
            if not math.isfinite(float(v)):
                raise ValueError(f"{name} must be finite, got {v!r}")

    @property
    def exact(self) -> bool:
        return _is_exact(self.omega) and _is_exact(self.d)

    def _num(self, v):
        if not self.exact:
            return float(v)
        # plain ints are exact and far cheaper than Fractions in object arrays
        return int(v) if isinstance(v, Integral) else Fraction(v)


@dataclass(frozen=True)
class OperatorTriple:
    """``Omega_J = omega0 + diag_part + nilpotent_part`` (all m x m)."""

    omega0: np.ndarray
    diag_part: np.ndarray
    nilpotent_part: np.ndarray

    @property
    def jordan(self) -> np.ndarray:
        return self.omega0 + self.diag_part + self.nilpotent_part


def build_triple(model: JordanBlockModel) -> OperatorTriple:
    m, exact = model.m, model.exact
    I = _identity(m, exact)
    N = _zeros((m, m), exact)
    for k in range(m - 1):
        N[k, k + 1] = 1
    return OperatorTriple(I * model._num(model.omega), I * model._num(model.d), N)


def nilpotency_index(N: np.ndarray) -> int:
    """Smallest ``k`` with ``N**k == 0`` (``-1`` if none up to ``n``)."""
    P = N.copy()
    for k in range(1, N.shape[0] + 1):
        if not np.any(P != 0):
            return k
        P = P @ N
    return -1


@dataclass(frozen=True)
class ExtendedTriple:
    """Pauli-extended parts, each ``2m x 2m``: ``Om0 x s3``, ``OmId x s1``, ``OmIa x s2``."""

    hat0: GaussianMatrix
    hat_d: GaussianMatrix
    hat_a: GaussianMatrix

    @property
    def total(self) -> GaussianMatrix:
        return self.hat0 + self.hat_d + self.hat_a

    def parts(self) -> dict[str, GaussianMatrix]:
        return {"0": self.hat0, "d": self.hat_d, "a": self.hat_a}


def pauli_extend(triple: OperatorTriple) -> ExtendedTriple:
    """Kronecker extension with (block x Pauli) factor order.

    The resulting basis is interleaved ``(1u, 1d, 2u, 2d, ...)``.
    """
    exact = triple.omega0.dtype == object
    s1, s2, s3 = (_pauli_exact(i, exact) for i in (1, 2, 3))
    return ExtendedTriple(
        GaussianMatrix.real(triple.omega0).kron(s3),
        GaussianMatrix.real(triple.diag_part).kron(s1),
        GaussianMatrix.real(triple.nilpotent_part).kron(s2),
    )


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_deviation: float
    exact: bool
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        mode = "exact" if self.exact else f"tol={self.tol:g}"
        return f"{self.name}\t{self.max_deviation:.3e}\t{mode}\t{status}"


def _check(name: str, diff: GaussianMatrix) -> CheckResult:
    if diff.exact:
        return CheckResult(name, 0.0 if diff.is_zero() else diff.max_abs(), True)
    return CheckResult(name, diff.max_abs(), False, FLOAT_TOL)


def anticommutator_checks(ext: ExtendedTriple) -> list[CheckResult]:
    """``{A, B} = AB + BA`` for each pair of extended parts."""
    out = []
    for (na, a), (nb, b) in combinations(ext.parts().items(), 2):
        out.append(_check(f"anticommutator[{na},{nb}]", a @ b + b @ a))
    return out


def verify_square_identity(ext: ExtendedTriple) -> CheckResult:
    """Deviation between ``(sum of parts)^2`` and the sum of the squares."""
    total = ext.total
    lhs = total @ total
    rhs = ext.hat0 @ ext.hat0 + ext.hat_d @ ext.hat_d + ext.hat_a @ ext.hat_a
    return _check("square_identity", lhs - rhs)


@dataclass(frozen=True)
class ExtendedOperator:
    entries: np.ndarray
    time_dependent: bool
    omega: float
    d: float
    m: int
    variant: str
    t: float | None = None


def _coupling(model: JordanBlockModel) -> np.ndarray:
    ext = pauli_extend(build_triple(model))
    return (ext.hat_d + ext.hat_a).to_complex()


def _spins(m: int) -> np.ndarray:
    """+1 for up, -1 for down components in the interleaved basis."""
    return np.tile([1.0, -1.0], m)


def build_direct_operator(model: JordanBlockModel) -> ExtendedOperator:
    """Constant ``2m x 2m`` operator ``hat0 + hat_d + hat_a``."""
    ext = pauli_extend(build_triple(model))
    return ExtendedOperator(ext.total.to_complex(), False, model.omega, model.d,
                            model.m, "direct")


def unitary_phases(omega: float, m: int, t: float, sign: int = 1) -> np.ndarray:
    """Diagonal of ``Psi0(t) = exp(-+ i hat0 t)`` in the interleaved basis."""
    return np.exp(-1j * sign * float(omega) * _spins(m) * t)


def build_unitary_operator(model: JordanBlockModel, t: float, sign: int = 1) -> ExtendedOperator:
    """Interaction-picture operator ``hat0 + Psi0(t) (hat_d + hat_a) Psi0(-t)``.

    For the upper sign the up-down couplings pick up ``exp(-2 i omega t)``
    above the diagonal and ``exp(+2 i omega t)`` below it.
    """
    ext = pauli_extend(build_triple(model))
    X = (ext.hat_d + ext.hat_a).to_complex()
    p = unitary_phases(model.omega, model.m, t, sign)
    M = ext.hat0.to_complex() + (p[:, None] * X) * np.conj(p)[None, :]
    return ExtendedOperator(M, True, model.omega, model.d, model.m, "unitary", t)


@dataclass(frozen=True)
class InvarianceReport:
    commutation: float
    psi0_at_zero: float
    psi0_inverse: float
    product_solution: float
    tol: float = FLOAT_TOL

    @property
    def passed(self) -> bool:
        return max(self.commutation, self.psi0_at_zero, self.psi0_inverse,
                   self.product_solution) <= self.tol

    def checks(self) -> list[CheckResult]:
        return [
            CheckResult("unitary_commutation", self.commutation, False, self.tol),
            CheckResult("psi0_identity_at_zero", self.psi0_at_zero, False, self.tol),
            CheckResult("psi0_inverse", self.psi0_inverse, False, self.tol),
            CheckResult("product_form_solution", self.product_solution, False, self.tol),
        ]


def verify_unitary_invariance(model: JordanBlockModel, psi0=None, T: float = 1.0,
                              samples: int = 11, sign: int = 1) -> InvarianceReport:
    """Check invariance of the m-dimensional equation under ``Psi0(t)``.

    ``Psi0(t) = exp(-+ i Omega0 t)`` is a multiple of the identity, so it
    commutes with ``Omega_J``. The product ``Psi0(t) psi_I(t)``, with
    ``psi_I`` solving the interaction equation, must reproduce the direct
    solution ``exp(-+ i Omega_J t) psi0``.
    """
    tr = build_triple(model)
    J = tr.jordan.astype(float)
    Om0 = tr.omega0.astype(float)
    OmI = (tr.diag_part + tr.nilpotent_part).astype(float)
    m = model.m
    psi0 = np.ones(m, dtype=complex) if psi0 is None else np.asarray(psi0, dtype=complex)

    def Psi0(t):
        return expm(-1j * sign * Om0 * t)

    I = np.eye(m)
    comm = inv = prod = 0.0
    for t in np.linspace(0.0, T, samples):
        P, Pm = Psi0(t), Psi0(-t)
        comm = max(comm, np.max(np.abs(P @ J @ Pm - J)))
        inv = max(inv, np.max(np.abs(P @ Pm - I)))
        interaction = Pm @ OmI @ P
        psi_I = expm(-1j * sign * interaction * t) @ psi0
        direct = expm(-1j * sign * J * t) @ psi0
        prod = max(prod, np.max(np.abs(P @ psi_I - direct)))
    at_zero = float(np.max(np.abs(Psi0(0.0) - I)))
    return InvarianceReport(float(comm), at_zero, float(inv), float(prod))


@dataclass(frozen=True)
class AppendixReport:
    matrix: np.ndarray
    square: np.ndarray
    permutation: tuple[int, ...]
    permuted_square: np.ndarray
    expected_square: np.ndarray
    expected_permuted: np.ndarray
    square_rank: int
    cube_is_zero: bool

    @property
    def passed(self) -> bool:
        return (np.array_equal(self.square, self.expected_square)
                and np.array_equal(self.permuted_square, self.expected_permuted))


def _exact_rank(A: np.ndarray) -> int:
    """Rank by fraction-exact Gaussian elimination."""
    M = [[Fraction(x) for x in row] for row in A.tolist()]
    rank, rows = 0, len(M)
    cols = len(M[0]) if rows else 0
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if M[r][c] != 0), None)
        if pivot is None:
            continue
        M[rank], M[pivot] = M[pivot], M[rank]
        for r in range(rows):
            if r != rank and M[r][c] != 0:
                f = M[r][c] / M[rank][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[rank])]
        rank += 1
    return rank


def appendix_square_permutation_check(omegas=(2, 3)) -> AppendixReport:
    """Square a nilpotent 3-chain at 0 plus ``diag(omegas)`` and reorder it.

    The square has a single 1 at (0, 2); swapping basis vectors 1 and 2
    brings it to ``[[0, 1], [0, 0]] (+) [0] (+) diag(omega_i^2)``, a Jordan
    form with a 2-chain at eigenvalue 0.
    """
    omegas = [Fraction(w) if _is_exact(w) else w for w in omegas]
    n = 3 + len(omegas)
    A = _zeros((n, n), True)
    A[0, 1] = A[1, 2] = 1
    for k, w in enumerate(omegas):
        A[3 + k, 3 + k] = w
    S = A @ A

    expected_sq = _zeros((n, n), True)
    expected_sq[0, 2] = 1
    expected_perm = _zeros((n, n), True)
    expected_perm[0, 1] = 1
    for k, w in enumerate(omegas):
        expected_sq[3 + k, 3 + k] = w * w
        expected_perm[3 + k, 3 + k] = w * w

    perm = (0, 2, 1) + tuple(range(3, n))
    idx = np.array(perm)
    P = S[np.ix_(idx, idx)]
    nil = A[:3, :3]
    cube_zero = not np.any((nil @ nil @ nil) != 0)
    return AppendixReport(A, S, perm, P, expected_sq, expected_perm,
                          _exact_rank(nil @ nil), cube_zero)


def characteristic_polynomial(M: GaussianMatrix) -> list[complex]:
    """Coefficients of ``det(lambda I - M)``, highest power first.

    Faddeev-LeVerrier recursion; exact when ``M`` holds ints/Fractions.
    """
    n = M.shape[0]
    exact = M.exact
    I = _identity(n, exact)
    coeffs = [(1, 0)]
    Mk = GaussianMatrix.real(_zeros((n, n), exact))
    for k in range(1, n + 1):
        c_re, c_im = coeffs[-1]
        Mk = M @ Mk + GaussianMatrix(I * c_re, I * c_im)
        tr_re, tr_im = (M @ Mk).trace()
        if exact:
            coeffs.append((-Fraction(tr_re) / k, -Fraction(tr_im) / k))
        else:
            coeffs.append((-tr_re / k, -tr_im / k))
    return [complex(float(a), float(b)) for a, b in coeffs]


def model_checks(model: JordanBlockModel) -> list[CheckResult]:
    """Every algebraic identity for one ``(omega, d, m)`` instance."""
    tr = build_triple(model)
    exact = model.exact
    results = []
    idx = nilpotency_index(tr.nilpotent_part)
    results.append(CheckResult("nilpotent_power_m", 0.0 if idx == model.m else 1.0, True))
    recon = GaussianMatrix.real(tr.omega0 + tr.diag_part + tr.nilpotent_part)
    expected = _zeros((model.m, model.m), exact)
    for k in range(model.m):
        expected[k, k] = model._num(model.omega) + model._num(model.d)
        if k + 1 < model.m:
            expected[k, k + 1] = 1
    results.append(_check("triple_sum", recon - GaussianMatrix.real(expected)))
    ext = pauli_extend(tr)
    results.extend(anticommutator_checks(ext))
    results.append(verify_square_identity(ext))
    return results
