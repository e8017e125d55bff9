"""Dense spectra of small Laplacians and the square-root operator ``H``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SpectralError(ValueError):
    """Input is outside what a spectral routine supports."""


class ConvergenceError(SpectralError):
    """The dense eigensolver failed to converge."""


class NonRealSpectrumError(SpectralError):
    pass


class NotDiagonalizableError(SpectralError):
    pass


class NegativeEigenvalueError(SpectralError):
    pass


DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class Cluster:
    value: complex
    multiplicity: int
    indices: tuple[int, ...]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (sorted by real part), eigenvectors and degeneracy info.

    ``eigenvectors[:, k]`` belongs to ``eigenvalues[k]``. ``clusters`` groups
    eigenvalues that lie within ``tol`` of a neighbour (single linkage).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: tuple[Cluster, ...]
    is_real: bool
    is_diagonalizable: bool
    tol: float

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def multiplicities(self) -> list[tuple[complex, int]]:
        return [(c.value, c.multiplicity) for c in self.clusters]

    @property
    def zero_multiplicity(self) -> int:
        """Size of the cluster containing eigenvalue 0 (0 if there is none)."""
        for c in self.clusters:
            if min(abs(self.eigenvalues[i]) for i in c.indices) < self.tol:
                return c.multiplicity
        return 0


def _cluster(values: np.ndarray, tol: float) -> tuple[Cluster, ...]:
    n = len(values)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        for b in range(a + 1, n):
            if abs(values[a] - values[b]) < tol:
                parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    clusters = []
    for idx in sorted(groups.values(), key=lambda g: g[0]):
        center = complex(np.mean(values[idx]))
        clusters.append(Cluster(center, len(idx), tuple(idx)))
    return tuple(clusters)


def eigendecompose(L, tol: float = DEFAULT_TOL, rank_tol: float = 1e-8) -> Spectrum:
    """Dense eigendecomposition of a small square matrix.

    Parameters
    ----------
    L : array_like, shape (n, n)
        Laplacian (or any square matrix).
    tol : float
        Clustering distance and the threshold below which imaginary parts
        count as zero.
    rank_tol : float
        The eigenvector matrix is treated as singular (matrix defective) when
        its smallest-to-largest singular value ratio falls below this.
    """
    A = np.asarray(L)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise SpectralError(f"expected a non-empty square matrix, got shape {A.shape}")
    try:
        if np.isrealobj(A) and np.array_equal(A, A.T):
            w, V = np.linalg.eigh(A)
            w = w.astype(complex)
        else:
            w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    order = np.lexsort((w.imag, w.real))
    w, V = w[order], V[:, order]
    s = np.linalg.svd(V, compute_uv=False)
    diagonalizable = bool(s[-1] > rank_tol * s[0])
    return Spectrum(
        eigenvalues=w,
        eigenvectors=V,
        clusters=_cluster(w, tol),
        is_real=bool(np.all(np.abs(w.imag) < tol)),
        is_diagonalizable=diagonalizable,
        tol=tol,
    )


@dataclass(frozen=True)
class GerschgorinResult:
    discs: tuple[tuple[float, float], ...]  # (center, radius) per row
    nonnegative: bool

    def __bool__(self):
        return self.nonnegative


def gerschgorin_nonnegative_real_part(L, tol: float = 0.0) -> GerschgorinResult:
    """Gerschgorin discs of ``L`` and whether all lie in ``Re >= 0``.

    Radii use ``math.fsum``, so for a Laplacian from :func:`build_laplacian`
    each disc is tangent to 0 exactly.
    """
    A = np.asarray(L)
    discs = []
    for i in range(A.shape[0]):
        radius = math.fsum(abs(A[i, j]) for j in range(A.shape[1]) if j != i)
        discs.append((complex(A[i, i]).real, radius))
    ok = all(c - r >= -tol for c, r in discs)
    return GerschgorinResult(tuple(discs), ok)


@dataclass(frozen=True)
class SqrtOperator:
    """``H`` with ``H @ H ~= L``; ``residual`` is ``max|H H - L|``."""

    entries: np.ndarray
    residual: float


def sqrt_psd(L, tol: float = DEFAULT_TOL) -> SqrtOperator:
    """Principal square root ``H = P diag(sqrt(lam)) P^-1``.

    Raises
    ------
    NonRealSpectrumError, NotDiagonalizableError, NegativeEigenvalueError
        Defective inputs have no square root of this form; build the
        analytic Jordan-block operators instead.
    """
    A = np.asarray(L)
    spec = eigendecompose(A, tol)
    if not spec.is_real:
        raise NonRealSpectrumError("spectrum has non-real eigenvalues")
    if not spec.is_diagonalizable:
        raise NotDiagonalizableError("matrix is not diagonalizable")
    lam = spec.eigenvalues.real
    if np.any(lam < -tol):
        raise NegativeEigenvalueError(f"negative eigenvalue {lam.min():.3g}")
    root = np.sqrt(np.clip(lam, 0.0, None))
    P = spec.eigenvectors
    if np.isrealobj(A) and np.array_equal(A, A.T):
        H = (P * root) @ P.T
    else:
        H = (P * root) @ np.linalg.inv(P)
    H = H.astype(complex)
    residual = float(np.max(np.abs(H @ H - A))) if A.size else 0.0
    return SqrtOperator(H, residual)
