import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from oracles import random_symmetric_edges
from oscillnet.graph import WeightedDigraph, build_laplacian
from oscillnet.integrate import StepSizeError
from oscillnet.oscillator import (
    integrate_wave_direct,
    oscillation_energy,
    solve_fundamental,
    solve_mode_exact,
    wave_spectral,
)
from oscillnet.spectral import (
    NonRealSpectrumError,
    NotDiagonalizableError,
    eigendecompose,
    sqrt_psd,
)

TWO_NODE = np.array([[1.0, -1.0], [-1.0, 1.0]])


class TestWaveDirect:
    def test_no_force(self):
        x0 = np.array([0.3, -2.0, 5.0])
        tr = integrate_wave_direct(np.zeros((3, 3)), x0, np.zeros(3), dt=1e-2, T=5)
        assert np.all(tr.x == x0)

    def test_two_node_closed_form(self):
        tr = integrate_wave_direct(TWO_NODE, [1.0, -1.0], [0.0, 0.0], dt=1e-3, T=10, stride=10)
        c = np.cos(np.sqrt(2) * tr.times)
        assert np.max(np.abs(tr.x[:, 0] - c)) < 1e-10
        assert np.max(np.abs(tr.x[:, 1] + c)) < 1e-10

    def test_constant_vector_is_stationary(self):
        rng = np.random.default_rng(0)
        L = build_laplacian(WeightedDigraph(5, random_symmetric_edges(rng, 5, p=0.8)))
        tr = integrate_wave_direct(L, np.full(5, 2.5), np.zeros(5), dt=1e-2, T=5)
        assert np.max(np.abs(tr.x - 2.5)) < 1e-13

    def test_step_rejection(self):
        L = 100.0 * TWO_NODE  # max frequency sqrt(200) ~ 14.1
        with pytest.raises(StepSizeError):
            integrate_wave_direct(L, [1, 0], [0, 0], dt=0.21, T=1)
        integrate_wave_direct(L, [1, 0], [0, 0], dt=0.19, T=1)

    def test_energy_conserved(self):
        rng = np.random.default_rng(7)
        L = build_laplacian(WeightedDigraph(6, random_symmetric_edges(rng, 6, p=0.6)))
        tr = integrate_wave_direct(L, rng.normal(size=6), rng.normal(size=6), dt=1e-3, T=100,
                                   stride=1000)
        E = oscillation_energy(L, tr.x, tr.v)
        assert np.max(np.abs(E - E[0])) / E[0] < 1e-3

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            integrate_wave_direct(TWO_NODE, [1, 2, 3], [0, 0], dt=1e-2, T=1)


class TestModeSolutions:
    def test_zero_mode_constant(self):
        s = eigendecompose(np.zeros((1, 1)))
        assert solve_mode_exact(s, [3 + 1j], 17.0)[0] == 3 + 1j

    def test_closed_form_lambda4(self):
        s = eigendecompose(np.array([[4.0]]))
        phi = solve_mode_exact(s, [1.0], math.pi / 2, sign=1)
        assert abs(phi[0] - (-1)) < 1e-15

    def test_sign_branch(self):
        s = eigendecompose(np.array([[1.0]]))
        assert np.isclose(solve_mode_exact(s, [1.0], 0.5, sign=-1)[0], np.exp(0.5j))
        with pytest.raises(ValueError):
            solve_mode_exact(s, [1.0], 0.5, sign=0)

    def test_two_node_basis_transform_matches_direct(self):
        s = eigendecompose(TWO_NODE)
        x0, v0 = np.array([0.7, -0.2]), np.array([0.1, 0.4])
        tr = integrate_wave_direct(TWO_NODE, x0, v0, dt=1e-3, T=10, stride=100)
        assert np.max(np.abs(wave_spectral(s, x0, v0, tr.times) - tr.x)) < 1e-9
        # mode-space check: phi(t) = P^-1 x(t) oscillates as cos / sin of sqrt(lambda)
        phi = np.linalg.solve(s.eigenvectors, tr.x.T).T
        phi0 = np.linalg.solve(s.eigenvectors, x0)
        w = np.sqrt(np.clip(s.eigenvalues.real, 0, None))
        dphi0 = np.linalg.solve(s.eigenvectors, v0)
        ref = np.where(w > 0, np.cos(np.outer(tr.times, w)) * phi0
                       + np.sin(np.outer(tr.times, w)) / np.where(w > 0, w, 1) * dphi0,
                       phi0 + np.outer(tr.times, np.ones(2)) * dphi0)
        assert np.max(np.abs(phi - ref)) < 1e-9

    def test_refuses_non_real(self):
        L = build_laplacian(WeightedDigraph(3, [(0, 1, 1), (1, 2, 1), (2, 0, 1)]))
        with pytest.raises(NonRealSpectrumError):
            solve_mode_exact(eigendecompose(L), np.ones(3), 1.0)

    def test_refuses_defective(self):
        L = build_laplacian(WeightedDigraph(3, [(0, 1, 1), (1, 2, 1)]))
        with pytest.raises(NotDiagonalizableError):
            wave_spectral(eigendecompose(L), np.ones(3), np.zeros(3), [0.0, 1.0])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_spectral_vs_rk4_random_graphs(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        L = build_laplacian(WeightedDigraph(n, random_symmetric_edges(rng, n, p=0.5)))
        x0, v0 = rng.normal(size=n), rng.normal(size=n)
        tr = integrate_wave_direct(L, x0, v0, dt=1e-3, T=10, stride=500)
        assert np.max(np.abs(wave_spectral(eigendecompose(L), x0, v0, tr.times) - tr.x)) < 1e-6


class TestFundamental:
    def test_zero_operator(self):
        tr = solve_fundamental(np.zeros((2, 2)), [1.0, 2.0], dt=1e-2, T=3)
        assert np.all(tr.x == np.array([1.0, 2.0]))

    def test_identity_scalar(self):
        tr = solve_fundamental(np.eye(1), [1.0], dt=math.pi / 4000, T=math.pi, stride=4000)
        assert tr.times[-1] == pytest.approx(math.pi)
        assert abs(tr.x[-1, 0] - (-1)) < 1e-11
        assert tr.meta["sign"] == 1

    def test_matches_mode_magnitudes(self):
        s = eigendecompose(TWO_NODE)
        H = sqrt_psd(TWO_NODE)
        x0 = np.array([1.0, 0.3])
        tr = solve_fundamental(H, x0, dt=1e-3, T=5, stride=100)
        phi0 = np.linalg.solve(s.eigenvectors, x0)
        for t, x in zip(tr.times, tr.x):
            phi = np.linalg.solve(s.eigenvectors, x)
            assert np.allclose(np.abs(phi), np.abs(solve_mode_exact(s, phi0, t)), atol=1e-10)
            assert np.allclose(phi, solve_mode_exact(s, phi0, t), atol=1e-10)

    @pytest.mark.parametrize("sign", [1, -1])
    def test_matches_matrix_exponential(self, sign):
        rng = np.random.default_rng(11)
        L = build_laplacian(WeightedDigraph(5, random_symmetric_edges(rng, 5, p=0.7)))
        H = sqrt_psd(L)
        x0 = rng.normal(size=5)
        tr = solve_fundamental(H, x0, dt=1e-3, T=4, stride=1000, sign=sign)
        for t, x in zip(tr.times, tr.x):
            assert np.allclose(x, expm(-1j * sign * H.entries * t) @ x0, atol=1e-10)

    def test_second_derivative_satisfies_wave_equation(self):
        rng = np.random.default_rng(5)
        L = build_laplacian(WeightedDigraph(4, random_symmetric_edges(rng, 4, p=0.9)))
        H = sqrt_psd(L)
        dt = 1e-3
        tr = solve_fundamental(H, rng.normal(size=4), dt=dt, T=2)
        x = tr.x.real
        second = (x[2:] - 2 * x[1:-1] + x[:-2]) / dt**2
        assert np.max(np.abs(second + x[1:-1] @ L.T)) < 1e-4

    def test_step_rejection(self):
        with pytest.raises(StepSizeError):
            solve_fundamental(10 * np.eye(2), [1, 1], dt=0.3, T=1)
