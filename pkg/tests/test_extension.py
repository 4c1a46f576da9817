"""Weighted half-space extension and its Neumann trace."""

import numpy as np
import pytest

from sqgdiag.extension import (
    ExtensionField,
    calibrate_dtn_constant,
    dtn_constant_analytic,
    extend,
    extension_profile,
    extension_profile_ode,
    grid_k_max,
    neumann_trace,
    trace_ladder,
    weighted_dirichlet_energy,
    weighted_z_integral,
)
from sqgdiag.spectral import (
    Grid,
    ScalarField,
    fractional_laplacian,
    l2_norm,
    random_band_limited,
    sobolev_norm,
)


@pytest.fixture
def grid():
    return Grid(64)


class TestProfile:
    def test_poisson_limit(self):
        s = np.linspace(0.0, 10.0, 101)
        assert np.max(np.abs(extension_profile(s, 0.0) - np.exp(-s))) < 1e-12

    def test_boundary_value(self):
        for eps in (0.0, 0.1, 0.5):
            assert extension_profile(np.array([0.0]), eps)[0] == 1.0

    def test_bessel_and_ode_routes_agree(self):
        # the contract requires the two independent evaluations to agree
        # to 1e-8; the ODE route starts from large-s asymptotics and is
        # normalized by Richardson extrapolation at the origin
        s = np.array([0.25, 0.5, 1.0, 2.0, 5.0])
        for eps in (0.0, 0.05, 0.1, 0.3):
            a = extension_profile(s, eps)
            b = extension_profile_ode(s, eps)
            assert np.max(np.abs(a - b)) <= 1e-8

    @pytest.mark.parametrize("eps", [0.0, 0.05, 0.1, 0.3])
    def test_strictly_decreasing(self, eps):
        s = np.linspace(0.0, 12.0, 400)
        phi = extension_profile(s, eps)
        assert np.all(np.diff(phi) < 0.0)

    def test_epsilon_validated(self):
        with pytest.raises(ValueError):
            extension_profile(np.array([1.0]), 1.0)
        with pytest.raises(ValueError):
            extension_profile(np.array([1.0]), -0.1)


class TestExtend:
    def test_boundary_level_is_input(self, grid):
        theta = random_band_limited(grid, 5, [31, 0, 0])
        ext = extend(theta, trace_ladder(grid), 0.1)
        assert np.max(np.abs(ext.values[0] - theta.values)) < 1e-12

    def test_single_mode_profile_value(self, grid):
        # extension of sin(x1) sampled at z = 1 is phi_eps(1) sin(x1),
        # cross-checked against the independent ODE integration
        x1, _ = grid.coordinates()
        theta = ScalarField(grid, np.sin(x1))
        eps = 0.1
        z = np.array([0.0, 0.5, 1.0])
        ext = extend(theta, z, eps)
        phi1_ode = extension_profile_ode(np.array([1.0]), eps)[0]
        assert np.max(np.abs(ext.values[2] - phi1_ode * np.sin(x1))) <= 1e-8

    @pytest.mark.parametrize("eps", [0.0, 0.05, 0.1, 0.3])
    def test_maximum_principle(self, grid, eps):
        theta = random_band_limited(grid, 8, [32, 0, 0])
        z = np.unique(np.concatenate([trace_ladder(grid), np.linspace(0, 2, 21)]))
        ext = extend(theta, z, eps)
        assert ext.max_principle_defect() <= 1e-10

    def test_epsilon_range(self, grid):
        theta = random_band_limited(grid, 4, [33, 0, 0])
        with pytest.raises(ValueError):
            extend(theta, trace_ladder(grid), 1.0)

    def test_z_levels_validated(self, grid):
        theta = random_band_limited(grid, 4, [34, 0, 0])
        with pytest.raises(ValueError):
            extend(theta, np.array([0.1, 0.2]), 0.0)  # must start at 0


class TestNeumannTrace:
    def test_poisson_trace_of_sine(self, grid):
        # classical Dirichlet-to-Neumann of order one: the calibrated
        # constant is -1 and the trace of the extension of sin is -sin
        x1, _ = grid.coordinates()
        theta = ScalarField(grid, np.sin(x1))
        ext = extend(theta, trace_ladder(grid), 0.0)
        trace = neumann_trace(ext)
        d0 = calibrate_dtn_constant(grid, 0.0)
        assert d0 == pytest.approx(-1.0, abs=1e-9)
        assert np.max(np.abs(trace.values + np.sin(x1))) < 1e-8

    def test_constant_mode_trace_vanishes(self, grid):
        theta = ScalarField(grid, np.full(grid.shape, 0.4))
        ext = extend(theta, trace_ladder(grid), 0.05)
        trace = neumann_trace(ext)
        assert np.max(np.abs(trace.values)) < 1e-12

    def test_random_field_matches_spectral_operator(self, grid):
        eps = 0.05
        theta = random_band_limited(grid, 6, [35, 0, 0])
        ext = extend(theta, trace_ladder(grid), eps)
        d = calibrate_dtn_constant(grid, eps)
        target = fractional_laplacian(theta, 1.0 - eps)
        rel = l2_norm(
            ScalarField(grid, neumann_trace(ext).values / d - target.values)
        ) / l2_norm(target)
        assert rel <= 0.01

    @pytest.mark.parametrize("eps", [0.0, 0.05, 0.1])
    def test_mode_independence(self, grid, eps):
        ds = [calibrate_dtn_constant(grid, eps, wavenumber=k) for k in (1, 2, 4, 8)]
        spread = (max(ds) - min(ds)) / abs(np.mean(ds))
        assert spread <= 0.005

    def test_continuity_at_zero_weight(self, grid):
        d0 = calibrate_dtn_constant(grid, 0.0)
        d_small = calibrate_dtn_constant(grid, 0.01)
        assert abs(d_small - d0) / abs(d0) <= 0.02

    def test_analytic_constant_agrees(self, grid):
        for eps in (0.0, 0.05, 0.1):
            measured = calibrate_dtn_constant(grid, eps)
            assert measured == pytest.approx(dtn_constant_analytic(eps), rel=1e-6)

    def test_insufficient_ladder_rejected(self, grid):
        theta = random_band_limited(grid, 4, [36, 0, 0])
        top = 0.1 / grid_k_max(grid)
        ext = extend(theta, np.array([0.0, top / 2, top]), 0.05)
        with pytest.raises(ValueError, match="insufficient"):
            neumann_trace(ext)


class TestDirichletEnergy:
    def test_zero_field(self, grid):
        z = np.linspace(0, 2, 17)
        ext = ExtensionField(grid, z, np.zeros((17,) + grid.shape), 0.0)
        value, _ = weighted_dirichlet_energy(ext)
        assert value == 0.0

    def test_single_mode_half_sobolev(self, grid):
        # for eps = 0 the full-space Dirichlet energy of the harmonic
        # extension is the Hdot^(1/2) seminorm squared
        x1, _ = grid.coordinates()
        theta = ScalarField(grid, np.sin(x1))
        z = np.unique(np.concatenate([trace_ladder(grid), np.linspace(0, 5, 81)]))
        ext = extend(theta, z, 0.0)
        value, estimate = weighted_dirichlet_energy(ext)
        expected = sobolev_norm(theta, 0.5) ** 2
        assert value == pytest.approx(expected, rel=0.02)

    def test_quadratic_scaling(self, grid):
        theta = random_band_limited(grid, 4, [37, 0, 0])
        z = np.linspace(0, 3, 31)
        ext1 = extend(theta, z, 0.1)
        ext2 = ExtensionField(grid, z, 2.0 * ext1.values, 0.1)
        v1, _ = weighted_dirichlet_energy(ext1)
        v2, _ = weighted_dirichlet_energy(ext2)
        assert v2 == pytest.approx(4.0 * v1, rel=1e-12)


class TestWeightedZIntegral:
    def test_linear_function_exact(self):
        # int_0^1 z^eps (a + b z) dz has a closed form; piecewise-linear
        # quadrature must reproduce it exactly
        z = np.linspace(0, 1, 9)
        a, b, eps = 0.7, -0.3, 0.35
        got = weighted_z_integral(z, a + b * z, eps)
        expected = a / (1 + eps) + b / (2 + eps)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_weight_at_origin_not_lost(self):
        # naive trapezoid of z^eps * g underestimates the first panel
        z = np.linspace(0, 1, 5)
        eps = 0.5
        got = weighted_z_integral(z, np.ones_like(z), eps)
        assert got == pytest.approx(1.0 / (1 + eps), rel=1e-12)
