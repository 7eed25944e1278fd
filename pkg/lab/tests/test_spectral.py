import math

import numpy as np
import pytest
import src.oracle as oracle
import src.spectral as spectral
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from src.errors import ConfigurationError, GridMismatch, NumericError


class TestGrid:
    def test_rejects_odd_or_small_sizes(self):
        with pytest.raises(ConfigurationError):
            spectral.Grid(7, 1.0)
        with pytest.raises(ConfigurationError):
            spectral.Grid(6, 1.0)
        with pytest.raises(ConfigurationError):
            spectral.Grid(16, 0.0)

    def test_make_grid_needs_power_of_two(self):
        with pytest.raises(ConfigurationError):
            spectral.make_grid(12, 8.0)
        assert spectral.Grid(12, 8.0).n == 12

    def test_nodes_start_at_left_edge(self):
        grid = spectral.make_grid(8, 4.0)
        assert grid.x[0] == -2.0
        assert_allclose(np.diff(grid.x), grid.dx)
        assert grid.modes.tolist() == [0, 1, 2, 3, -4, -3, -2, -1]

    def test_arrays_are_read_only(self):
        grid = spectral.make_grid(8, 4.0)
        with pytest.raises(ValueError):
            grid.k2[0, 0] = 1.0


class TestTransform:
    @pytest.fixture(autouse=True)
    def setup(self, fine_grid, moving_gaussian):
        self.grid = fine_grid
        self.u = moving_gaussian

    def test_round_trip(self):
        back = spectral.inverse(spectral.transform(self.u))
        assert_allclose(back.values, self.u.values, atol=1e-13)

    def test_gaussian_matches_continuous_transform(self):
        u = spectral.synthesize_gaussian(self.grid, A=1.0, sigma=1.0)
        expected = 2 * math.pi * np.exp(-self.grid.k2 / 2)
        assert_allclose(spectral.transform(u).coefficients, expected, atol=1e-10)

    def test_fields_on_different_grids_do_not_mix(self):
        other = spectral.synthesize_gaussian(spectral.make_grid(64, 32.0))
        with pytest.raises(GridMismatch):
            self.u + other

    def test_wrong_shape_is_rejected(self):
        with pytest.raises(GridMismatch):
            spectral.Field(self.grid, np.zeros((4, 4)))


class TestParseval:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_random_fields(self, seed):
        rng = np.random.default_rng(seed)
        grid = spectral.make_grid(16, 5.0)
        values = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        u = spectral.Field(grid, values)
        coefficients = spectral.transform(u).coefficients
        power = np.sum(np.abs(coefficients) ** 2) / grid.area
        assert math.isclose(spectral.lp_norm(u, 2) ** 2, power, rel_tol=1e-12)


class TestOperators:
    @pytest.fixture(autouse=True)
    def setup(self, grid, plane_wave):
        self.grid = grid
        self.plane_wave = plane_wave

    def test_laplacian_of_plane_wave(self):
        u = self.plane_wave(self.grid, (1, 2))
        k2 = (2 * math.pi / self.grid.L) ** 2 * 5
        assert_allclose(spectral.laplacian(u).values, -k2 * u.values, atol=1e-11)

    def test_gradient_of_plane_wave(self):
        u = self.plane_wave(self.grid, (3, -1))
        k = 2 * math.pi / self.grid.L
        g1, g2 = spectral.gradient(u)
        assert_allclose(g1.values, 3j * k * u.values, atol=1e-11)
        assert_allclose(g2.values, -1j * k * u.values, atol=1e-11)

    def test_gradient_drops_nyquist(self):
        n = self.grid.n
        u = self.plane_wave(self.grid, (n // 2, 0))
        g1, _ = spectral.gradient(u)
        assert_allclose(g1.values, 0.0, atol=1e-12)

    def test_constant_multiplier(self, moving_gaussian):
        scaled = spectral.apply_multiplier(moving_gaussian, 3.0)
        assert_allclose(scaled.values, 3.0 * moving_gaussian.values, atol=1e-12)

    def test_callable_multiplier(self, moving_gaussian):
        lap = spectral.apply_multiplier(moving_gaussian, lambda kx, ky: -(kx**2 + ky**2))
        assert_allclose(lap.values, spectral.laplacian(moving_gaussian).values)

    def test_non_finite_multiplier_is_reported(self, moving_gaussian):
        with pytest.raises(NumericError):
            spectral.apply_multiplier(moving_gaussian, lambda kx, ky: 1.0 / kx)

    def test_convolution_with_point_mass(self, moving_gaussian):
        n = self.grid.n
        delta = np.zeros((n, n))
        delta[n // 2, n // 2] = 1.0 / self.grid.dx**2
        result = spectral.convolve(spectral.Field(self.grid, delta), moving_gaussian)
        assert_allclose(result.values, moving_gaussian.values, atol=1e-12)

    def test_convolution_is_symmetric(self, moving_gaussian):
        rough = spectral.synthesize_random_hs(self.grid, 0.5, seed=1)
        assert_allclose(
            spectral.convolve(moving_gaussian, rough).values,
            spectral.convolve(rough, moving_gaussian).values,
            atol=1e-12,
        )

    def test_convolution_matches_pair_sum(self):
        grid = spectral.make_grid(16, 8.0)
        a = spectral.synthesize_gaussian(grid, A=1.0, sigma=1.0, v=(1.0, -0.5))
        b = spectral.synthesize_random_hs(grid, 0.5, seed=2)
        direct = oracle.direct_convolution(a, b).values
        assert_allclose(spectral.convolve(a, b).values, direct, rtol=1e-9, atol=1e-12)

    def test_multipliers_compose(self, moving_gaussian):
        propagator = np.exp(-0.3j * self.grid.k2)
        smoothing = 1.0 / (1.0 + self.grid.k2)
        twice = spectral.apply_multiplier(
            spectral.apply_multiplier(moving_gaussian, propagator), smoothing
        )
        once = spectral.apply_multiplier(moving_gaussian, propagator * smoothing)
        assert_allclose(twice.values, once.values, atol=1e-12)

    def test_inner_pairing(self, gaussian):
        value = spectral.inner(gaussian, gaussian.conj(), self.grid.dx)
        assert math.isclose(value, spectral.lp_norm(gaussian, 2) ** 2, rel_tol=1e-12)


class TestNorms:
    @pytest.fixture(autouse=True)
    def setup(self, grid, plane_wave):
        self.grid = grid
        self.plane_wave = plane_wave

    def test_plane_wave_norms(self):
        u = self.plane_wave(self.grid, (1, 2), A=2.0)
        assert math.isclose(spectral.lp_norm(u, 2), 2.0 * self.grid.L, rel_tol=1e-12)
        assert math.isclose(
            spectral.lp_norm(u, 4), 2.0 * math.sqrt(self.grid.L), rel_tol=1e-12
        )
        assert math.isclose(
            spectral.quartic_integral(u), 16.0 * self.grid.area, rel_tol=1e-12
        )

    def test_unsupported_exponent(self, gaussian):
        with pytest.raises(ConfigurationError):
            spectral.lp_norm(gaussian, 3)

    def test_sobolev_zero_is_l2(self, moving_gaussian):
        assert math.isclose(
            spectral.sobolev_norm(moving_gaussian, 0.0),
            spectral.lp_norm(moving_gaussian, 2),
            rel_tol=1e-12,
        )

    def test_homogeneous_norm_of_plane_wave(self):
        u = self.plane_wave(self.grid, (1, 2))
        k = 2 * math.pi / self.grid.L * math.sqrt(5)
        assert math.isclose(
            spectral.sobolev_norm(u, 1.0, homogeneous=True),
            k * self.grid.L,
            rel_tol=1e-12,
        )

    def test_homogeneous_norm_ignores_the_mean(self):
        constant = spectral.Field(self.grid, np.ones((self.grid.n, self.grid.n)))
        assert spectral.sobolev_norm(constant, 0.5, homogeneous=True) == 0.0


class TestInitialData:
    @pytest.fixture(autouse=True)
    def setup(self, grid):
        self.grid = grid

    def test_gaussian_too_wide_for_box(self):
        with pytest.raises(ConfigurationError):
            spectral.synthesize_gaussian(self.grid, sigma=self.grid.L / 4)

    def test_random_data_is_reproducible(self):
        a = spectral.synthesize_random_hs(self.grid, 0.3, seed=7)
        b = spectral.synthesize_random_hs(self.grid, 0.3, seed=7)
        c = spectral.synthesize_random_hs(self.grid, 0.3, seed=8)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_random_data_is_band_limited(self):
        u = spectral.synthesize_random_hs(self.grid, 0.3, seed=1)
        coefficients = spectral.transform(u).coefficients
        assert_allclose(coefficients[self.grid.nyquist, :], 0.0, atol=1e-12)
        assert_allclose(coefficients[:, self.grid.nyquist], 0.0, atol=1e-12)

    def test_normalize(self):
        u = spectral.synthesize_random_hs(self.grid, 0.3, seed=1)
        v = spectral.normalize_sobolev(u, 0.3, 2.0)
        assert math.isclose(spectral.sobolev_norm(v, 0.3), 2.0, rel_tol=1e-12)

    def test_normalize_zero_field(self):
        zero = spectral.Field(self.grid, np.zeros((self.grid.n, self.grid.n)))
        with pytest.raises(NumericError):
            spectral.normalize_sobolev(zero, 0.3)


class TestProducts:
    @pytest.fixture(autouse=True)
    def setup(self, grid, plane_wave):
        self.grid = grid
        self.u = plane_wave(grid, (1, 0)) + plane_wave(grid, (0, 2), A=0.5)

    def test_padding_is_exact_for_low_modes(self):
        padded = spectral.cubic(self.u, dealias=True)
        pointwise = spectral.cubic(self.u, dealias=False)
        assert_allclose(padded.values, pointwise.values, atol=1e-12)

    def test_quartic_integral_agrees_for_low_modes(self):
        assert math.isclose(
            spectral.quartic_integral(self.u, True),
            spectral.quartic_integral(self.u, False),
            rel_tol=1e-12,
        )

    def test_padded_product_rejects_too_many_factors(self):
        with pytest.raises(ConfigurationError):
            spectral.dealias_pad_product(self.u, self.u, self.u, self.u)
        with pytest.raises(ConfigurationError):
            spectral.dealias_pad_product()

    def test_pad_then_truncate(self):
        fine = spectral.pad(spectral.transform(self.u), 2 * self.grid.n)
        assert fine.grid.n == 2 * self.grid.n
        back = spectral.truncate(fine, self.grid)
        assert_allclose(
            back.coefficients, spectral.transform(self.u).coefficients, atol=1e-10
        )


class TestSnapshots:
    def test_round_trip(self, tmp_path, moving_gaussian):
        path = spectral.write_snapshot(moving_gaussian, tmp_path / "u.bin")
        assert path.stat().st_size == 16 + 16 * moving_gaussian.grid.n**2
        back = spectral.read_snapshot(path)
        assert back.grid == moving_gaussian.grid
        assert np.array_equal(back.values, moving_gaussian.values)

    def test_truncated_file(self, tmp_path, moving_gaussian):
        path = spectral.write_snapshot(moving_gaussian, tmp_path / "u.bin")
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ConfigurationError):
            spectral.read_snapshot(path)
