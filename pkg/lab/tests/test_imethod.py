import math

import numpy as np
import pytest
import src.experiments as experiments
import src.imethod as imethod
import src.solver as solver
import src.spectral as spectral
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from pydantic import ValidationError
from src.errors import ConfigurationError, IntegrationFailure, NumericError
from src.schemas import AdmissiblePair, AdmissiblePairSet, IMultiplierSpec, SolverConfig


class TestMultiplier:
    def test_branches(self):
        spec = IMultiplierSpec(s=0.5, N=2.0)
        assert imethod.m_value(spec, 0.0) == 1.0
        assert imethod.m_value(spec, 2.0) == 1.0
        assert math.isclose(imethod.m_value(spec, 8.0), 4.0**-0.5, rel_tol=1e-15)
        assert isinstance(imethod.m_value(spec, 3.0), float)

    def test_joins_are_continuous(self):
        spec = IMultiplierSpec(s=0.3, N=1.0)
        eps = 1e-9
        for r in (1.0, 2.0):
            below, above = imethod.m_value(spec, np.array([r - eps, r + eps]))
            assert abs(below - above) < 1e-7

    @settings(max_examples=50, deadline=None)
    @given(
        s=st.floats(min_value=0.05, max_value=0.95),
        a=st.floats(min_value=0.0, max_value=10.0),
        b=st.floats(min_value=0.0, max_value=10.0),
    )
    def test_non_increasing_and_bounded(self, s, a, b):
        spec = IMultiplierSpec(s=s, N=1.0)
        low, high = sorted((a, b))
        m_low, m_high = imethod.m_value(spec, np.array([low, high]))
        assert 0.0 < m_high <= m_low + 1e-12 <= 1.0 + 1e-9

    @settings(max_examples=50, deadline=None)
    @given(
        s=st.floats(min_value=0.26, max_value=0.95),
        a=st.floats(min_value=0.0, max_value=10.0),
        b=st.floats(min_value=0.0, max_value=10.0),
    )
    def test_m_times_xi_non_decreasing(self, s, a, b):
        spec = IMultiplierSpec(s=s, N=1.0)
        low, high = sorted((a, b))
        m = imethod.m_value(spec, np.array([low, high]))
        assert m[0] * low <= m[1] * high + 1e-12

    def test_regularity_out_of_range(self):
        with pytest.raises(ValidationError):
            IMultiplierSpec(s=1.0, N=1.0)


class TestOperator:
    @pytest.fixture(autouse=True)
    def setup(self, grid, moving_gaussian, ispec):
        self.grid = grid
        self.u = moving_gaussian
        self.spec = ispec

    def test_identity_above_the_lattice(self):
        spec = IMultiplierSpec(s=0.5, N=2 * float(self.grid.kabs.max()))
        assert imethod.is_identity(spec, self.grid)
        assert imethod.apply_I(self.u, spec) is self.u
        assert imethod.modified_energy(self.u, spec) == solver.energy(self.u)
        _, bad = imethod.split_nonlinearity(self.u, spec)
        assert np.count_nonzero(bad.values) == 0

    def test_damps_only_high_modes(self, plane_wave):
        low = plane_wave(self.grid, (1, 0))
        assert_allclose(imethod.apply_I(low, self.spec).values, low.values, atol=1e-13)
        high = plane_wave(self.grid, (8, 0))
        m = imethod.m_value(self.spec, 8 * 2 * math.pi / self.grid.L)
        assert m < 1.0
        assert_allclose(
            imethod.apply_I(high, self.spec).values, m * high.values, atol=1e-13
        )

    def test_damping_lowers_kinetic_energy(self):
        damped = imethod.apply_I(self.u, self.spec)
        assert solver.kinetic_energy(damped) < solver.kinetic_energy(self.u)

    def test_split_sums_to_damped_cubic(self):
        good, bad = imethod.split_nonlinearity(self.u, self.spec)
        expected = imethod.apply_I(spectral.cubic(self.u), self.spec)
        assert_allclose((good + bad).values, expected.values, atol=1e-13)

    def test_single_mode_commutator(self, plane_wave):
        u = plane_wave(self.grid, (6, 0))
        m = imethod.m_value(self.spec, 6 * 2 * math.pi / self.grid.L)
        bad = imethod.commutator_field(u, self.spec)
        assert_allclose(bad.values, (m - m**3) * u.values, atol=1e-12)

    def test_norm_comparison(self):
        report = imethod.norm_comparison(self.u, self.spec)
        assert report.upper_constant > 0
        assert report.lower_constant > 0
        assert math.isfinite(report.upper_constant * report.lower_constant)

    def test_commutes_with_free_propagator(self):
        propagator = np.exp(-0.7j * self.grid.k2)
        evolved_then_damped = imethod.apply_I(
            spectral.apply_multiplier(self.u, propagator), self.spec
        )
        damped_then_evolved = spectral.apply_multiplier(
            imethod.apply_I(self.u, self.spec), propagator
        )
        assert_allclose(
            evolved_then_damped.values, damped_then_evolved.values, atol=1e-12
        )

    def test_kinetic_energy_grows_with_the_cutoff(self):
        u = spectral.synthesize_random_hs(self.grid, 0.5, seed=0)
        unit = 2 * math.pi / self.grid.L
        specs = [IMultiplierSpec(s=0.5, N=k * unit) for k in (1, 2, 4, 8, 16)]
        energies = [imethod.modified_energy(u, spec, nonlinear=False) for spec in specs]
        assert all(a < b for a, b in zip(energies, energies[1:]))
        assert energies[-1] <= solver.kinetic_energy(u)

    def test_band_limited_data_has_no_commutator(self):
        spec = IMultiplierSpec(s=0.5, N=8 * 2 * math.pi / self.grid.L)
        rough = spectral.synthesize_random_hs(self.grid, 0.5, seed=4)
        band = (self.grid.kabs <= spec.N / 4).astype(float)
        low = spectral.apply_multiplier(rough, band)
        assert spectral.lp_norm(low, 2) > 0.0
        assert spectral.lp_norm(imethod.commutator_field(low, spec), 2) <= 1e-12

    def test_norm_constants_are_resolution_stable(self):
        reports = []
        for n in (64, 128):
            grid = spectral.make_grid(n, 16.0)
            u = spectral.synthesize_random_hs(grid, 0.5, seed=0)
            spec = IMultiplierSpec(s=0.5, N=2 * 2 * math.pi / grid.L)
            reports.append(imethod.norm_comparison(u, spec))
        coarse, fine = reports
        assert 0.5 <= fine.upper_constant / coarse.upper_constant <= 2.0
        assert 0.5 <= fine.lower_constant / coarse.lower_constant <= 2.0


class TestTrajectoryDiagnostics:
    @pytest.fixture(autouse=True)
    def setup(self, moving_gaussian, ispec, short_run):
        self.spec = ispec
        self.traj = solver.evolve(moving_gaussian, short_run)

    def test_commutator_vanishes_for_identity(self):
        spec = IMultiplierSpec(s=0.5, N=1e3)
        assert imethod.commutator_norm_l1l2(self.traj, spec) == 0.0

    def test_commutator_norm_is_positive(self):
        assert imethod.commutator_norm_l1l2(self.traj, self.spec) > 0.0

    def test_energy_pairs_only(self):
        pairs = AdmissiblePairSet(pairs=(AdmissiblePair(q=math.inf, r=2.0),))
        expected = max(
            spectral.lp_norm(imethod._bracket_derivative(u, self.spec), 2)
            for u in self.traj.snapshots
        )
        value = imethod.z_diagnostic(self.traj, self.spec, pairs)
        assert math.isclose(value, expected, rel_tol=1e-12)

    def test_z_grows_with_the_interval(self):
        short = self.traj.window(0.0, 0.01)
        assert imethod.z_diagnostic(short, self.spec) <= imethod.z_diagnostic(
            self.traj, self.spec
        )

    def test_quartic_pieces(self):
        pieces = imethod.iu_quartic_pieces(self.traj, self.spec)
        assert len(pieces) == len(self.traj) - 1
        assert np.all(pieces > 0)

    def test_inadmissible_pair(self):
        with pytest.raises(ValidationError):
            AdmissiblePair(q=4.0, r=3.0)


class TestEnergyIncrement:
    @pytest.fixture(autouse=True)
    def setup(self, grid, moving_gaussian):
        self.grid = grid
        self.u0 = moving_gaussian
        self.spec = IMultiplierSpec(s=0.5, N=2 * math.pi / grid.L)

    def test_rate_vanishes_without_commutator(self):
        identity = IMultiplierSpec(s=0.5, N=2 * float(self.grid.kabs.max()))
        assert imethod.energy_derivative(self.u0, identity) == 0.0
        assert imethod.energy_derivative(self.u0, self.spec, nonlinear=False) == 0.0

    def test_integral_tracks_the_modified_energy(self):
        cfg = SolverConfig(dt=1e-4, T=5e-3, record_stride=50, dealias=False)
        integral = imethod.IncrementIntegral(self.spec, dealias=False)
        traj = solver.evolve(self.u0, cfg, step_observers=[integral])
        first, last = (
            imethod.modified_energy(u, self.spec, dealias=False)
            for u in (traj.snapshots[0], traj.snapshots[-1])
        )
        assert integral.value == pytest.approx(last - first, rel=2e-2, abs=1e-12)
        assert integral.sup >= abs(integral.value)

    @pytest.mark.parametrize("target", [0.5, 1.0, 4.0])
    def test_scale_hits_the_target(self, target):
        scale = imethod.energy_scale(self.u0, self.spec, target)
        energy = imethod.modified_energy(self.u0 * scale, self.spec)
        assert energy == pytest.approx(target, rel=1e-10)

    def test_scale_for_the_free_flow(self):
        scale = imethod.energy_scale(self.u0, self.spec, 2.0, nonlinear=False)
        kinetic = solver.kinetic_energy(imethod.apply_I(self.u0 * scale, self.spec))
        assert kinetic == pytest.approx(2.0, rel=1e-10)

    def test_zero_field_cannot_be_scaled(self):
        with pytest.raises(NumericError):
            imethod.energy_scale(self.u0 * 0.0, self.spec)


class TestIncrementSweep:
    @pytest.fixture(autouse=True)
    def setup(self, moving_gaussian, grid):
        self.grid = grid
        self.u0 = moving_gaussian
        self.Ns = imethod.sweep_cutoffs(grid, [4, 2, 8])

    def test_cutoffs_in_lattice_units(self, grid):
        assert imethod.sweep_cutoffs(grid, [1]) == [2 * math.pi / grid.L]

    def test_free_flow_has_no_increment(self):
        cfg = SolverConfig(dt=1e-3, T=0.02, record_stride=5, nonlinear=False)
        report = imethod.increment_sweep(self.u0, 0.5, self.Ns, cfg, workers=2)
        assert report.complete
        assert [row.N for row in report.rows] == sorted(self.Ns)
        assert all(row.sup_increment <= 1e-10 for row in report.rows)
        assert all(row.commutator_increment == 0.0 for row in report.rows)

    def test_amplitude_is_normalized_per_cutoff(self):
        cfg = SolverConfig(dt=1e-3, T=0.01, record_stride=5)
        big = self.u0 * 3.0
        report = imethod.increment_sweep(big, 0.5, self.Ns, cfg, energy_target=1.0)
        assert report.energy_target == 1.0
        scales = [row.amplitude_scale for row in report.rows]
        assert all(scale < 1.0 for scale in scales)
        assert len(set(scales)) == len(scales)
        for row in report.rows:
            spec = IMultiplierSpec(s=0.5, N=row.N)
            energy = imethod.modified_energy(big * row.amplitude_scale, spec)
            assert energy == pytest.approx(1.0, rel=1e-9)

    def test_identity_cutoff_only_sees_solver_drift(self):
        cfg = SolverConfig(dt=1e-3, T=0.01, record_stride=5)
        beyond = imethod.sweep_cutoffs(self.grid, [32])
        report = imethod.increment_sweep(self.u0, 0.5, beyond, cfg)
        (row,) = report.rows
        assert row.sup_increment == row.drift_baseline
        assert row.commutator_increment == 0.0
        assert row.commutator_l1l2 == 0.0

    def test_commutator_increment_is_reported(self):
        cfg = SolverConfig(dt=1e-3, T=0.01, record_stride=5)
        report = imethod.increment_sweep(self.u0, 0.5, self.Ns, cfg)
        assert all(row.commutator_increment > 0.0 for row in report.rows)
        assert report.increment_slope == report.rows[-1].slope_so_far
        assert report.raw_increment_slope is not None

    def test_results_do_not_depend_on_workers(self):
        cfg = SolverConfig(dt=1e-3, T=0.01, record_stride=5)
        one = imethod.increment_sweep(self.u0, 0.5, self.Ns, cfg, workers=1)
        three = imethod.increment_sweep(self.u0, 0.5, self.Ns, cfg, workers=3)
        assert one.dict() == three.dict()
        assert one.reference_rates == {"almost_conservation": -1.5, "improved": -2.0}

    def test_failure_keeps_partial_rows(self, mocker, short_run):
        partial = solver.evolve(self.u0, SolverConfig(dt=1e-3, T=0.004, record_stride=2))
        mocker.patch(
            "src.imethod.solver.evolve",
            side_effect=IntegrationFailure("boom", step=5, trajectory=partial),
        )
        report = imethod.increment_sweep(self.u0, 0.5, self.Ns, short_run)
        assert not report.complete
        assert report.failure["step"] == 5
        assert len(report.rows) == 3

    def test_needs_a_cutoff(self, short_run):
        with pytest.raises(NumericError):
            imethod.increment_sweep(self.u0, 0.5, [], short_run)

    def test_needs_a_positive_target(self, short_run):
        with pytest.raises(ConfigurationError):
            imethod.increment_sweep(
                self.u0, 0.5, self.Ns, short_run, energy_target=0.0
            )


@pytest.mark.slow
class TestIncrementDecay:
    def test_standard_random_data(self):
        grid = spectral.make_grid(256, 32.0)
        u0 = experiments.standard_suite(grid)["random_hs"]
        cfg = SolverConfig(dt=1e-3, T=1.0, record_stride=50)
        cutoffs = imethod.sweep_cutoffs(grid, [4, 8, 16, 32])
        report = imethod.increment_sweep(u0, 0.3, cutoffs, cfg, workers=4)
        assert report.complete
        assert report.increment_slope <= -1.2
        assert report.commutator_slope <= -1.5
