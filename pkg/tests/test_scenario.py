import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porouscity.errors import InvalidPreset, PorosityOutOfRange
from porouscity.scenario import (
    ScenarioConfig,
    build_scenario,
    demand_profile,
    domain_center,
    gaussian_bump,
)

from _meshes import structured_square


class TestGaussianBump:
    def test_value_at_center(self):
        mesh = structured_square(4)
        f = gaussian_bump(mesh, (0.5, 0.5), 3.0, 1.0, 0.2)
        center = np.flatnonzero(
            np.all(np.abs(mesh.nodes - 0.5) < 1e-12, axis=1)
        )[0]
        assert f[center] == pytest.approx(3.0)

    def test_far_field_limit(self):
        mesh = structured_square(2, lx=100.0)
        f = gaussian_bump(mesh, (0.0, 0.0), 3.0, 1.0, 0.5)
        far = np.argmax(np.linalg.norm(mesh.nodes, axis=1))
        assert f[far] == pytest.approx(1.0, abs=1e-12)

    def test_flat_when_values_equal(self):
        mesh = structured_square(3)
        f = gaussian_bump(mesh, (0.3, 0.3), 2.0, 2.0, 0.4)
        np.testing.assert_allclose(f, 2.0)

    def test_bad_width(self):
        with pytest.raises(ValueError):
            gaussian_bump(structured_square(2), (0, 0), 1.0, 0.0, 0.0)

    @given(st.floats(0.1, 5.0), st.floats(-4.0, 4.0), st.floats(-4.0, 4.0))
    @settings(max_examples=30, deadline=None)
    def test_always_between_extremes(self, width, lo, hi):
        mesh = structured_square(3)
        f = gaussian_bump(mesh, (0.4, 0.6), lo, hi, width)
        assert np.all(f >= min(lo, hi) - 1e-12)
        assert np.all(f <= max(lo, hi) + 1e-12)


class TestDemandProfile:
    def test_starts_at_zero(self):
        assert demand_profile(0.0) == 0.0

    def test_rush_hour_plateau(self):
        assert demand_profile(1.5) == 1.0
        assert demand_profile(1.0) == 1.0
        assert demand_profile(2.0) == 1.0

    def test_linear_ramp(self):
        assert demand_profile(0.5) == pytest.approx(0.5)

    def test_valley_level(self):
        assert demand_profile(2.5) == pytest.approx(0.6)
        assert demand_profile(3.0) == pytest.approx(0.2)
        assert demand_profile(10.0) == pytest.approx(0.2)

    @given(st.floats(0.0, 24.0))
    @settings(max_examples=50, deadline=None)
    def test_bounded(self, t):
        assert 0.0 <= demand_profile(t) <= 1.0


class TestBuildScenario:
    def test_dense_preset(self, city_mini):
        scn = build_scenario(city_mini, ScenarioConfig(preset="dense"))
        assert scn.eps.min() == pytest.approx(0.38, abs=2e-3)
        assert scn.eps.max() <= 0.82 + 1e-12
        # porosity admissibility interval holds nodewise
        assert np.all((scn.eps >= 0.38 - 1e-9) & (scn.eps <= 0.82 + 1e-9))

    def test_disperse_preset(self, city_mini):
        scn = build_scenario(city_mini, ScenarioConfig(preset="disperse"))
        assert scn.eps.min() == pytest.approx(0.62, abs=2e-3)

    def test_absorption_peak(self, city_mini):
        scn = build_scenario(city_mini, ScenarioConfig(preset="dense"))
        assert (scn.eps * scn.kappa).max() == pytest.approx(7.0, abs=0.1)
        assert np.all(scn.kappa >= 0.0)

    def test_absorption_scales_with_kappa_max(self, city_mini):
        scn = build_scenario(
            city_mini, ScenarioConfig(preset="dense", kappa_max=1.8)
        )
        assert (scn.eps * scn.kappa).max() == pytest.approx(0.7, abs=0.01)

    def test_initial_density_concentric(self, city_mini):
        scn = build_scenario(city_mini, ScenarioConfig(preset="dense"))
        r = np.linalg.norm(city_mini.nodes - scn.center, axis=1)
        assert scn.rho0[np.argmin(r)] < 100.0
        assert scn.rho0[np.argmax(r)] == pytest.approx(1000.0, rel=0.02)
        assert np.all((scn.rho0 >= 0.0) & (scn.rho0 <= scn.rho_max))

    def test_forcing_normalized_negative(self, city_mini):
        scn = build_scenario(city_mini, ScenarioConfig(preset="dense"))
        assert np.all(scn.forcing <= 0.0)
        assert scn.forcing.min() == pytest.approx(-1.0, abs=1e-6)

    def test_invalid_preset(self, city_mini):
        with pytest.raises(InvalidPreset):
            build_scenario(city_mini, ScenarioConfig(preset="megacity"))

    def test_custom_requires_eps_center(self, city_mini):
        with pytest.raises(InvalidPreset):
            build_scenario(city_mini, ScenarioConfig(preset="custom"))

    def test_porosity_out_of_range(self, city_mini):
        with pytest.raises(PorosityOutOfRange):
            build_scenario(
                city_mini, ScenarioConfig(preset="dense", eps_center=0.2)
            )

    def test_deterministic(self, city_mini):
        a = build_scenario(city_mini, ScenarioConfig(preset="dense"))
        b = build_scenario(city_mini, ScenarioConfig(preset="dense"))
        np.testing.assert_array_equal(a.eps, b.eps)
        np.testing.assert_array_equal(a.kappa, b.kappa)
        np.testing.assert_array_equal(a.rho0, b.rho0)

    def test_center_defaults_to_centroid(self, city_mini):
        scn = build_scenario(city_mini, ScenarioConfig(preset="dense"))
        np.testing.assert_allclose(scn.center, domain_center(city_mini))


class TestDemandAt:
    @pytest.fixture
    def rush(self, city_mini):
        return build_scenario(
            city_mini, ScenarioConfig(preset="dense", q0=300.0)
        )

    def test_zero_where_cost_is_max(self, rush, city_mini):
        phi = np.linalg.norm(city_mini.nodes - rush.center, axis=1)
        q = rush.demand_at(phi, t=1.5)
        assert q[np.argmax(phi)] == pytest.approx(0.0, abs=1e-12)

    def test_zero_at_valley_start(self, rush, city_mini):
        phi = np.linalg.norm(city_mini.nodes - rush.center, axis=1)
        assert np.all(rush.demand_at(phi, t=0.0) == 0.0)

    def test_full_cost_factor_near_attraction(self, rush, city_mini):
        # phi -> 0 at the attraction point: demand = (1 - eps) q_max there
        phi = np.linalg.norm(city_mini.nodes - rush.center, axis=1)
        q = rush.demand_at(phi, t=1.5)
        i = np.argmin(phi)
        expected = (1.0 - rush.eps[i]) * rush.q_max[i] * (1 - phi[i] / phi.max())
        assert q[i] == pytest.approx(expected, rel=1e-12)

    def test_nonnegative_everywhere(self, rush, city_mini, rng):
        for t in rng.uniform(0.0, 4.0, size=10):
            phi = rng.uniform(0.0, 30.0, city_mini.n_nodes)
            assert np.all(rush.demand_at(phi, float(t)) >= 0.0)

    def test_no_demand_without_amplitude(self, city_mini):
        scn = build_scenario(city_mini, ScenarioConfig(preset="dense"))
        phi = np.ones(city_mini.n_nodes)
        assert np.all(scn.demand_at(phi, 1.0) == 0.0)
