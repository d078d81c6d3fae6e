import math

import numpy as np
import pytest

from nfisac.geometry import (
    ArrayGeometry,
    CommUser,
    CsiEstimate,
    Eavesdropper,
    PolarPoint,
    Scenario,
    SensingTarget,
    channel,
    element_distance,
    element_distances,
    element_positions,
    far_field_steering,
    normalized_bound,
    region_bounds,
    sample_error,
    steering_vector,
)


def geom64():
    return ArrayGeometry.from_frequency(64, 28e9)


class TestElementPositions:
    def test_single_element_at_origin(self):
        g = ArrayGeometry(1, 0.01)
        assert element_positions(g).tolist() == [0.0]

    def test_two_elements_symmetric(self):
        g = ArrayGeometry(2, 1.0, spacing=0.5)
        assert element_positions(g).tolist() == [-0.25, 0.25]

    def test_matches_direct_formula_n64(self):
        g = geom64()
        y = element_positions(g)
        n = np.arange(1, 65)
        expect = (-64 - 1 + 2 * n) / 2.0 * g.spacing
        np.testing.assert_allclose(y, expect, rtol=0, atol=0)
        assert abs(y.sum()) < 1e-12
        np.testing.assert_allclose(y, -y[::-1], atol=0)


class TestElementDistance:
    def test_single_element(self):
        g = ArrayGeometry(1, 0.01)
        assert element_distance(g, PolarPoint(1.0, 0.3), 1) == pytest.approx(1.0)

    def test_broadside_symmetry(self):
        g = ArrayGeometry(6, 0.02)
        p = PolarPoint(0.8, 0.0)
        d = element_distances(g, p)
        np.testing.assert_allclose(d, d[::-1], rtol=1e-15)

    def test_direct_formula_value(self):
        g = geom64()
        p = PolarPoint(10.0, -math.pi / 4)
        n = 1
        expect = math.sqrt(
            10.0**2
            + (-64 - 1 + 2 * n) ** 2 * g.spacing**2 / 4.0
            + (64 + 1 - 2 * n) * 10.0 * g.spacing * math.sin(-math.pi / 4)
        )
        assert element_distance(g, p, 1) == pytest.approx(expect, rel=1e-15)

    def test_endfire_reduces_to_absolute_offset(self):
        # at theta = +/- pi/2 the distance collapses to |r -+ y_n|
        g = ArrayGeometry(8, 0.011)
        y = element_positions(g)
        for theta, sign in ((math.pi / 2, 1.0), (-math.pi / 2, -1.0)):
            p = PolarPoint(0.4, theta)
            d = element_distances(g, p)
            expect = np.sqrt((0.4 - sign * y) ** 2)
            np.testing.assert_allclose(d, expect, rtol=1e-12)

    def test_out_of_range_index(self):
        g = ArrayGeometry(4, 0.01)
        with pytest.raises(ValueError):
            element_distance(g, PolarPoint(1.0, 0.0), 0)
        with pytest.raises(ValueError):
            element_distance(g, PolarPoint(1.0, 0.0), 5)


class TestSteeringVector:
    def test_single_element(self):
        g = ArrayGeometry(1, 0.013)
        v = steering_vector(g, PolarPoint(1.0, 0.0))
        assert v[0] == pytest.approx(np.exp(-2j * math.pi / 0.013))

    def test_unit_modulus_randomized(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 20))
            g = ArrayGeometry(n, float(rng.uniform(0.001, 0.1)))
            p = PolarPoint(
                float(rng.uniform(0.01, 100.0)),
                float(rng.uniform(-math.pi / 2, math.pi / 2)),
            )
            np.testing.assert_allclose(np.abs(steering_vector(g, p)), 1.0, rtol=1e-14)

    def test_broadside_phase_symmetry(self):
        g = ArrayGeometry(7, 0.011)
        v = steering_vector(g, PolarPoint(0.3, 0.0))
        np.testing.assert_allclose(v, v[::-1], rtol=1e-14)

    def test_far_field_limit(self):
        g = ArrayGeometry(8, 0.0107)
        _, d_r = region_bounds(g)
        theta = 0.42
        ff = far_field_steering(g, theta)
        p = PolarPoint(100.0 * d_r, theta)
        nf = steering_vector(g, p)
        nf = nf * np.exp(2j * math.pi * p.range_m / g.wavelength)
        phase_err = np.abs(np.angle(nf * ff.conj()))
        assert phase_err.max() < 1e-2

    def test_far_field_convergence_monotone(self):
        g = ArrayGeometry(8, 0.0107)
        _, d_r = region_bounds(g)
        theta = -0.61
        ff = far_field_steering(g, theta)
        errs = []
        for mult in (10.0, 100.0, 1000.0):
            p = PolarPoint(mult * d_r, theta)
            nf = steering_vector(g, p) * np.exp(2j * math.pi * p.range_m / g.wavelength)
            errs.append(np.abs(np.angle(nf * ff.conj())).max())
        assert errs[0] > errs[1] > errs[2]


class TestFarFieldSteering:
    def test_broadside_all_ones(self):
        g = ArrayGeometry(9, 0.02)
        np.testing.assert_allclose(far_field_steering(g, 0.0), 1.0, rtol=0)

    def test_two_element_endfire(self):
        g = ArrayGeometry(2, 1.0, spacing=0.5)
        v = far_field_steering(g, math.pi / 2)
        np.testing.assert_allclose(
            v, [np.exp(-1j * math.pi / 2), np.exp(1j * math.pi / 2)], rtol=1e-14
        )

    def test_first_order_taylor_of_near_field(self):
        g = ArrayGeometry(8, 0.0107)
        theta = 0.37
        r = 1e7
        nf = steering_vector(g, PolarPoint(r, theta))
        nf = nf * np.exp(2j * math.pi * r / g.wavelength)
        np.testing.assert_allclose(nf, far_field_steering(g, theta), atol=1e-4)


class TestChannel:
    def test_unit_distance_modulus(self):
        g = ArrayGeometry(1, 0.013, pathloss_exponent=2.0)
        h = channel(g, PolarPoint(1.0, 0.1))
        assert abs(h[0]) == pytest.approx(math.sqrt(g.reference_pathloss), rel=1e-14)

    def test_norm_value(self):
        g = ArrayGeometry(16, 0.0107, pathloss_exponent=2.0)
        h = channel(g, PolarPoint(10.0, -0.3))
        assert np.linalg.norm(h) == pytest.approx(
            math.sqrt(16 * g.reference_pathloss / 100.0), rel=1e-13
        )

    def test_norm_halves_when_distance_doubles(self):
        g = ArrayGeometry(8, 0.0107, pathloss_exponent=2.0)
        n1 = np.linalg.norm(channel(g, PolarPoint(3.0, 0.2)))
        n2 = np.linalg.norm(channel(g, PolarPoint(6.0, 0.2)))
        assert n2 == pytest.approx(n1 / 2.0, rel=1e-12)

    def test_default_reference_pathloss_follows_wavelength(self):
        g = ArrayGeometry.from_frequency(4, 28e9)
        assert g.reference_pathloss == pytest.approx(g.wavelength / (4 * math.pi))
        override = ArrayGeometry(4, g.wavelength, reference_pathloss=1e-3)
        assert override.reference_pathloss == 1e-3


class TestRegionBounds:
    def test_single_element_degenerate(self):
        d_f, d_r = region_bounds(ArrayGeometry(1, 0.01))
        assert d_f == 0.0 and d_r == 0.0

    def test_n64_at_28ghz(self):
        d_f, d_r = region_bounds(geom64())
        assert d_r == pytest.approx(21.3, abs=0.1)
        assert d_f == pytest.approx(0.95, abs=0.01)

    def test_ratio_scales_like_sqrt_aperture_over_wavelength(self):
        g1 = ArrayGeometry(16, 0.01)
        g2 = ArrayGeometry(64, 0.01)
        for g in (g1, g2):
            d_f, d_r = region_bounds(g)
            assert d_r / d_f == pytest.approx(
                4.0 * math.sqrt(g.aperture / g.wavelength), rel=1e-12
            )


class TestErrorModel:
    def test_normalized_bound(self):
        assert normalized_bound(np.array([1.0, 0.0]), 0.0) == 0.0
        assert normalized_bound(np.array([2.0, 0.0]), 0.5) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            normalized_bound(np.ones(2), -0.1)

    def test_sample_error_zero_radius(self, rng):
        assert np.all(sample_error(0.0, 5, rng) == 0.0)

    def test_sample_norm_never_exceeds_bound(self, rng):
        for _ in range(200):
            eps = float(rng.uniform(0, 2))
            d = sample_error(eps, 6, rng)
            assert np.linalg.norm(d) <= eps * (1 + 1e-12)

    def test_surface_sampling_mean_norm(self, rng):
        eps = 0.73
        norms = [np.linalg.norm(sample_error(eps, 4, rng)) for _ in range(10_000)]
        assert abs(np.mean(norms) - eps) < 1e-6

    def test_radius_fraction(self, rng):
        d = sample_error(1.0, 4, rng, radius_fraction=0.25)
        assert np.linalg.norm(d) == pytest.approx(0.25, rel=1e-12)


def _mini_scenario(r=0.1):
    g = ArrayGeometry.from_frequency(8, 28e9)
    p = PolarPoint(r, 0.1)
    est = CsiEstimate(channel(g, p), 0.01)
    cu = CommUser(p, est, 1e-11, 3.16)
    eve = Eavesdropper(p, est, 1e-11, (0.5,))
    tgt = SensingTarget(p, est)
    return g, cu, eve, tgt


class TestScenario:
    def test_valid_construction(self):
        g, cu, eve, tgt = _mini_scenario()
        s = Scenario(g, [cu], [eve], [tgt], 1.0)
        assert (s.num_cus, s.num_eves, s.num_targets) == (1, 1, 1)

    def test_out_of_region_position_warns(self):
        g, cu, eve, tgt = _mini_scenario(r=50.0)
        with pytest.warns(UserWarning, match="near-field region"):
            Scenario(g, [cu], [], [tgt], 1.0)

    def test_leak_threshold_arity_enforced(self):
        g, cu, eve, tgt = _mini_scenario()
        with pytest.raises(ValueError, match="leakage threshold"):
            Scenario(g, [cu, cu], [eve], [tgt], 1.0)

    def test_requires_a_cu(self):
        g, cu, eve, tgt = _mini_scenario()
        with pytest.raises(ValueError):
            Scenario(g, [], [], [tgt], 1.0)

    def test_estimates_are_immutable(self):
        g, cu, _, _ = _mini_scenario()
        with pytest.raises(ValueError):
            cu.csi.vector[0] = 0.0
