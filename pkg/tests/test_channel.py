import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trihybrid import channel as ch
from trihybrid.harmonics import basis_vector, truncation_length

FOUR_PI = 4.0 * math.pi
GEOM = ch.UpaGeometry(n_h=3, n_v=3, spacing=0.005, wavelength=0.01)


def make_far_path(theta, phi, geom, gain=1.0, ref=100.0):
    n = geom.n_t
    return ch.PathGeometry(
        thetas=np.full(n, theta),
        phis=np.full(n, phi),
        dists=np.full(n, ref),
        ref_dist=ref,
        gains=np.full(n, gain, dtype=complex),
        far_field=True,
    )


def make_near_path(geom, source, gain=1.0, extra=0.0):
    thetas, phis, dists = ch.path_aods(geom, source)
    ref = float(np.linalg.norm(np.asarray(source))) + extra
    return ch.PathGeometry(
        thetas=thetas,
        phis=phis,
        dists=dists + extra,
        ref_dist=ref,
        gains=np.full(geom.n_t, gain, dtype=complex) * ref / (dists + extra),
        far_field=False,
    )


class TestGeometry:
    def test_single_element(self):
        geom = ch.UpaGeometry(1, 1, 0.005, 0.01)
        np.testing.assert_array_equal(ch.element_positions(geom), [[0.0, 0.0, 0.0]])

    def test_horizontal_major_ordering(self):
        pos = ch.element_positions(GEOM)
        # n = 5 (1-based) has i_h = 1, i_v = 1
        np.testing.assert_allclose(pos[4], [0.0, GEOM.spacing, GEOM.spacing])

    def test_positions_distinct(self):
        pos = ch.element_positions(GEOM)
        assert len({tuple(p) for p in pos}) == 9

    def test_kron_order_matches_hand_expansion(self):
        # 2x2 check: element order (0,0), (0,1), (1,0), (1,1) in (i_h, i_v)
        geom = ch.UpaGeometry(2, 2, 0.005, 0.01)
        theta, phi = 1.0, 0.7
        ph = geom.spacing * math.sin(phi) * math.sin(theta) / geom.wavelength
        pv = geom.spacing * math.cos(theta) / geom.wavelength
        expected = 0.5 * np.array(
            [
                1.0,
                np.exp(-2j * math.pi * pv),
                np.exp(-2j * math.pi * ph),
                np.exp(-2j * math.pi * (ph + pv)),
            ]
        )
        np.testing.assert_allclose(ch.far_field_arv(theta, phi, geom), expected)

    def test_rejects_bad_geometry(self):
        with pytest.raises(ValueError):
            ch.UpaGeometry(0, 1, 0.005, 0.01)
        with pytest.raises(ValueError):
            ch.UpaGeometry(1, 1, -1.0, 0.01)


class TestArv:
    def test_broadside_far_field(self):
        a = ch.far_field_arv(math.pi / 2, 0.0, GEOM)
        np.testing.assert_allclose(a, np.full(9, 1.0 / 3.0), atol=1e-15)

    def test_two_element_endfire(self):
        geom = ch.UpaGeometry(2, 1, 0.005, 0.01)
        a = ch.far_field_arv(math.pi / 2, math.pi / 2, geom)
        expected = np.array([1.0, np.exp(-1j * math.pi)]) / math.sqrt(2.0)
        np.testing.assert_allclose(a, expected, atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(
        theta=st.floats(min_value=0.0, max_value=math.pi),
        phi=st.floats(min_value=0.0, max_value=2 * math.pi),
    )
    def test_far_field_unit_norm(self, theta, phi):
        a = ch.far_field_arv(theta, phi, GEOM)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)

    def test_near_field_equal_distances(self):
        path = make_far_path(1.0, 2.0, GEOM)
        path = ch.PathGeometry(
            thetas=path.thetas, phis=path.phis, dists=path.dists,
            ref_dist=path.ref_dist, gains=path.gains, far_field=False,
        )
        np.testing.assert_allclose(ch.near_field_arv(path, GEOM), np.full(9, 1 / 3.0))

    def test_near_field_unit_norm(self):
        path = make_near_path(GEOM, [3.0, 1.0, -2.0])
        assert np.linalg.norm(ch.near_field_arv(path, GEOM)) == pytest.approx(1.0, abs=1e-12)

    def test_near_field_far_limit(self):
        # source at 1e6 wavelengths: spherical and planar wavefronts agree
        distance = 1e6 * GEOM.wavelength
        direction = np.array([1.0, 0.4, 0.2])
        source = distance * direction / np.linalg.norm(direction)
        path = make_near_path(GEOM, source)
        far = ch.far_field_arv(path.thetas[0], path.phis[0], GEOM)
        np.testing.assert_allclose(ch.near_field_arv(path, GEOM), far, atol=1e-3)


class TestPathAods:
    def test_axis_cases(self):
        geom = ch.UpaGeometry(1, 1, 0.005, 0.01)
        thetas, phis, dists = ch.path_aods(geom, [5.0, 0.0, 0.0])
        assert thetas[0] == pytest.approx(math.pi / 2)
        assert phis[0] == pytest.approx(0.0)
        assert dists[0] == pytest.approx(5.0)
        thetas, _, _ = ch.path_aods(geom, [0.0, 0.0, 1.0])
        assert thetas[0] == pytest.approx(0.0)

    def test_far_source_angles_agree(self):
        source = 1e6 * GEOM.wavelength * np.array([0.6, 0.6, 0.52915])
        thetas, phis, _ = ch.path_aods(GEOM, source)
        assert np.ptp(thetas) < 1e-4
        assert np.ptp(phis) < 1e-4

    def test_coincident_source_rejected(self):
        with pytest.raises(ValueError):
            ch.path_aods(GEOM, [0.0, 0.0, 0.0])


class TestEmChannel:
    def test_basis_stack_single_element(self):
        geom = ch.UpaGeometry(1, 1, 0.005, 0.01)
        path = make_far_path(1.2, 0.3, geom)
        np.testing.assert_allclose(
            ch.build_basis_stack(path, 4), basis_vector(1.2, 0.3, 4)
        )

    def test_basis_stack_blocks_identical_far(self):
        path = make_far_path(1.2, 0.3, GEOM)
        stack = ch.build_basis_stack(path, 2).reshape(9, -1)
        for n in range(1, 9):
            np.testing.assert_array_equal(stack[n], stack[0])

    def test_basis_stack_block_norm(self):
        path = make_near_path(GEOM, [4.0, 1.0, 2.0])
        stack = ch.build_basis_stack(path, 4).reshape(9, -1)
        np.testing.assert_allclose(
            np.sum(stack**2, axis=1), truncation_length(4) / FOUR_PI, atol=1e-9
        )

    def test_em_path_channel_zero_gain(self):
        path = make_far_path(1.0, 1.0, GEOM, gain=0.0)
        np.testing.assert_array_equal(ch.em_path_channel(path, GEOM, 2), np.zeros(9 * 9))

    def test_em_path_channel_identity_case(self):
        geom = ch.UpaGeometry(1, 1, 0.005, 0.01)
        path = make_far_path(0.8, 2.0, geom)  # single element: arv == 1
        np.testing.assert_allclose(
            ch.em_path_channel(path, geom, 4), ch.build_basis_stack(path, 4)
        )

    def test_em_path_channel_block_structure(self):
        path = make_near_path(GEOM, [5.0, -2.0, 1.0], gain=0.7 + 0.2j)
        h = ch.em_path_channel(path, GEOM, 3).reshape(9, -1)
        arv = ch.near_field_arv(path, GEOM)
        for n in (0, 4, 8):
            expected = path.gains[n] * arv[n] * basis_vector(
                path.thetas[n], path.phis[n], 3
            )
            np.testing.assert_allclose(h[n], expected, atol=1e-14)

    def test_em_user_channel_prefactor(self):
        geom = ch.UpaGeometry(1, 1, 0.005, 0.01)
        path = make_far_path(1.0, 0.5, geom)
        single = ch.em_user_channel([path], geom, 2)
        np.testing.assert_allclose(single, ch.em_path_channel(path, geom, 2))
        double = ch.em_user_channel([path, path], geom, 2)
        np.testing.assert_allclose(double, math.sqrt(2.0) * single)

    def test_em_user_channel_linearity(self):
        p1 = make_far_path(1.0, 0.5, GEOM, gain=0.3 - 0.1j)
        p2 = ch.PathGeometry(
            thetas=p1.thetas, phis=p1.phis, dists=p1.dists, ref_dist=p1.ref_dist,
            gains=p1.gains * (2.0 + 1.0j), far_field=True,
        )
        h1 = ch.em_user_channel([p1], GEOM, 2)
        h2 = ch.em_user_channel([p2], GEOM, 2)
        np.testing.assert_allclose(h2, (2.0 + 1.0j) * h1)

    def test_empty_path_list(self):
        with pytest.raises(ValueError):
            ch.em_user_channel([], GEOM, 2)


class TestFactorization:
    def test_isotropic_far_field_matches_reduced_model(self):
        rng = np.random.default_rng(5)
        paths = [
            make_far_path(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi), GEOM,
                          gain=rng.standard_normal() + 1j * rng.standard_normal())
            for _ in range(3)
        ]
        coeffs = np.zeros((9, 25))
        coeffs[:, 0] = math.sqrt(FOUR_PI)  # unit gain everywhere
        h_em = ch.em_user_channel(paths, GEOM, 4)
        h = ch.effective_channel(coeffs, h_em)
        expected = math.sqrt(9 / 3) * sum(
            p.gains[0] * ch.far_field_arv(p.thetas[0], p.phis[0], GEOM) for p in paths
        )
        np.testing.assert_allclose(h, expected, atol=1e-12)

    def test_zero_pattern_zeroes_element(self):
        rng = np.random.default_rng(6)
        paths = [make_near_path(GEOM, [30.0, 5.0, 2.0], gain=1.0 + 0.5j)]
        coeffs = rng.standard_normal((9, 25))
        coeffs[3] = 0.0
        h = ch.effective_channel(coeffs, ch.em_user_channel(paths, GEOM, 4))
        assert h[3] == 0.0
        assert np.all(h[np.arange(9) != 3] != 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ch.effective_channel(np.zeros((9, 16)), np.zeros(9 * 25, dtype=complex))

    @pytest.mark.parametrize("mode", ["far", "near"])
    @pytest.mark.parametrize("degree", [1, 2, 4])
    def test_identity_against_direct_oracle(self, mode, degree):
        rng = np.random.default_rng(hash((mode, degree)) % 2**32)
        for _ in range(10):
            config = ch.ScenarioConfig(
                n_users=2, n_paths=3, field_mode=mode, truncation=degree,
                user_radius_m=50.0,
            )
            scenario = ch.generate_scenario(config, seed=int(rng.integers(2**31)))
            coeffs = rng.standard_normal((9, truncation_length(degree)))
            for k in range(2):
                h_em = ch.em_user_channel(scenario.paths[k], scenario.geometry, degree)
                via_em = ch.effective_channel(coeffs, h_em)
                direct = ch.direct_channel_oracle(scenario.paths[k], scenario.geometry, coeffs)
                assert np.linalg.norm(via_em - direct) <= 1e-10 * np.linalg.norm(direct)


class TestScenarioGeneration:
    def test_default_dimensions(self):
        scenario = ch.generate_scenario(ch.ScenarioConfig(), seed=0)
        assert scenario.geometry.n_t == 9
        assert scenario.n_users == 2
        assert all(len(p) == 3 for p in scenario.paths)
        assert truncation_length(scenario.truncation) == 25
        assert scenario.em_channels().shape == (2, 225)

    def test_determinism(self):
        a = ch.generate_scenario(ch.ScenarioConfig(), seed=42)
        b = ch.generate_scenario(ch.ScenarioConfig(), seed=42)
        np.testing.assert_array_equal(a.user_positions, b.user_positions)
        for pa, pb in zip(a.paths[0], b.paths[0]):
            np.testing.assert_array_equal(pa.gains, pb.gains)
            np.testing.assert_array_equal(pa.thetas, pb.thetas)

    def test_seed_changes_draw(self):
        a = ch.generate_scenario(ch.ScenarioConfig(), seed=1)
        b = ch.generate_scenario(ch.ScenarioConfig(), seed=2)
        assert not np.allclose(a.user_positions, b.user_positions)

    def test_single_los_path_geometry(self):
        config = ch.ScenarioConfig(n_users=1, n_paths=1, field_mode="near")
        scenario = ch.generate_scenario(config, seed=7)
        path = scenario.paths[0][0]
        _, _, dists = ch.path_aods(
            scenario.geometry, scenario.user_positions[0], scenario.bs_position
        )
        np.testing.assert_allclose(path.dists, dists)
        assert path.ref_dist == pytest.approx(
            np.linalg.norm(scenario.user_positions[0] - scenario.bs_position)
        )

    def test_far_mode_paths_flagged(self):
        scenario = ch.generate_scenario(ch.ScenarioConfig(field_mode="far"), seed=3)
        assert all(p.far_field for user in scenario.paths for p in user)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            ch.ScenarioConfig(n_users=0)
        with pytest.raises(ValueError):
            ch.ScenarioConfig(field_mode="mid")
