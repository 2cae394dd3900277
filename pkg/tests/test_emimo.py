import math

import numpy as np
import pytest

from chansim6g.constants import C_LIGHT, wavelength
from chansim6g.emimo import (PathGeometry, SnsMask, assemble_sns_cfr,
                             gen_sns_mask, path_cfr, paths_from_clusters,
                             planar_manifold, spherical_manifold, sns_cfr_band)
from chansim6g.geometry import build_ula, rayleigh_distance


def make_paths(sources, alphas=None, taus=None):
    k = len(sources)
    alphas = alphas if alphas is not None else np.ones(k)
    taus = taus if taus is not None else np.zeros(k)
    return [PathGeometry(source=np.asarray(s, dtype=float), alpha=complex(a),
                         tau_s=float(t))
            for s, a, t in zip(sources, alphas, taus)]


def phase_discrepancy(array, distance, f):
    """Sup over elements of |spherical phase - planar phase| for a broadside
    source at the given range."""
    paths = make_paths([[distance, 0.0, 0.0]])
    sph = spherical_manifold(paths, array, f)
    pla = planar_manifold(paths, array, f)
    return np.max(np.abs(np.angle(sph[:, 0] * np.conj(pla[:, 0]))))


class TestSphericalManifold:
    def test_reference_element_identity(self):
        arr = build_ula(1, spacing=0.005)
        paths = make_paths([[3.0, 4.0, 0.0], [0.0, 7.0, 1.0]])
        a = spherical_manifold(paths, arr, 28e9)
        assert np.all(a == 1.0 + 0.0j)

    def test_far_field_convergence(self):
        f = 28e9
        arr = build_ula(256, center_freq=f)
        rd = rayleigh_distance(arr.aperture, wavelength(f))
        assert phase_discrepancy(arr, 100.0 * rd, f) < math.pi / 80

    def test_rayleigh_distance_phase(self):
        # The aperture-edge phase error at the near/far boundary is pi/8.
        f = 28e9
        arr = build_ula(256, center_freq=f)
        rd = rayleigh_distance(arr.aperture, wavelength(f))
        assert phase_discrepancy(arr, rd, f) == pytest.approx(math.pi / 8, rel=0.02)

    def test_discrepancy_strictly_decreasing(self):
        f = 28e9
        arr = build_ula(256, center_freq=f)
        rd = rayleigh_distance(arr.aperture, wavelength(f))
        vals = [phase_discrepancy(arr, mult * rd, f) for mult in (1, 10, 100)]
        assert vals[0] > vals[1] > vals[2]

    def test_source_on_element_rejected(self):
        arr = build_ula(2, spacing=1.0)
        paths = make_paths([arr.element_positions[0]])
        with pytest.raises(ValueError):
            spherical_manifold(paths, arr, 28e9)


class TestSnsMask:
    def test_infinite_region_all_visible(self):
        mask = gen_sns_mask(256, 8, 10 ** 9, np.random.default_rng(0))
        assert np.all(mask.s == 1.0)

    def test_mean_run_length(self):
        # Geometric sojourn oracle: flip probability 1/16 gives mean runs of
        # 16 elements.
        mask = gen_sns_mask(1_000_000, 2, 16, np.random.default_rng(1))
        col = mask.s[:, 1].astype(bool)
        changes = np.nonzero(np.diff(col))[0]
        runs = np.diff(np.concatenate([[0], changes + 1, [col.size]]))
        assert abs(runs.mean() - 16.0) < 0.5

    def test_first_path_always_visible(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            mask = gen_sns_mask(64, 5, 4, rng)
            assert np.all(mask.s[:, 0] == 1.0)

    def test_entries_binary(self):
        mask = gen_sns_mask(128, 6, 8, np.random.default_rng(3))
        assert set(np.unique(mask.s)) <= {0.0, 1.0}

    def test_invalid_region(self):
        with pytest.raises(ValueError):
            gen_sns_mask(16, 2, 0, np.random.default_rng(0))


class TestAssembly:
    def test_identity_mask_single_path(self):
        arr = build_ula(8, spacing=0.005)
        paths = make_paths([[5.0, 2.0, 1.0]])
        man = spherical_manifold(paths, arr, 28e9)
        mask = SnsMask(s=np.ones((8, 1)))
        out = assemble_sns_cfr(mask, man, path_cfr(paths, 28e9))
        assert np.allclose(out, man[:, 0], atol=1e-15)

    def test_zero_mask(self):
        arr = build_ula(8, spacing=0.005)
        paths = make_paths([[5.0, 2.0, 1.0], [1.0, -3.0, 0.5]])
        man = spherical_manifold(paths, arr, 28e9)
        mask = SnsMask(s=np.zeros((8, 2)))
        out = assemble_sns_cfr(mask, man, path_cfr(paths, 28e9))
        assert np.all(out == 0.0)

    def test_triple_loop_oracle(self):
        rng = np.random.default_rng(4)
        arr = build_ula(16, spacing=0.004)
        paths = make_paths(rng.uniform(2, 20, (3, 3)),
                           alphas=rng.normal(size=3) + 1j * rng.normal(size=3),
                           taus=rng.uniform(0, 1e-7, 3))
        f = 28e9
        mask = SnsMask(s=(rng.uniform(size=(16, 3)) > 0.4).astype(float))
        man = spherical_manifold(paths, arr, f)
        cfr = path_cfr(paths, f)
        fast = assemble_sns_cfr(mask, man, cfr)
        slow = np.zeros(16, dtype=complex)
        for m in range(16):
            for k in range(3):
                slow[m] += mask.s[m, k] * man[m, k] * cfr[k]
        assert np.max(np.abs(fast - slow)) / np.max(np.abs(slow)) < 1e-12

    def test_dimension_mismatch(self):
        mask = SnsMask(s=np.ones((4, 2)))
        with pytest.raises(ValueError):
            assemble_sns_cfr(mask, np.ones((4, 3), dtype=complex),
                             np.ones(3, dtype=complex))

    def test_band_matches_per_frequency_assembly(self):
        rng = np.random.default_rng(5)
        arr = build_ula(32, spacing=0.005)
        paths = make_paths(rng.uniform(3, 30, (4, 3)),
                           alphas=rng.normal(size=4) + 1j * rng.normal(size=4),
                           taus=rng.uniform(1e-8, 2e-7, 4))
        mask = SnsMask(s=(rng.uniform(size=(32, 4)) > 0.3).astype(float))
        freqs = 28e9 + np.linspace(-1e8, 1e8, 9)
        band = sns_cfr_band(paths, arr, mask, freqs)
        for i, f in enumerate(freqs):
            ref = assemble_sns_cfr(mask, spherical_manifold(paths, arr, f),
                                   path_cfr(paths, f))
            assert np.max(np.abs(band[:, i] - ref)) < 1e-9 * np.max(np.abs(ref))


class TestPathReconstruction:
    def _clusters(self):
        from test_cir import make_clusters
        rng = np.random.default_rng(6)
        delays = np.array([0.0, 40e-9, 90e-9])
        powers = np.array([0.6, 0.3, 0.1])
        return make_clusters(delays, powers, aoa=rng.uniform(-2, 2, 3),
                             zoa=rng.uniform(1.0, 2.0, 3), m=4, rng=rng,
                             state="LOS", specular=True)

    def test_direct_path_at_link_distance(self):
        cs = self._clusters()
        paths = paths_from_clusters(cs, 14.14)
        assert np.linalg.norm(paths[0].source) == pytest.approx(14.14, rel=1e-12)
        assert paths[0].tau_s == pytest.approx(14.14 / C_LIGHT, rel=1e-12)

    def test_scatterer_ranges_positive_and_consistent(self):
        cs = self._clusters()
        d_link = 14.14
        paths = paths_from_clusters(cs, d_link)
        for k, p in enumerate(paths):
            r = np.linalg.norm(p.source)
            assert r > 0
            if k > 0:
                expected = 0.5 * (d_link + C_LIGHT * cs.delays_s[k])
                assert r == pytest.approx(expected, rel=1e-12)
            assert p.tau_s == pytest.approx(d_link / C_LIGHT + cs.delays_s[k],
                                            rel=1e-12)

    def test_amplitudes_carry_cluster_power(self):
        cs = self._clusters()
        paths = paths_from_clusters(cs, 14.14)
        for k, p in enumerate(paths):
            assert abs(p.alpha) == pytest.approx(math.sqrt(cs.powers[k]), rel=1e-12)


class TestBirthCorrelationEffect:
    def test_birth_increases_correlation(self):
        # Paired comparison: making path 2 visible at the probe element
        # (a birth) strictly increases the median correlation estimate there.
        rng = np.random.default_rng(7)
        arr = build_ula(64, spacing=0.005)
        probe = 48
        freqs = 28e9 + np.linspace(-1e8, 1e8, 32)
        deltas = []
        for _ in range(60):
            paths = make_paths(rng.uniform(3, 30, (3, 3)),
                               alphas=rng.normal(size=3) + 1j * rng.normal(size=3),
                               taus=np.concatenate([[0.0], rng.uniform(1e-8, 2e-7, 2)]))
            s = np.ones((64, 3))
            s[probe:, 2] = 0.0                    # path 2 dies before the probe
            dead = sns_cfr_band(paths, arr, SnsMask(s=s), freqs)
            s2 = s.copy()
            s2[probe, 2] = 1.0                    # birth at the probe element
            born = sns_cfr_band(paths, arr, SnsMask(s=s2), freqs)
            from chansim6g.analysis import array_cross_correlation
            rho_dead, _ = array_cross_correlation(dead)
            rho_born, _ = array_cross_correlation(born)
            deltas.append(rho_born[probe] - rho_dead[probe])
        assert np.median(deltas) > 0.0
