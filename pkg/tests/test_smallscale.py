import math

import numpy as np
import pytest

from chansim6g.geometry import LosDirections
from chansim6g.largescale import LSPSet
from chansim6g.seeding import DropStreams
from chansim6g.smallscale import (gen_cluster_delays,
                                  gen_cluster_powers, gen_ray_angles,
                                  gen_xpr_phases, doppler_per_ray,
                                  generate_clusters, los_delay_scale,
                                  ray_offsets, ray_powers)
from test_largescale import make_entry

DIRS = LosDirections(aod=0.6, zod=1.5, aoa=0.6 - math.pi, zoa=math.pi - 1.5)


def make_lsps(**over):
    base = dict(ds_s=100e-9, asa_deg=30.0, asd_deg=20.0, zsa_deg=8.0,
                zsd_deg=4.0, k_db=9.0, sf_db=0.0)
    base.update(over)
    return LSPSet(**base)


def circ_spread_deg(p, ang):
    z = np.sum(p * np.exp(1j * ang)) / p.sum()
    return math.degrees(math.sqrt(-2.0 * math.log(abs(z))))


class _ConstUniform:
    """Duck-typed generator whose uniform draws are all equal."""

    def __init__(self, value):
        self.value = value

    def uniform(self, size=None):
        return np.full(size, self.value)


class TestDelays:
    def test_equal_draws_collapse_to_zero(self):
        tau = gen_cluster_delays(100e-9, 3.0, 8, _ConstUniform(0.37))
        assert np.all(tau == 0.0)

    def test_exponential_mean(self):
        # Oracle: tau' = -r DS ln U has mean r * DS.
        tau = gen_cluster_delays(100e-9, 3.0, 100_000, np.random.default_rng(4))
        assert abs(tau.mean() - 300e-9) / 300e-9 < 0.01

    def test_first_delay_zero_and_sorted(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            tau = gen_cluster_delays(50e-9, 2.3, 19, rng)
            assert tau[0] == 0.0
            assert np.all(np.diff(tau) >= 0)

    def test_los_scaling(self):
        rng_a = np.random.default_rng(21)
        rng_b = np.random.default_rng(21)
        plain = gen_cluster_delays(100e-9, 3.0, 10, rng_a)
        scaled = gen_cluster_delays(100e-9, 3.0, 10, rng_b, k_db=9.0)
        assert np.allclose(scaled, plain / los_delay_scale(9.0), rtol=1e-12)

    def test_preconditions(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            gen_cluster_delays(0.0, 3.0, 8, rng)
        with pytest.raises(ValueError):
            gen_cluster_delays(1e-7, 1.0, 8, rng)


class TestPowers:
    def test_zero_delays_equal_powers(self):
        tau = np.zeros(10)
        p = gen_cluster_powers(tau, 100e-9, 3.0, 0.0, None, "NLOS",
                               np.random.default_rng(0))
        assert np.allclose(p, 0.1, atol=1e-15)

    def test_pure_specular_limit(self):
        tau = np.linspace(0, 300e-9, 12)
        p = gen_cluster_powers(tau, 100e-9, 3.0, 3.0, 300.0, "LOS",
                               np.random.default_rng(1))
        assert p[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(p[1:] < 1e-12)

    def test_exponential_profile_slope(self):
        # Regression oracle: with zero per-cluster shadowing, log10 power is
        # affine in delay with slope -(r-1)/(r DS ln 10).
        ds, r = 100e-9, 3.0
        tau = np.sort(np.random.default_rng(2).uniform(0, 500e-9, 40))
        tau[0] = 0.0
        p = gen_cluster_powers(tau, ds, r, 0.0, None, "NLOS",
                               np.random.default_rng(3))
        slope, _ = np.polyfit(tau, np.log10(p), 1)
        assert slope == pytest.approx(-(r - 1) / (r * ds * math.log(10)), rel=1e-9)

    def test_normalization_after_k_injection(self):
        rng = np.random.default_rng(5)
        for k_db in (-5.0, 0.0, 9.0, 20.0):
            tau = gen_cluster_delays(65e-9, 2.5, 15, rng)
            p = gen_cluster_powers(tau, 65e-9, 2.5, 3.0, k_db, "LOS", rng)
            assert abs(p.sum() - 1.0) <= 1e-12
            k_lin = 10.0 ** (k_db / 10.0)
            assert p[0] >= k_lin / (k_lin + 1.0) - 1e-12


class TestRayOffsets:
    def test_standard_table(self):
        offs = ray_offsets(20)
        assert offs.mean() == 0.0
        assert np.sqrt(np.mean(offs ** 2)) == pytest.approx(1.0, abs=1e-3)

    def test_generic_m(self):
        offs = ray_offsets(8)
        assert offs.mean() == pytest.approx(0.0, abs=1e-12)
        assert np.sqrt(np.mean(offs ** 2)) == pytest.approx(1.0, rel=1e-9)

    def test_single_ray(self):
        assert ray_offsets(1).tolist() == [0.0]


class TestRayAngles:
    def test_los_forces_geometric_direction(self):
        entry = make_entry(n_clusters=1)
        lsps = make_lsps()
        ang = gen_ray_angles(lsps, np.array([1.0]), DIRS, entry, "LOS",
                             np.random.default_rng(0))
        assert ang.aoa[0, 0] == DIRS.aoa
        assert ang.zoa[0, 0] == DIRS.zoa
        assert ang.aod[0, 0] == DIRS.aod

    def test_circular_spread_recovers_configured_asa(self):
        entry = make_entry(n_clusters=16, c_asa_deg=8.0)
        lsps = make_lsps(asa_deg=30.0)
        rng = np.random.default_rng(7)
        spreads = []
        for _ in range(200):
            tau = gen_cluster_delays(lsps.ds_s, entry.delay_scaling,
                                     entry.n_clusters, rng)
            p = gen_cluster_powers(tau, lsps.ds_s, entry.delay_scaling,
                                   entry.per_cluster_shadow_db, None, "NLOS", rng)
            ang = gen_ray_angles(lsps, p, DIRS, entry, "NLOS", rng)
            rp = ray_powers(p, entry.rays_per_cluster)
            spreads.append(circ_spread_deg(rp.ravel(), ang.aoa.ravel()))
        spreads = np.array(spreads)
        # Per-drop spread calibration makes every drop land on the target.
        assert np.all(np.abs(spreads - 30.0) < 0.05)

    def test_angles_wrapped(self):
        entry = make_entry(n_clusters=19)
        lsps = make_lsps(asa_deg=80.0, zsa_deg=40.0)
        rng = np.random.default_rng(9)
        for _ in range(20):
            tau = gen_cluster_delays(lsps.ds_s, 2.3, 19, rng)
            p = gen_cluster_powers(tau, lsps.ds_s, 2.3, 3.0, None, "NLOS", rng)
            ang = gen_ray_angles(lsps, p, DIRS, entry, "NLOS", rng)
            assert np.all((ang.aoa > -np.pi) & (ang.aoa <= np.pi))
            assert np.all((ang.zoa >= 0) & (ang.zoa <= np.pi))
            assert np.all((ang.zod >= 0) & (ang.zod <= np.pi))


class TestXprPhases:
    def test_degenerate_xpr(self):
        entry = make_entry(xpr_mu_db=8.0, xpr_sigma_db=0.0)
        kappa, _ = gen_xpr_phases(entry, 4, 20, np.random.default_rng(0))
        assert np.all(kappa == 10.0 ** 0.8)

    def test_phase_uniformity_chi2(self):
        from scipy.stats import chisquare
        entry = make_entry()
        rng = np.random.default_rng(23)
        _, phases = gen_xpr_phases(entry, 100, 25, rng)
        draws = np.concatenate([gen_xpr_phases(entry, 100, 25, rng)[1].ravel()
                                for _ in range(100)])
        counts, _ = np.histogram(draws, bins=36, range=(-np.pi, np.pi))
        assert chisquare(counts).pvalue > 0.01

    def test_phase_range(self):
        _, phases = gen_xpr_phases(make_entry(), 10, 20, np.random.default_rng(1))
        assert np.all((phases > -np.pi) & (phases <= np.pi))


class TestDoppler:
    def test_zero_velocity(self):
        arrivals = np.random.default_rng(0).normal(size=(4, 20, 3))
        assert np.all(doppler_per_ray((0, 0, 0), arrivals, 28e9) == 0.0)

    def test_aligned_velocity(self):
        v = np.array([30.0, 0.0, 0.0])
        arrival = np.array([[[1.0, 0.0, 0.0]]])
        nu = doppler_per_ray(v, arrival, 28e9)
        assert nu[0, 0] == pytest.approx(2800.0, rel=1e-12)

    def test_orthogonal_velocity(self):
        nu = doppler_per_ray((0.0, 30.0, 0.0), np.array([[[1.0, 0.0, 0.0]]]), 28e9)
        assert nu[0, 0] == 0.0


class TestGenerateClusters:
    def _drop(self, seed=0, state="LOS", entry=None, lsps=None):
        entry = entry or make_entry(n_clusters=16)
        lsps = lsps or make_lsps()
        return generate_clusters(entry, lsps, DIRS, state, (3.0, 0.0, 0.0),
                                 28e9, DropStreams(seed, 0))

    def test_invariants(self):
        for seed in range(30):
            cs = self._drop(seed)
            assert abs(cs.powers.sum() - 1.0) <= 1e-12
            assert cs.delays_s[0] == 0.0
            assert np.all(np.diff(cs.delays_s) >= 0)
            assert np.all(cs.kappa > 0)
            assert abs(cs.ray_powers.sum() - 1.0) <= 1e-9

    def test_bit_reproducible(self):
        a = self._drop(42)
        b = self._drop(42)
        assert np.array_equal(a.delays_s, b.delays_s)
        assert np.array_equal(a.aoa, b.aoa)
        assert np.array_equal(a.phases, b.phases)

    def test_delay_spread_ensemble(self):
        entry = make_entry(n_clusters=16)
        lsps = make_lsps(ds_s=100e-9)
        med = np.median([
            _rms_ds(cs.powers, cs.delays_s)
            for cs in (generate_clusters(entry, lsps, DIRS, "NLOS",
                                         (0, 0, 0), 28e9, DropStreams(7, d))
                       for d in range(3000))])
        assert abs(med - 100e-9) / 100e-9 < 0.15

    def test_specular_power_share(self):
        cs = self._drop(3, state="LOS")
        k_lin = 10.0 ** 0.9
        assert cs.ray_powers[0, 0] >= k_lin / (k_lin + 1.0) - 1e-12


def _rms_ds(p, tau):
    m1 = np.sum(p * tau) / p.sum()
    m2 = np.sum(p * tau ** 2) / p.sum()
    return math.sqrt(max(m2 - m1 * m1, 0.0))
