import math

import numpy as np
import pytest

from chansim6g.constants import Z0_OHM, wavelength
from chansim6g.geometry import single_element
from chansim6g.ris import (GRAZING_LIMIT_RAD, RisPanel, cascade_cir,
                           cascade_cir_multi, element_pattern,
                           element_reflection, overall_pattern,
                           overall_pattern_pairs, rotation_facing,
                           rotation_with_incidence, steering_codebook,
                           table_codebook, uniform_codebook)
from test_cir import make_clusters

F = 28e9
LAM = wavelength(F)


def reflection_oracle_v(z_e, z_m, theta):
    """Direct evaluation of the load-impedance V formula."""
    c = math.cos(theta)
    return -Z0_OHM / (2 * z_e * c + Z0_OHM) + (z_m * c) / (z_m * c + 2 * Z0_OHM)


class TestElementReflection:
    def test_pec_limit_exact(self):
        assert element_reflection(0.0, 0.0, 0.3, "V") == -1.0
        assert element_reflection(0.0, 0.0, 0.3, "H") == pytest.approx(1.0, abs=1e-12)

    def test_magnetic_wall_limit(self):
        assert element_reflection(float("inf"), float("inf"), 0.5, "V") == 1.0
        assert element_reflection(float("inf"), float("inf"), 0.5, "H") == -1.0

    def test_angle_dependence_and_oracle(self):
        z_e, z_m = 150.0 + 20.0j, 90.0 - 10.0j
        g0 = element_reflection(z_e, z_m, 0.0, "V")
        g60 = element_reflection(z_e, z_m, math.radians(60.0), "V")
        assert g0 != g60
        for th in (0.0, 0.4, 1.0, 1.4):
            assert element_reflection(z_e, z_m, th, "V") == pytest.approx(
                reflection_oracle_v(z_e, z_m, th), abs=1e-12)

    def test_v_h_coincide_at_normal_incidence(self):
        # Same physics, opposite basis sign through the specular flip.
        z_e, z_m = 240.0, 510.0
        gv = element_reflection(z_e, z_m, 0.0, "V")
        gh = element_reflection(z_e, z_m, 0.0, "H")
        assert gv == pytest.approx(-gh, abs=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            element_reflection(100.0, 100.0, math.pi / 2, "V")


def pec_panel(**kw):
    return RisPanel(nx=1, ny=1, d_element=LAM / 2, z_e=0.0, z_m=0.0, **kw)


class TestElementPattern:
    def test_r_independence(self):
        panel = pec_panel()
        f1 = element_pattern(panel, (0.3, 0.2), (0.5, 1.0), F, r_eval=10.0)
        f2 = element_pattern(panel, (0.3, 0.2), (0.5, 1.0), F, r_eval=100.0)
        assert np.max(np.abs(f1 - f2)) / np.max(np.abs(f1)) < 1e-6

    def test_pec_specular_maximum(self):
        # Normal incidence on a PEC element: the outgoing hemisphere peak
        # sits at the specular (normal) direction.
        panel = pec_panel()
        zen = np.radians(np.arange(0.0, 88.0, 2.0))
        az = np.radians(np.arange(0.0, 360.0, 10.0))
        zz, aa = np.meshgrid(zen, az, indexing="ij")
        blocks = element_pattern(panel, (0.0, 0.0), (zz, aa), F)
        mag = np.abs(blocks[..., 0, 0])
        imax = np.unravel_index(np.argmax(mag), mag.shape)
        assert zen[imax[0]] == 0.0

    def test_cross_polar_zero_at_normal_incidence(self):
        panel = pec_panel()
        block = element_pattern(panel, (0.0, 0.0), (0.0, 0.0), F)
        assert abs(block[0, 1]) < 1e-12 * abs(block[0, 0])
        assert abs(block[1, 0]) < 1e-12 * abs(block[1, 1])

    def test_codebook_phase_is_pure_rotation(self):
        panel = pec_panel()
        base = element_pattern(panel, (0.4, 0.1), (0.6, 2.0), F)
        shifted = element_pattern(panel, (0.4, 0.1), (0.6, 2.0), F,
                                  codebook_phase=1.1)
        assert np.allclose(shifted, np.exp(1.1j) * base, atol=1e-14)

    def test_reciprocity_swap(self):
        # Unit-magnitude ideal element: pattern magnitude is symmetric under
        # exchanging the incident and outgoing directions with transposed
        # polarization indices.
        panel = RisPanel(nx=1, ny=1, d_element=LAM / 2, ideal=True)
        a, b = (0.35, 0.7), (0.9, -1.3)
        f_ab = element_pattern(panel, a, b, F)
        f_ba = element_pattern(panel, b, a, F)
        assert np.allclose(np.abs(f_ab), np.abs(f_ba.swapaxes(-1, -2)), rtol=1e-9)


class TestOverallPattern:
    def test_coherent_peak_scales_with_elements(self):
        # Uniform codebook, specular direction: all position phases align.
        panel = RisPanel(nx=32, ny=32, d_element=LAM / 2, z_e=0.0, z_m=0.0)
        single = pec_panel()
        inc = (math.radians(25.0), math.radians(200.0))
        spec = (math.radians(25.0), math.radians(20.0))
        full = overall_pattern(panel, uniform_codebook(), inc, spec, F)
        one = element_pattern(single, inc, spec, F)
        assert np.max(np.abs(full)) == pytest.approx(
            1024.0 * np.max(np.abs(one)), rel=1e-12)

    def test_brute_force_double_sum(self):
        panel = RisPanel(nx=6, ny=5, d_element=LAM / 2, z_e=120.0, z_m=300.0)
        single = RisPanel(nx=1, ny=1, d_element=LAM / 2, z_e=120.0, z_m=300.0)
        inc = (0.5, 2.4)
        out = (0.8, -0.4)
        cb = steering_codebook((0.4, 0.1), (0.7, 0.5))
        fast = overall_pattern(panel, cb, inc, out, F)
        elem = element_pattern(single, inc, out, F)
        k = 2 * math.pi / LAM
        u = (np.array([math.sin(inc[0]) * math.cos(inc[1]),
                       math.sin(inc[0]) * math.sin(inc[1])])
             + np.array([math.sin(out[0]) * math.cos(out[1]),
                         math.sin(out[0]) * math.sin(out[1])]))
        acc = 0.0j
        for x in range(1, 7):
            for y in range(1, 6):
                d = np.array([(x - 3.5) * LAM / 2, (y - 3.0) * LAM / 2])
                beta = -k * (cb.design_u[0] * d[0] + cb.design_u[1] * d[1])
                acc += np.exp(1j * (k * (u @ d) + beta))
        assert np.allclose(fast, elem * acc, rtol=1e-12)

    def test_table_codebook_matches_steering(self):
        panel = RisPanel(nx=4, ny=4, d_element=LAM / 2, ideal=True)
        cb = steering_codebook((0.3, 0.0), (0.6, 1.0))
        k = 2 * math.pi / LAM
        gx, gy = panel.grid_coords()
        phases = -k * (cb.design_u[0] * gx[:, None] + cb.design_u[1] * gy[None, :])
        tab = table_codebook(phases)
        inc, out = (0.4, 0.2), (0.7, 1.5)
        assert np.allclose(overall_pattern(panel, cb, inc, out, F),
                           overall_pattern(panel, tab, inc, out, F), rtol=1e-9)

    def test_steering_argmax_hits_target(self):
        panel = RisPanel(nx=32, ny=32, d_element=LAM / 2, ideal=True)
        inc = (math.radians(25.0), math.radians(190.0))
        target = (math.radians(35.0), math.radians(40.0))
        cb = steering_codebook(inc, target)
        zen = np.radians(np.arange(0.5, 88.0, 1.0))
        az = np.radians(np.arange(-180.0, 180.0, 1.0))
        zz, aa = np.meshgrid(zen, az, indexing="ij")
        pat = overall_pattern_pairs(panel, cb, np.array([inc[0]]),
                                    np.array([inc[1]]), zz.ravel(), aa.ravel(), F)
        mag = np.abs(pat[0, :, 0, 0]).reshape(zz.shape)
        imax = np.unravel_index(np.argmax(mag), mag.shape)
        assert abs(math.degrees(zen[imax[0]] - target[0])) <= 1.0
        assert abs(math.degrees(az[imax[1]] - target[1])) <= 1.0

    def test_behind_panel_zero(self):
        panel = pec_panel()
        block = overall_pattern(panel, uniform_codebook(),
                                (GRAZING_LIMIT_RAD + 0.05, 0.0), (0.3, 0.0), F)
        assert np.all(block == 0.0)


def single_ray_leg(aoa, zoa, aod, zod, tau=0.0, power=1.0, doppler=0.0):
    return make_clusters([tau] if tau == 0 else [0.0], [power], aoa=[aoa],
                         zoa=[zoa], aod=[aod], zod=[zod], kappa=1e15,
                         doppler=doppler)


class TestCascade:
    def test_degenerate_single_path(self):
        # One ray per leg, isotropic antennas, 1x1 ideal panel: coefficient
        # magnitude is |F_ris| sqrt(P1 P2) at the leg angles, delay tau1+tau2.
        panel = RisPanel(nx=1, ny=1, d_element=LAM / 2, ideal=True)
        leg1 = make_clusters([0.0], [1.0], aoa=[0.3], zoa=[1.2], aod=[0.1],
                             zod=[1.5], kappa=1e15)
        leg2 = make_clusters([0.0], [1.0], aoa=[-0.7], zoa=[1.4], aod=[0.9],
                             zod=[0.8], kappa=1e15)
        cir = cascade_cir(leg1, leg2, panel, uniform_codebook(),
                          single_element(), single_element(), F)
        f_ris = overall_pattern(panel, uniform_codebook(),
                                (leg1.zoa[0, 0], leg1.aoa[0, 0]),
                                (leg2.zod[0, 0], leg2.aod[0, 0]), F)
        assert cir.coefficients.shape == (1, 1, 1, 1)
        assert abs(cir.coefficients[0, 0, 0, 0]) == pytest.approx(
            abs(f_ris[0, 0]), rel=1e-9)
        assert cir.tap_delays_s[0] == 0.0

    def test_additive_delays(self):
        rng = np.random.default_rng(0)
        leg1 = make_clusters([0.0, 30e-9], [0.6, 0.4], aoa=[0.1, 0.5],
                             zoa=[1.3, 1.1], m=2, rng=rng)
        leg2 = make_clusters([0.0, 50e-9], [0.7, 0.3], aoa=[0.2, -0.2],
                             zoa=[1.2, 1.4], m=2, rng=rng)
        panel = RisPanel(nx=4, ny=4, d_element=LAM / 2, ideal=True)
        cir = cascade_cir(leg1, leg2, panel, uniform_codebook(),
                          single_element(), single_element(), F)
        expected = np.sort((leg1.delays_s[:, None] + leg2.delays_s).ravel())
        assert np.allclose(cir.tap_delays_s, expected)
        assert cir.tap_delays_s[0] == 0.0

    def test_brute_force_cascade_oracle(self):
        # 3 x 4 cluster pairs with 2 rays each: nested-loop chain evaluation
        # against the vectorized cascade.
        rng = np.random.default_rng(1)
        panel = RisPanel(nx=3, ny=3, d_element=LAM / 2, z_e=90.0, z_m=400.0)
        cb = steering_codebook((0.3, 0.1), (0.5, 0.4))
        d1 = np.sort(rng.uniform(0, 1e-7, 3))
        d2 = np.sort(rng.uniform(0, 1e-7, 4))
        leg1 = make_clusters(d1 - d1[0], rng.dirichlet(np.ones(3)),
                             aoa=rng.uniform(-1, 1, 3),
                             zoa=rng.uniform(0.6, 1.4, 3),
                             aod=rng.uniform(-1, 1, 3),
                             zod=rng.uniform(0.6, 1.4, 3), m=2,
                             kappa=6.0, rng=rng)
        leg2 = make_clusters(d2 - d2[0], rng.dirichlet(np.ones(4)),
                             aoa=rng.uniform(-1, 1, 4),
                             zoa=rng.uniform(0.6, 1.4, 4),
                             aod=rng.uniform(-1, 1, 4),
                             zod=rng.uniform(0.6, 1.4, 4), m=2,
                             kappa=6.0, rng=rng)
        cir = cascade_cir(leg1, leg2, panel, cb, single_element(),
                          single_element(), F)

        def pol(leg, n, m):
            ph = leg.phases[n, m]
            inv = 1.0 / math.sqrt(leg.kappa[n, m])
            return np.array([[np.exp(1j * ph[0]), inv * np.exp(1j * ph[1])],
                             [inv * np.exp(1j * ph[2]), np.exp(1j * ph[3])]])

        taps = np.zeros((3, 4), dtype=complex)
        for n1 in range(3):
            for m1 in range(2):
                for n2 in range(4):
                    for m2 in range(2):
                        f_ris = overall_pattern(
                            panel, cb, (leg1.zoa[n1, m1], leg1.aoa[n1, m1]),
                            (leg2.zod[n2, m2], leg2.aod[n2, m2]), F)
                        amp = math.sqrt(leg1.ray_powers[n1, m1]
                                        * leg2.ray_powers[n2, m2])
                        a = pol(leg1, n1, m1) @ np.array([1.0, 0.0])
                        b = np.array([1.0, 0.0]) @ pol(leg2, n2, m2)
                        taps[n1, n2] += amp * (b @ f_ris.T @ a)
        delays = (leg1.delays_s[:, None] + leg2.delays_s).ravel()
        order = np.argsort(delays, kind="stable")
        expected = taps.ravel()[order]
        got = cir.coefficients[0, 0, 0, :]
        assert np.max(np.abs(got - expected)) <= 1e-12 * np.max(np.abs(expected))

    def test_doppler_from_second_leg_only(self):
        leg1 = make_clusters([0.0], [1.0], aoa=[0.3], zoa=[1.2], aod=[0.1],
                             zod=[1.1], doppler=999.0)
        leg2 = make_clusters([0.0], [1.0], aoa=[0.4], zoa=[1.3], aod=[0.2],
                             zod=[1.2], doppler=120.0)
        panel = RisPanel(nx=2, ny=2, d_element=LAM / 2, ideal=True)
        times = np.array([0.0, 1e-3, 2e-3])
        cir = cascade_cir(leg1, leg2, panel, uniform_codebook(),
                          single_element(), single_element(), F, times=times)
        h = cir.coefficients[:, 0, 0, 0]
        phase_step = np.angle(h[1] / h[0])
        assert phase_step == pytest.approx(
            2 * math.pi * 120.0 * 1e-3, abs=1e-9)

    def test_multi_panel_matches_single(self):
        rng = np.random.default_rng(2)
        leg1 = make_clusters([0.0], [1.0], aoa=[0.3], zoa=[1.2], aod=[0.1],
                             zod=[1.1], m=3, rng=rng)
        leg2 = make_clusters([0.0], [1.0], aoa=[0.4], zoa=[1.3], aod=[0.2],
                             zod=[1.2], m=3, rng=rng)
        ni = RisPanel(nx=4, ny=4, d_element=LAM / 2, z_e=150.0, z_m=900.0)
        ideal = RisPanel(nx=4, ny=4, d_element=LAM / 2, ideal=True)
        cb = uniform_codebook()
        pair = cascade_cir_multi(leg1, leg2, [ni, ideal], cb, single_element(),
                                 single_element(), F)
        solo_ni = cascade_cir(leg1, leg2, ni, cb, single_element(),
                              single_element(), F)
        assert np.abs(solo_ni.coefficients).max() > 0
        assert np.array_equal(pair[0].coefficients, solo_ni.coefficients)
        assert pair[1].meta["ideal_panel"]


class TestRotations:
    def test_rotation_facing_maps_normal_to_z(self):
        rot = np.asarray(rotation_facing([1.0, 2.0, 3.0])).reshape(3, 3)
        n = np.array([1.0, 2.0, 3.0]) / math.sqrt(14.0)
        assert np.allclose(rot @ n, [0, 0, 1], atol=1e-12)
        assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-12)

    def test_rotation_with_incidence(self):
        v1 = np.array([1.0, 0.0, 0.0])
        v2 = np.array([0.0, 1.0, 0.0])
        rot = np.asarray(rotation_with_incidence(v1, v2, math.radians(85.0)))
        rot = rot.reshape(3, 3)
        local_v1 = rot @ v1
        zen = math.degrees(math.acos(local_v1[2]))
        assert zen == pytest.approx(85.0, abs=1e-9)
        assert (rot @ v2)[2] > 0.0  # second endpoint stays in front


class TestPairedComparison:
    def test_nonideal_never_beats_ideal(self):
        import chansim6g as c
        cfg = c.load_preset("ris")
        for d in range(60):
            m = c.run_drop(cfg, d).metrics
            assert m["snr_gap_db"] >= 0.0

    def test_snr_ordering_with_asa(self):
        import chansim6g as c
        medians = {}
        for asa in (1.0, 5.0, 10.0):
            cfg = c.load_preset("ris")
            cfg.feature_params["ris"]["asa_deg"] = asa
            snr = [c.run_drop(cfg, d).metrics["snr_nonideal_db"]
                   for d in range(150)]
            medians[asa] = np.median(snr)
        assert medians[1.0] > medians[5.0] > medians[10.0]

    def test_cascade_pathloss_budget(self):
        # Ideal unit panel, single paths: end-to-end dB loss after large-scale
        # application is the sum of the two legs' losses.
        from chansim6g.analysis import rsrp
        from chansim6g.cir import apply_large_scale
        from chansim6g.pathloss import PathLossSample, pl_ci
        panel = RisPanel(nx=1, ny=1, d_element=LAM / 2, ideal=True)
        leg1 = make_clusters([0.0], [1.0], aoa=[0.3], zoa=[1.2], aod=[0.1],
                             zod=[1.1], kappa=1e15)
        leg2 = make_clusters([0.0], [1.0], aoa=[0.4], zoa=[1.3], aod=[0.2],
                             zod=[1.2], kappa=1e15)
        cir = cascade_cir(leg1, leg2, panel, uniform_codebook(),
                          single_element(), single_element(), F)
        pl1 = pl_ci(18.0, F, 2.0)
        pl2 = pl_ci(25.0, F, 2.0)
        out = apply_large_scale(cir, PathLossSample(pl1 + pl2, 0.0, "CI"))
        assert rsrp(cir) - rsrp(out) == pytest.approx(pl1 + pl2, abs=1e-9)
