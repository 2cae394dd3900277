"""Multi-drop campaign orchestration: per-drop pipelines for every feature,
deterministic seeding, file output and metric collection.

Drops are schedule-independent: each consumes only its own child rng streams
and writes its own tensor file, so serial and parallel runs produce
byte-identical outputs.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis, emimo, isac, ris, sagin, thz
from .cir import CirTensor, apply_large_scale, synthesize_cir, write_cir
from .config import ScenarioConfig, config_hash
from .constants import wavelength
from .geometry import Position3D, assign_link_state, los_directions
from .largescale import generate_lsps, lookup_lsp_table, scenario_los_curve, \
    scenario_pathloss
from .pathloss import PathLossSample, pl_ci, pl_radar_echo
from .seeding import DropStreams
from .smallscale import generate_clusters
from .analysis import circular_angular_spread, gini_index, rms_delay_spread, rsrp


@dataclass
class DropResult:
    drop: int
    tensors: dict      # file suffix -> CirTensor
    metrics: dict


def _sample_times(cfg: ScenarioConfig) -> np.ndarray:
    return np.arange(cfg.time_samples, dtype=np.float64) * cfg.time_spacing_s


def _link_state(cfg: ScenarioConfig, streams: DropStreams) -> str:
    if cfg.link_state is not None:
        return cfg.link_state
    d2d = math.hypot(cfg.ue_position[0] - cfg.bs_position[0],
                     cfg.ue_position[1] - cfg.bs_position[1])
    curve = scenario_los_curve(cfg.scenario)
    return assign_link_state(streams.get("link_state"), curve=curve,
                             distance_2d=d2d).state


def _terrestrial_pl(cfg: ScenarioConfig, state: str, sf_db: float) -> PathLossSample:
    params = scenario_pathloss(cfg.scenario, state)
    d3d = max(cfg.bs_position3d().distance_to(cfg.ue_position3d()), 1.0)
    pl = pl_ci(d3d, cfg.center_freq_hz, params["alpha"])
    return PathLossSample(pl_db=pl, shadow_db=sf_db, model="CI")


def _base_metrics(cfg: ScenarioConfig, clusters, cir: CirTensor) -> dict:
    return {
        "ds_ns": rms_delay_spread(clusters.powers, clusters.delays_s) * 1e9,
        "asa_deg": circular_angular_spread(clusters.ray_powers.ravel(),
                                           clusters.aoa.ravel()),
        "gini": gini_index(clusters.ray_powers.ravel()),
        "rsrp_dbm": rsrp(cir, cfg.tx_power_dbm),
        "n_clusters": clusters.n_clusters,
    }


def _run_standard(cfg: ScenarioConfig, streams: DropStreams) -> DropResult:
    state = _link_state(cfg, streams)
    entry = lookup_lsp_table(cfg.scenario, state, cfg.center_freq_hz)
    lsps = generate_lsps(entry, streams.get("lsp"))
    dirs = los_directions(cfg.bs_position3d(), cfg.ue_position3d())
    clusters = generate_clusters(entry, lsps, dirs, state, cfg.ue_velocity,
                                 cfg.center_freq_hz, streams)
    if cfg.feature == "THZ":
        # Config value wins over the table entry's intra-cluster K.
        sparsity_k_db = cfg.feature_block().get("intra_cluster_k_db",
                                                entry.intra_cluster_k_db)
        if sparsity_k_db is not None:
            clusters = thz.apply_sparsity(clusters, float(sparsity_k_db))
    cir = synthesize_cir(clusters, tx=cfg.build_array(cfg.bs_array),
                         rx=cfg.build_array(cfg.ue_array),
                         f_hz=cfg.center_freq_hz, times=_sample_times(cfg))
    cir = apply_large_scale(cir, _terrestrial_pl(cfg, state, lsps.sf_db))
    metrics = _base_metrics(cfg, clusters, cir)
    metrics["state"] = state
    return DropResult(drop=streams.drop, tensors={"": cir}, metrics=metrics)


def _run_emimo(cfg: ScenarioConfig, streams: DropStreams) -> DropResult:
    blk = cfg.feature_block()
    region = int(blk.get("stationary_region", 16))
    n_freq = int(blk.get("freq_samples", 64))
    state = _link_state(cfg, streams)
    entry = lookup_lsp_table(cfg.scenario, state, cfg.center_freq_hz)
    lsps = generate_lsps(entry, streams.get("lsp"))
    dirs = los_directions(cfg.bs_position3d(), cfg.ue_position3d())
    clusters = generate_clusters(entry, lsps, dirs, state, cfg.ue_velocity,
                                 cfg.center_freq_hz, streams)
    # The receive array sweeps the large aperture; the spherical manifold and
    # the visibility mask act along its elements.
    array = cfg.build_array(cfg.bs_array)
    d_link = cfg.bs_position3d().distance_to(cfg.ue_position3d())
    paths = emimo.paths_from_clusters(clusters, d_link)
    mask = emimo.gen_sns_mask(array.element_count, len(paths), region,
                              streams.get("sns"))
    fc = cfg.center_freq_hz
    manifold = emimo.spherical_manifold(paths, array, fc)
    alpha = np.array([p.alpha for p in paths])
    tap_gain = mask.s * manifold * alpha[None, :]
    coeffs = tap_gain[None, :, None, :]                      # (1, M, 1, K)
    delays = np.array([p.tau_s for p in paths])
    delays = delays - delays.min()
    order = np.argsort(delays, kind="stable")
    cir = CirTensor(coefficients=np.ascontiguousarray(coeffs[..., order]),
                    tap_delays_s=delays[order], sample_times_s=np.zeros(1),
                    meta={"f_hz": fc, "state": state, "sns_region": region})
    cir = apply_large_scale(cir, _terrestrial_pl(cfg, state, lsps.sf_db))
    freqs = fc + np.linspace(-cfg.bandwidth_hz / 2, cfg.bandwidth_hz / 2, n_freq)
    cfr = emimo.sns_cfr_band(paths, array, mask, freqs)
    rho, _ = analysis.array_cross_correlation(cfr)
    metrics = {
        "ds_ns": rms_delay_spread(clusters.powers, clusters.delays_s) * 1e9,
        "gini": gini_index(clusters.ray_powers.ravel()),
        "rsrp_dbm": rsrp(cir, cfg.tx_power_dbm),
        "n_clusters": clusters.n_clusters,
        "state": state,
        "xcorr_last": float(rho[-1]),
    }
    return DropResult(drop=streams.drop, tensors={"": cir}, metrics=metrics)


def _run_isac(cfg: ScenarioConfig, streams: DropStreams) -> DropResult:
    blk = cfg.feature_block()
    state = _link_state(cfg, streams)
    entry = lookup_lsp_table(cfg.scenario, state, cfg.center_freq_hz)
    lsps = generate_lsps(entry, streams.get("lsp"))
    targets = [isac.SensingTarget(position=Position3D.from_iterable(t["position"]),
                                  rcs_dbsm=float(t.get("rcs_dbsm", 0.0)),
                                  velocity=tuple(t.get("velocity", (0, 0, 0))))
               for t in blk.get("targets", [])]
    rx_s = blk.get("rx_s_position")
    pair = isac.gen_isac_drop(
        entry, lsps, cfg.bs_position3d(), cfg.ue_position3d(), state,
        int(blk.get("n_shared", 0)), streams, cfg.center_freq_hz,
        targets=targets,
        rx_s_pos=Position3D.from_iterable(rx_s) if rx_s else None,
        ue_velocity=cfg.ue_velocity,
        self_interference_db=blk.get("self_interference_db"))
    times = _sample_times(cfg)
    tx = cfg.build_array(cfg.bs_array)
    rx = cfg.build_array(cfg.ue_array)
    cir_c = synthesize_cir(pair.comm, tx, rx, cfg.center_freq_hz, times)
    cir_c = apply_large_scale(cir_c, _terrestrial_pl(cfg, state, lsps.sf_db))
    cir_s = synthesize_cir(pair.sense, tx, tx, cfg.center_freq_hz, times)
    if targets:
        t0 = targets[int(np.argmin(pair.target_echo_delays_s))]
        d1 = cfg.bs_position3d().distance_to(t0.position)
        d2 = t0.position.distance_to(
            Position3D.from_iterable(rx_s) if rx_s else cfg.bs_position3d())
        echo_pl = pl_radar_echo(d1, d2, cfg.center_freq_hz, t0.rcs_dbsm)
        cir_s = apply_large_scale(cir_s, PathLossSample(
            pl_db=echo_pl, shadow_db=0.0, model="RADAR_ECHO"))
    metrics = {
        "ds_ns": rms_delay_spread(pair.comm.powers, pair.comm.delays_s) * 1e9,
        "rsrp_dbm": rsrp(cir_c, cfg.tx_power_dbm),
        "sd_sensing": isac.sharing_degree(pair, "sensing"),
        "sd_comm": isac.sharing_degree(pair, "comm"),
        "state": state,
        "n_clusters": pair.comm.n_clusters,
    }
    if targets and pair.target_sense_idx.size:
        p_targets = pair.sense.powers[pair.target_sense_idx]
        env_mask = np.ones(pair.sense.n_clusters, dtype=bool)
        env_mask[pair.target_sense_idx] = False
        pr = isac.clutter_power_ratio(float(p_targets.sum()),
                                      pair.sense.powers[env_mask])
        metrics["clutter_pr_db"] = (10.0 * math.log10(pr)
                                    if math.isfinite(pr) else math.inf)
    return DropResult(drop=streams.drop, tensors={"": cir_c, ".sense": cir_s},
                      metrics=metrics)


def _ris_panel(cfg: ScenarioConfig, ideal: bool) -> ris.RisPanel:
    blk = cfg.feature_block()
    pitch = blk.get("element_pitch", "half_wavelength")
    if pitch == "half_wavelength":
        pitch = wavelength(cfg.center_freq_hz) / 2.0
    ris_pos = np.asarray(blk["position"], dtype=np.float64)
    to_bs = np.asarray(cfg.bs_position, dtype=np.float64) - ris_pos
    to_ue = np.asarray(cfg.ue_position, dtype=np.float64) - ris_pos
    if "bs_incidence_deg" in blk:
        rotation = ris.rotation_with_incidence(
            to_bs, to_ue, math.radians(float(blk["bs_incidence_deg"])))
    else:
        rotation = ris.rotation_facing(0.5 * (to_bs + to_ue))
    z_e = complex(*blk.get("z_e_ohm", (20000.0, 0.0)))
    z_m = complex(*blk.get("z_m_ohm", (655000.0, 0.0)))
    return ris.RisPanel(nx=int(blk.get("nx", 32)), ny=int(blk.get("ny", 32)),
                        d_element=float(pitch), z_e=z_e, z_m=z_m, ideal=ideal,
                        ideal_reference=blk.get("ideal_reference", "pec"),
                        rotation=rotation)


def _run_ris(cfg: ScenarioConfig, streams: DropStreams) -> DropResult:
    blk = cfg.feature_block()
    state = _link_state(cfg, streams)
    ris_pos = Position3D.from_iterable(blk["position"])
    f_hz = cfg.center_freq_hz
    entry = lookup_lsp_table(cfg.scenario, state, f_hz)

    # Leg 1: Tx -> RIS (its ASA at the panel is the configured sweep value);
    # leg 2: RIS -> Rx. Separate stream steps keep the legs insulated.
    s1 = streams.shifted(1)
    s2 = streams.shifted(2)
    lsps1 = generate_lsps(entry, s1.get("lsp"))
    lsps2 = generate_lsps(entry, s2.get("lsp"))
    if blk.get("leg_xpr_db") is not None:
        # Co-polarized comparison study: the ideal/non-ideal pairing isolates
        # the reflection magnitude, so cross-polar leakage is suppressed.
        entry = replace(entry, xpr_mu_db=float(blk["leg_xpr_db"]),
                        xpr_sigma_db=0.0)
    entry1 = entry
    if blk.get("asa_deg") is not None:
        # The sweep controls the realized arrival spread at the panel: the
        # intra-cluster spread shrinks with it so narrow settings stay narrow.
        asa = float(blk["asa_deg"])
        lsps1 = replace(lsps1, asa_deg=asa)
        entry1 = replace(entry, c_asa_deg=min(entry.c_asa_deg, asa / 3.0),
                         c_zsa_deg=min(entry.c_zsa_deg, asa / 3.0))
        lsps1 = replace(lsps1, zsa_deg=min(lsps1.zsa_deg, asa))
    if blk.get("leg_k_db") is not None:
        lsps1 = replace(lsps1, k_db=float(blk["leg_k_db"]))
        lsps2 = replace(lsps2, k_db=float(blk["leg_k_db"]))
    dirs1 = los_directions(cfg.bs_position3d(), ris_pos)
    dirs2 = los_directions(ris_pos, cfg.ue_position3d())
    leg1 = generate_clusters(entry1, lsps1, dirs1, state, (0.0, 0.0, 0.0),
                             f_hz, s1)
    leg2 = generate_clusters(entry, lsps2, dirs2, state, cfg.ue_velocity,
                             f_hz, s2)

    panel_ni = _ris_panel(cfg, ideal=False)
    panel_id = _ris_panel(cfg, ideal=True)
    if blk.get("codebook", "steering") == "steering":
        in_local = panel_ni.to_local(dirs1.zoa, dirs1.aoa)
        out_local = panel_ni.to_local(dirs2.zod, dirs2.aod)
        codebook = ris.steering_codebook(in_local, out_local)
    else:
        codebook = ris.uniform_codebook()

    tx = cfg.build_array(cfg.bs_array)
    rx = cfg.build_array(cfg.ue_array)
    times = _sample_times(cfg)
    cir_ni, cir_id = ris.cascade_cir_multi(leg1, leg2, [panel_ni, panel_id],
                                           codebook, tx, rx, f_hz, times)

    params = scenario_pathloss(cfg.scenario, state)
    d1 = max(cfg.bs_position3d().distance_to(ris_pos), 1.0)
    d2 = max(ris_pos.distance_to(cfg.ue_position3d()), 1.0)
    pl = PathLossSample(pl_db=pl_ci(d1, f_hz, params["alpha"])
                        + pl_ci(d2, f_hz, params["alpha"]),
                        shadow_db=lsps1.sf_db, model="CI")
    cir_ni = apply_large_scale(cir_ni, pl)
    cir_id = apply_large_scale(cir_id, pl)
    noise = float(blk.get("noise_floor_dbm", -94.0))
    snr_ni = rsrp(cir_ni, cfg.tx_power_dbm) - noise
    snr_id = rsrp(cir_id, cfg.tx_power_dbm) - noise
    metrics = {
        "ds_ns": rms_delay_spread(
            np.abs(cir_ni.coefficients[0, 0, 0]) ** 2, cir_ni.tap_delays_s) * 1e9,
        "rsrp_dbm": rsrp(cir_ni, cfg.tx_power_dbm),
        "snr_nonideal_db": snr_ni,
        "snr_ideal_db": snr_id,
        "snr_gap_db": snr_id - snr_ni,
        "state": state,
        "n_clusters": leg1.n_clusters * leg2.n_clusters,
    }
    return DropResult(drop=streams.drop, tensors={"": cir_ni}, metrics=metrics)


def _run_sagin(cfg: ScenarioConfig, streams: DropStreams) -> DropResult:
    blk = cfg.feature_block()
    state = cfg.link_state or "LOS"
    cir = sagin.ntn_drop(cfg.scenario, state, cfg.center_freq_hz,
                         float(blk.get("height_m", 600e3)),
                         math.radians(float(blk.get("elevation_deg", 30.0))),
                         streams,
                         extra_atten_db=float(blk.get("extra_atten_db", 0.0)),
                         k_rain_db=float(blk.get("k_rain_db", 0.0)),
                         k_cloud_db=float(blk.get("k_cloud_db", 0.0)),
                         times=_sample_times(cfg))
    powers = np.abs(cir.coefficients[0, 0, 0]) ** 2
    metrics = {
        "ds_ns": rms_delay_spread(powers, cir.tap_delays_s) * 1e9,
        "rsrp_dbm": rsrp(cir, cfg.tx_power_dbm),
        "pl_db": cir.meta["pl_db"],
        "slant_km": cir.meta["slant_range_m"] / 1e3,
        "k_total_db": cir.meta["k_total_db"],
        "state": state,
    }
    return DropResult(drop=streams.drop, tensors={"": cir}, metrics=metrics)


_RUNNERS = {
    "BASE": _run_standard,
    "THZ": _run_standard,
    "EMIMO": _run_emimo,
    "ISAC": _run_isac,
    "RIS": _run_ris,
    "SAGIN": _run_sagin,
}


def run_drop(cfg: ScenarioConfig, drop: int) -> DropResult:
    streams = DropStreams(cfg.seed, drop)
    result = _RUNNERS[cfg.feature](cfg, streams)
    chash = config_hash(cfg)
    for tensor in result.tensors.values():
        tensor.meta["config_hash"] = chash
        tensor.meta["seed"] = cfg.seed
    return result


def _drop_worker(args):
    cfg, drop, out_dir = args
    result = run_drop(cfg, drop)
    files = []
    for suffix, tensor in result.tensors.items():
        path = Path(out_dir) / f"drop{drop:05d}.cir{suffix}"
        tmp = path.with_suffix(path.suffix + ".tmp")
        write_cir(tensor, tmp)
        tmp.rename(path)
        files.append(str(path))
    return drop, result.metrics, files


def run_campaign(cfg: ScenarioConfig, out_dir, jobs: int = 1) -> dict:
    """Run all configured drops and write tensors, metrics.csv and
    summary.json into ``out_dir``. Returns the summary dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, drop, str(out)) for drop in range(cfg.drops)]
    results = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_drop_worker, tasks))
        else:
            results = [_drop_worker(t) for t in tasks]
    except BaseException:
        for tmp in out.glob("*.tmp"):
            tmp.unlink(missing_ok=True)
        raise
    results.sort(key=lambda r: r[0])

    report = analysis.MetricReport()
    for drop, metrics, _files in results:
        report.add(drop, **metrics)
    analysis.export_metrics_csv(report, out / "metrics.csv")

    summary = {
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "drops": cfg.drops,
        "outputs": sorted(Path(f).name for _, _, files in results for f in files),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return summary
