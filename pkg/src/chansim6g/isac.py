"""ISAC extension: coupled sensing + communication drops with shared and
non-shared clusters, target echoes with RCS weighting, clutter, and the
sharing-degree metric.

Sharing follows the cluster-level model: shared clusters reuse the same
excess-delay and departure-azimuth draws in both channels (arrival angles
and zeniths are channel-specific), amplitudes are always channel-specific.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import C_LIGHT
from .geometry import ConfigurationError, Position3D, los_directions, unit_vector
from .largescale import LSPSet, LspTableEntry
from .smallscale import ClusterSet, gen_xpr_phases, ray_offsets, ray_powers


@dataclass(frozen=True)
class SensingTarget:
    position: Position3D
    rcs_dbsm: float = 0.0
    velocity: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not math.isfinite(self.rcs_dbsm):
            raise ConfigurationError("target RCS must be finite")


@dataclass
class IsacChannelPair:
    comm: ClusterSet
    sense: ClusterSet
    shared_comm_idx: np.ndarray    # positions of shared clusters, comm order
    shared_sense_idx: np.ndarray   # positions of shared clusters, sense order
    target_sense_idx: np.ndarray   # positions of target-echo clusters
    n_shared: int
    n_comm_only: int
    n_sense_only: int
    comm_delay_offset_s: float     # absolute delay of comm tap 0
    sense_delay_offset_s: float    # absolute delay of sensing tap 0
    target_echo_delays_s: np.ndarray = field(default_factory=lambda: np.empty(0))


def _wrap_pi(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _fold_zenith(a):
    a = np.mod(a, 2.0 * np.pi)
    return np.where(a > np.pi, 2.0 * np.pi - a, a)


def _exp_powers(excess, r_tau, ds, zeta_db, rng):
    z = rng.normal(0.0, zeta_db, size=excess.size) if zeta_db > 0 else np.zeros(excess.size)
    p = np.exp(-excess * (r_tau - 1.0) / (r_tau * ds)) * 10.0 ** (-z / 10.0)
    return p / p.sum()


@dataclass
class _Cluster:
    abs_delay_s: float
    aod: float
    aoa: float
    zoa: float
    zod: float
    shared_id: int = -1        # >= 0 marks a shared cluster
    target_id: int = -1        # >= 0 marks a target echo
    power_weight: float = 1.0  # RCS / self-interference weight, linear
    velocity: tuple | None = None  # None: static scatterer


def _assemble_side(rows, entry, lsps, rng, f_hz, state, specular,
                   doppler_scale=1.0):
    """Sort rows by absolute delay and build a ClusterSet plus index maps."""
    rows = sorted(rows, key=lambda r: r.abs_delay_s)
    offset = rows[0].abs_delay_s
    n = len(rows)
    m = entry.rays_per_cluster
    excess = np.array([r.abs_delay_s - offset for r in rows])
    excess[0] = 0.0  # exact zero despite float subtraction
    aod = np.array([r.aod for r in rows])
    aoa = np.array([r.aoa for r in rows])
    zoa = np.array([r.zoa for r in rows])
    zod = np.array([r.zod for r in rows])

    powers = _exp_powers(excess, entry.delay_scaling, lsps.ds_s,
                         entry.per_cluster_shadow_db, rng)
    if specular:
        k_lin = 10.0 ** (lsps.k_db / 10.0)
        powers = powers / (k_lin + 1.0)
        powers[0] += k_lin / (k_lin + 1.0)
    weights = np.array([r.power_weight for r in rows])
    powers = powers * weights
    powers = powers / powers.sum()

    offs = ray_offsets(m)
    az_a = _wrap_pi(aoa[:, None] + math.radians(entry.c_asa_deg) * offs[None, :])
    zen_a = _fold_zenith(zoa[:, None] + math.radians(entry.c_zsa_deg) * offs[None, :])
    az_d = _wrap_pi(aod[:, None] + math.radians(entry.c_asd_deg) * offs[None, :])
    zen_d = _fold_zenith(zod[:, None] + math.radians(entry.c_zsd_deg) * offs[None, :])

    kappa, phases = gen_xpr_phases(entry, n, m, rng)
    rp = ray_powers(powers, m, los=specular, k_db=lsps.k_db if specular else None)

    arrival = unit_vector(zen_a, az_a)
    doppler = np.zeros((n, m))
    for i, r in enumerate(rows):
        if r.velocity is None:
            continue
        v = np.asarray(r.velocity, dtype=np.float64)
        doppler[i] = doppler_scale * (arrival[i] @ v) * f_hz / C_LIGHT

    cs = ClusterSet(delays_s=excess, powers=powers, ray_powers=rp,
                    zoa=zen_a, aoa=az_a, zod=zen_d, aod=az_d,
                    kappa=kappa, phases=phases, doppler_hz=doppler,
                    state=state, specular=specular)
    shared_idx = np.array([i for i, r in enumerate(rows) if r.shared_id >= 0], dtype=int)
    shared_ids = np.array([rows[i].shared_id for i in shared_idx], dtype=int)
    target_idx = np.array([i for i, r in enumerate(rows) if r.target_id >= 0], dtype=int)
    return cs, shared_idx, shared_ids, target_idx, offset


def gen_isac_drop(entry: LspTableEntry, lsps: LSPSet, tx_pos: Position3D,
                  rx_c_pos: Position3D, state: str, n_shared: int,
                  streams, f_hz: float, targets=(),
                  rx_s_pos: Position3D | None = None,
                  ue_velocity=(0.0, 0.0, 0.0),
                  self_interference_db: float | None = None) -> IsacChannelPair:
    """One coupled communication + sensing drop.

    Shared environment clusters are drawn once on a dedicated sub-stream and
    instantiated in both channels. Target echoes are deterministic from
    geometry (mono-static when ``rx_s_pos`` is None: echo returns on the
    departure ray with delay 2|Tx-target|/c) and weighted by their RCS.
    Per-side shadowing, XPRs and phases come from per-channel streams.
    """
    n_total = entry.n_clusters
    los = state.upper() == "LOS"
    n_targets = len(targets)
    n_comm_env = n_total - n_shared - (1 if los else 0)
    n_sense_env = n_total - n_shared - n_targets
    if n_shared < 0 or n_comm_env < 0 or n_sense_env < 0:
        raise ConfigurationError(
            f"cluster budget infeasible: total {n_total}, shared {n_shared}, "
            f"targets {n_targets}, LOS {los}")

    mono_static = rx_s_pos is None
    rx_s = tx_pos if mono_static else rx_s_pos
    dirs_c = los_directions(tx_pos, rx_c_pos)
    d_link_c = tx_pos.distance_to(rx_c_pos)
    tau_link_c = d_link_c / C_LIGHT

    rng_shared = streams.get("isac_shared")
    rng_c = streams.get("isac_comm")
    rng_s = streams.get("isac_sense")

    asd_rad = math.radians(lsps.asd_deg)
    asa_rad = math.radians(lsps.asa_deg)
    zsa_rad = math.radians(lsps.zsa_deg)
    zsd_rad = math.radians(lsps.zsd_deg)
    r_tau, ds = entry.delay_scaling, lsps.ds_s

    # Shared scatterer draws, consumed identically by both sides.
    shared_excess = -r_tau * ds * np.log(rng_shared.uniform(size=n_shared))
    shared_aod = _wrap_pi(dirs_c.aod + rng_shared.normal(0.0, asd_rad, size=n_shared))

    def env_rows(rng, n_env, base_abs, base_aoa, base_zoa, base_zod, velocity):
        rows = []
        for sid in range(n_shared):
            rows.append(_Cluster(
                abs_delay_s=base_abs + float(shared_excess[sid]),
                aod=float(shared_aod[sid]),
                aoa=float(_wrap_pi(base_aoa + rng.normal(0.0, asa_rad))),
                zoa=float(_fold_zenith(base_zoa + rng.normal(0.0, zsa_rad))),
                zod=float(_fold_zenith(base_zod + rng.normal(0.0, zsd_rad))),
                shared_id=sid, velocity=velocity))
        env_excess = -r_tau * ds * np.log(rng.uniform(size=n_env))
        for i in range(n_env):
            rows.append(_Cluster(
                abs_delay_s=base_abs + float(env_excess[i]),
                aod=float(_wrap_pi(dirs_c.aod + rng.normal(0.0, asd_rad))),
                aoa=float(_wrap_pi(base_aoa + rng.normal(0.0, asa_rad))),
                zoa=float(_fold_zenith(base_zoa + rng.normal(0.0, zsa_rad))),
                zod=float(_fold_zenith(base_zod + rng.normal(0.0, zsd_rad))),
                velocity=velocity))
        return rows

    # --- communication side --------------------------------------------
    ue_v = tuple(ue_velocity)
    rows_c = env_rows(rng_c, n_comm_env, tau_link_c,
                      dirs_c.aoa, dirs_c.zoa, dirs_c.zod, ue_v)
    if los:
        rows_c.append(_Cluster(abs_delay_s=tau_link_c, aod=dirs_c.aod,
                               aoa=dirs_c.aoa, zoa=dirs_c.zoa, zod=dirs_c.zod,
                               velocity=ue_v))
    comm, shared_c_idx, shared_c_ids, _, off_c = _assemble_side(
        rows_c, entry, lsps, rng_c, f_hz, "LOS" if los else "NLOS", los)

    # --- sensing side ----------------------------------------------------
    dirs_t = [los_directions(tx_pos, t.position) for t in targets]
    echo_delays = np.array([(tx_pos.distance_to(t.position)
                             + t.position.distance_to(rx_s)) / C_LIGHT
                            for t in targets])
    base_abs_s = float(echo_delays.min()) if n_targets else tau_link_c
    if mono_static:
        base_aoa_s, base_zoa_s, base_zod_s = dirs_c.aod, dirs_c.zod, dirs_c.zod
    else:
        d_s = los_directions(rx_s, tx_pos)
        base_aoa_s, base_zoa_s, base_zod_s = d_s.aod, d_s.zod, dirs_c.zod
    rows_s = env_rows(rng_s, n_sense_env, base_abs_s,
                      base_aoa_s, base_zoa_s, base_zod_s, None)
    for tid, (t, d) in enumerate(zip(targets, dirs_t)):
        if mono_static:
            aoa_t, zoa_t = d.aod, d.zod  # echo returns along the departure ray
        else:
            back = los_directions(t.position, rx_s)
            aoa_t, zoa_t = back.aoa, back.zoa
        rows_s.append(_Cluster(abs_delay_s=float(echo_delays[tid]), aod=d.aod,
                               aoa=aoa_t, zoa=zoa_t, zod=d.zod,
                               target_id=tid,
                               power_weight=10.0 ** (t.rcs_dbsm / 10.0),
                               velocity=tuple(t.velocity)))
    if self_interference_db is not None:
        rows_s.append(_Cluster(
            abs_delay_s=tx_pos.distance_to(rx_s) / C_LIGHT,
            aod=dirs_c.aod, aoa=base_aoa_s, zoa=base_zoa_s, zod=dirs_c.zod,
            power_weight=10.0 ** (-self_interference_db / 10.0)))
    sense, shared_s_idx, shared_s_ids, target_idx, off_s = _assemble_side(
        rows_s, entry, lsps, rng_s, f_hz, "NLOS", False,
        doppler_scale=2.0 if mono_static else 1.0)

    # Shared departure rays bitwise identical across the two channels: copy
    # the comm side's ray array rows by shared id.
    if n_shared:
        by_id_c = {int(i): idx for idx, i in zip(shared_c_idx, shared_c_ids)}
        for idx, sid in zip(shared_s_idx, shared_s_ids):
            sense.aod[idx] = comm.aod[by_id_c[int(sid)]]
    if mono_static:
        # Echoes retrace their rays: per-ray arrival equals departure.
        for idx in target_idx:
            sense.aoa[idx] = sense.aod[idx]
            sense.zoa[idx] = sense.zod[idx]

    return IsacChannelPair(
        comm=comm, sense=sense,
        shared_comm_idx=shared_c_idx, shared_sense_idx=shared_s_idx,
        target_sense_idx=target_idx,
        n_shared=n_shared, n_comm_only=n_comm_env, n_sense_only=n_sense_env,
        comm_delay_offset_s=off_c, sense_delay_offset_s=off_s,
        target_echo_delays_s=echo_delays)


def sharing_degree(pair: IsacChannelPair, side: str) -> float:
    """Power fraction of the shared clusters on the chosen side, in [0, 1]."""
    if side == "sensing":
        powers, idx = pair.sense.powers, pair.shared_sense_idx
    elif side == "comm":
        powers, idx = pair.comm.powers, pair.shared_comm_idx
    else:
        raise ValueError(f"side must be 'sensing' or 'comm', got {side!r}")
    total = float(powers.sum())
    if total <= 0:
        raise ValueError("sharing degree undefined for all-zero power")
    return float(powers[idx].sum() / total)


def clutter_power_ratio(target_power: float, env_powers) -> float:
    """PR = target power over the sum of effective environment power.

    An empty environment returns the +inf sentinel rather than raising.
    """
    if target_power <= 0:
        raise ValueError(f"target power must be positive, got {target_power}")
    env = np.asarray(env_powers, dtype=np.float64)
    total = float(env.sum()) if env.size else 0.0
    if total <= 0:
        return math.inf
    return target_power / total
