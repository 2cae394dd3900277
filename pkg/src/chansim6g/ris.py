"""RIS extension: load-impedance element reflection, equivalence-theorem
element radiation pattern, coherent panel pattern, and the Tx-RIS-Rx
cascaded channel.

Conventions (panel local frame): elements lie in the x-y plane on a centered
grid, normal +z. Directions are (zenith from normal, azimuth); ``in``
directions point from the panel toward the source, ``out`` toward the
observer. Pattern blocks are indexed [incident pol, outgoing pol] with V
along the zenith basis vector and H along the azimuth basis vector. The
programmable codebook phase modulates the reflected-field part only; the
incident-field part of the equivalent currents is codebook-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import Z0_OHM, wavelength
from .geometry import ArrayGeometry, ConfigurationError, unit_vector
from .smallscale import ClusterSet
from .cir import CirTensor, get_pattern

# Directions within a degree of grazing (or behind the panel) are treated
# as outside the panel's field of view; finite-thickness edges make the
# sheet model meaningless there.
GRAZING_LIMIT_RAD = math.radians(89.0)


# ---------------------------------------------------------------------------
# Element reflection (load-impedance model)
# ---------------------------------------------------------------------------

def _reflection_arrays(z_e, z_m, cos_t, pol: str):
    ze_inf = math.isinf(abs(z_e))
    zm_inf = math.isinf(abs(z_m))
    if pol == "V":
        term_e = np.zeros_like(cos_t, dtype=np.complex128) if ze_inf \
            else -Z0_OHM / (2.0 * z_e * cos_t + Z0_OHM)
        term_m = np.ones_like(cos_t, dtype=np.complex128) if zm_inf \
            else (z_m * cos_t) / (z_m * cos_t + 2.0 * Z0_OHM)
        return term_e + term_m
    if pol == "H":
        term_e = np.zeros_like(cos_t, dtype=np.complex128) if ze_inf \
            else (Z0_OHM * cos_t) / (2.0 * z_e + Z0_OHM * cos_t)
        term_m = np.ones_like(cos_t, dtype=np.complex128) if zm_inf \
            else z_m / (z_m + 2.0 * Z0_OHM * cos_t)
        return term_e - term_m
    raise ValueError(f"polarization must be V or H, got {pol!r}")


def element_reflection(z_e: complex, z_m: complex, theta_in: float,
                       pol: str = "V") -> complex:
    """Reflection coefficient of a thin sheet with electric impedance ``z_e``
    and magnetic impedance ``z_m`` at incidence ``theta_in``.

    Infinite impedances are accepted as limits (open electric sheet /
    magnetic wall gives +1, the short (PEC) limit gives -1 for V).
    """
    if not (0.0 <= theta_in < math.pi / 2):
        raise ValueError(f"incidence angle must be in [0, pi/2), got {theta_in}")
    val = _reflection_arrays(complex(z_e), complex(z_m),
                             np.asarray(math.cos(theta_in)), pol.upper())
    return complex(val)


# ---------------------------------------------------------------------------
# Panel description and codebooks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RisCodebook:
    """Per-element phase profile applied to the reflected field.

    ``steering`` codebooks cancel the tangential position phases for a
    nominal (incident, outgoing) pair ("continuous anomalous reflection");
    they stay separable in (x, y), enabling the closed-form panel sum.
    """

    kind: str                            # "uniform" | "steering" | "table"
    phases: np.ndarray | None = None     # (nx, ny) radians, kind == "table"
    design_u: np.ndarray | None = None   # tangential steering vector (2,)


def uniform_codebook() -> RisCodebook:
    return RisCodebook(kind="uniform", design_u=np.zeros(2))


def steering_codebook(in_dir, out_dir) -> RisCodebook:
    """Design a continuous-anomalous-reflection profile for a nominal
    (incident, outgoing) direction pair, both (zenith, azimuth) in the panel
    frame."""
    u_in = unit_vector(*in_dir)[:2]
    u_out = unit_vector(*out_dir)[:2]
    return RisCodebook(kind="steering", design_u=np.asarray(u_in + u_out))


def table_codebook(phases: np.ndarray) -> RisCodebook:
    return RisCodebook(kind="table", phases=np.asarray(phases, dtype=np.float64))


@dataclass(frozen=True)
class RisPanel:
    nx: int
    ny: int
    d_element: float                    # grid pitch, meters
    z_e: complex = 0.0                  # electric impedance, ohms
    z_m: complex = 0.0                  # magnetic impedance, ohms
    element_size: float | None = None   # aperture edge, defaults to the pitch
    ideal: bool = False                 # unit-magnitude reflection, all angles
    ideal_reference: str = "pec"        # mirror signature of the ideal mode
    rotation: tuple = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigurationError("RIS grid must be at least 1x1")
        if self.d_element <= 0:
            raise ConfigurationError("element pitch must be positive")
        if self.ideal_reference not in ("pec", "pmc"):
            raise ConfigurationError("ideal_reference must be 'pec' or 'pmc'")

    @property
    def aperture_edge(self) -> float:
        return self.element_size if self.element_size is not None else self.d_element

    @property
    def rotation_matrix(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)

    def grid_coords(self):
        """Element center coordinates about the panel center, meters."""
        xs = (np.arange(1, self.nx + 1) - (1 + self.nx) / 2.0) * self.d_element
        ys = (np.arange(1, self.ny + 1) - (1 + self.ny) / 2.0) * self.d_element
        return xs, ys

    def element_positions(self) -> np.ndarray:
        xs, ys = self.grid_coords()
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=-1)

    def reflection(self, zen_in, pol: str):
        """Angle-dependent element reflection.

        Ideal mode keeps unit magnitude at all angles with the mirror's
        polarization signature (PEC: V -> -1, H -> +1; magnetic wall
        reversed), so the ideal/non-ideal comparison isolates the magnitude
        and angle dependence of the hardware model.
        """
        zen = np.asarray(zen_in, dtype=np.float64)
        if self.ideal:
            sign_v = -1.0 if self.ideal_reference == "pec" else 1.0
            sign = sign_v if pol.upper() == "V" else -sign_v
            return np.full(zen.shape, sign, dtype=np.complex128)
        return np.asarray(_reflection_arrays(complex(self.z_e), complex(self.z_m),
                                             np.cos(zen), pol.upper()),
                          dtype=np.complex128)

    def to_local(self, zen, az):
        """Rotate global-frame directions into the panel frame."""
        vec = unit_vector(zen, az) @ self.rotation_matrix.T
        zen_l = np.arccos(np.clip(vec[..., 2], -1.0, 1.0))
        az_l = np.arctan2(vec[..., 1], vec[..., 0])
        return zen_l, az_l


def rotation_facing(direction) -> tuple:
    """Rotation tuple for a panel whose normal points along ``direction``
    (global frame)."""
    n = np.asarray(direction, dtype=np.float64)
    n = n / np.linalg.norm(n)
    helper = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    x = np.cross(helper, n)
    x = x / np.linalg.norm(x)
    y = np.cross(n, x)
    # Rows map global vectors onto the panel (x, y, normal) axes.
    return tuple(np.stack([x, y, n]).ravel())


def rotation_with_incidence(toward_a, toward_b, incidence_a_rad: float) -> tuple:
    """Rotation tuple for a panel whose normal lies in the plane spanned by
    the two (global) directions, placing direction ``a`` at the requested
    local zenith and keeping ``b`` on the same (front) side."""
    v1 = np.asarray(toward_a, dtype=np.float64)
    v1 = v1 / np.linalg.norm(v1)
    v2 = np.asarray(toward_b, dtype=np.float64)
    v2 = v2 / np.linalg.norm(v2)
    e2 = v2 - (v2 @ v1) * v1
    nrm = np.linalg.norm(e2)
    if nrm < 1e-12:
        raise ConfigurationError("panel endpoints are collinear with the panel")
    e2 = e2 / nrm
    n = math.cos(incidence_a_rad) * v1 + math.sin(incidence_a_rad) * e2
    return rotation_facing(n)


# ---------------------------------------------------------------------------
# Element radiation pattern (equivalence theorem, uniform rectangular patch)
# ---------------------------------------------------------------------------

def _basis(zen, az):
    """Spherical basis vectors (r, theta, phi) for directions (zen, az)."""
    st, ct = np.sin(zen), np.cos(zen)
    sp, cp = np.sin(az), np.cos(az)
    r = np.stack([st * cp, st * sp, ct], axis=-1)
    th = np.stack([ct * cp, ct * sp, -st], axis=-1)
    ph = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return r, th, ph


def _sinc(x):
    return np.sinc(x / np.pi)  # sin(x)/x with the 0 limit


def _element_blocks(panel: RisPanel, in_dir, out_dir, f_hz: float,
                    r_eval: float = 100.0):
    """Element pattern block from the reflected-field equivalent currents.

    The incident-field half of the Huygens pair radiates into the forward
    half-space and contributes nothing to the reflection hemisphere, so the
    currents here are J = n x H_r, M = -n x E_r; the block is therefore
    exactly proportional to the element reflection coefficient. Returns
    (..., 2, 2) arrays indexed [p1, p2], already carrying the
    angle-dependent Gamma (or unit magnitude in ideal mode).
    """
    zen_i, az_i = (np.asarray(a, dtype=np.float64) for a in in_dir)
    zen_o, az_o = (np.asarray(a, dtype=np.float64) for a in out_dir)
    zen_i, az_i, zen_o, az_o = np.broadcast_arrays(zen_i, az_i, zen_o, az_o)
    shape = zen_i.shape

    lam = wavelength(f_hz)
    k = 2.0 * math.pi / lam
    edge = panel.aperture_edge
    area = edge * edge

    r_in, th_in, ph_in = _basis(zen_i, az_i)
    r_out, th_out, ph_out = _basis(zen_o, az_o)
    k_i = -r_in
    k_r = k_i.copy()
    k_r[..., 2] = -k_r[..., 2]

    # Reflected-field polarization basis consistent with the PEC limits:
    # tangential E cancels for V with Gamma = -1 and for H with Gamma = +1.
    v_r = th_in.copy()
    v_r[..., 2] = -v_r[..., 2]
    h_r = -ph_in

    gamma_v = panel.reflection(zen_i, "V")
    gamma_h = panel.reflection(zen_i, "H")

    du = r_out[..., 0] + r_in[..., 0]
    dv = r_out[..., 1] + r_in[..., 1]
    taper = area * _sinc(0.5 * k * du * edge) * _sinc(0.5 * k * dv * edge)

    z_hat = np.zeros(shape + (3,))
    z_hat[..., 2] = 1.0
    prefactor = -1j * k * np.exp(-1j * k * r_eval) / (4.0 * math.pi * r_eval)
    norm = (4.0 * math.pi / lam) * r_eval * np.exp(1j * k * r_eval)
    scale = (norm * prefactor) * taper

    block_ref = np.empty(shape + (2, 2), dtype=np.complex128)
    for p1, (e_r, gamma) in enumerate(((v_r, gamma_v), (h_r, gamma_h))):
        field = gamma[..., None] * e_r
        h_vec = np.cross(k_r, field)        # eta-normalized H
        j_s = np.cross(z_hat, h_vec)        # eta * J_s
        m_s = -np.cross(z_hat, field)
        n_th = np.sum(j_s * th_out, axis=-1)
        n_ph = np.sum(j_s * ph_out, axis=-1)
        l_th = np.sum(m_s * th_out, axis=-1)
        l_ph = np.sum(m_s * ph_out, axis=-1)
        block_ref[..., p1, 0] = scale * (n_th + l_ph)
        block_ref[..., p1, 1] = scale * (n_ph - l_th)
    return block_ref


def _element_blocks_pairs(panel: RisPanel, in_zen, in_az, out_zen, out_az,
                          f_hz: float, r_eval: float = 100.0):
    """Factored evaluation of the element block on the outer product of an
    incident direction list (I,) and an outgoing direction list (J,).

    The equivalent currents depend only on the incident direction and the
    out-basis projections only on the outgoing one, so everything except the
    aperture taper reduces to (I, 3) x (3, J) products. Returns an
    (I, J, 2, 2) array identical to ``_element_blocks`` on the corresponding
    broadcast grid.
    """
    in_zen = np.asarray(in_zen, dtype=np.float64).ravel()
    in_az = np.asarray(in_az, dtype=np.float64).ravel()
    out_zen = np.asarray(out_zen, dtype=np.float64).ravel()
    out_az = np.asarray(out_az, dtype=np.float64).ravel()

    lam = wavelength(f_hz)
    k = 2.0 * math.pi / lam
    edge = panel.aperture_edge
    area = edge * edge

    r_in, th_in, ph_in = _basis(in_zen, in_az)        # (I, 3)
    r_out, th_out, ph_out = _basis(out_zen, out_az)   # (J, 3)
    k_i = -r_in
    k_r = k_i.copy()
    k_r[:, 2] = -k_r[:, 2]
    v_r = th_in.copy()
    v_r[:, 2] = -v_r[:, 2]
    h_r = -ph_in
    gamma_v = panel.reflection(in_zen, "V")
    gamma_h = panel.reflection(in_zen, "H")

    du = r_out[None, :, 0] + r_in[:, None, 0]
    dv = r_out[None, :, 1] + r_in[:, None, 1]
    taper = area * _sinc(0.5 * k * du * edge) * _sinc(0.5 * k * dv * edge)
    prefactor = -1j * k * np.exp(-1j * k * r_eval) / (4.0 * math.pi * r_eval)
    norm = (4.0 * math.pi / lam) * r_eval * np.exp(1j * k * r_eval)
    scale = (norm * prefactor) * taper                # (I, J)

    z_hat = np.array([0.0, 0.0, 1.0])

    def radiate(e_vec, gamma):
        field = gamma[:, None] * e_vec
        h_vec = np.cross(k_r, field)
        j_s = np.cross(np.broadcast_to(z_hat, h_vec.shape), h_vec)
        m_s = -np.cross(np.broadcast_to(z_hat, field.shape), field)
        n_th = j_s @ th_out.T                         # (I, J)
        n_ph = j_s @ ph_out.T
        l_th = m_s @ th_out.T
        l_ph = m_s @ ph_out.T
        return scale * (n_th + l_ph), scale * (n_ph - l_th)

    shape = (in_zen.size, out_zen.size)
    block_ref = np.empty(shape + (2, 2), dtype=np.complex128)
    for p1, (e_r, gamma) in enumerate(((v_r, gamma_v), (h_r, gamma_h))):
        block_ref[..., p1, 0], block_ref[..., p1, 1] = radiate(e_r, gamma)
    return block_ref


def element_pattern(panel: RisPanel, in_dir, out_dir, f_hz: float,
                    codebook_phase=0.0, r_eval: float = 100.0) -> np.ndarray:
    """2x2 complex pattern block F[p1, p2] of a single element.

    Equivalent surface currents are formed from the reflected field of a
    uniform-field rectangular patch and radiated to ``out_dir``; the
    evaluation distance ``r_eval`` cancels by construction. The codebook
    phase multiplies the whole block (it modulates the reflection).
    """
    ref = _element_blocks(panel, in_dir, out_dir, f_hz, r_eval=r_eval)
    beta = np.exp(1j * np.asarray(codebook_phase))
    return beta[..., None, None] * ref if np.ndim(codebook_phase) \
        else complex(beta) * ref


def _dirichlet(a, n: int):
    """Centered-grid geometric sum: sin(n a / 2) / sin(a / 2), real."""
    a = np.asarray(a, dtype=np.float64)
    den = np.sin(0.5 * a)
    small = np.abs(den) < 1e-12
    if not small.any():
        return np.sin(0.5 * n * a) / den
    safe = np.where(small, 1.0, den)
    val = np.sin(0.5 * n * a) / safe
    limit = n * np.cos(0.5 * n * a) / np.where(np.abs(np.cos(0.5 * a)) < 1e-12,
                                               1.0, np.cos(0.5 * a))
    return np.where(small, limit, val)


def overall_pattern(panel: RisPanel, codebook: RisCodebook, in_dir, out_dir,
                    f_hz: float) -> np.ndarray:
    """Coherent panel pattern: element blocks summed with per-element
    position phases exp(j k r_in.d) exp(j k r_out.d) and codebook phases.
    Directions behind the panel give zeros. Returns F[..., p1, p2].
    """
    zen_i, az_i = (np.asarray(a, dtype=np.float64) for a in in_dir)
    zen_o, az_o = (np.asarray(a, dtype=np.float64) for a in out_dir)
    zen_i, az_i, zen_o, az_o = np.broadcast_arrays(zen_i, az_i, zen_o, az_o)
    k = 2.0 * math.pi / wavelength(f_hz)

    front = (zen_i < GRAZING_LIMIT_RAD) & (zen_o < GRAZING_LIMIT_RAD)
    ref = _element_blocks(panel, (zen_i, az_i), (zen_o, az_o), f_hz)

    u = unit_vector(zen_i, az_i) + unit_vector(zen_o, az_o)
    if codebook.kind in ("uniform", "steering"):
        du = u[..., 0] - codebook.design_u[0]
        dv = u[..., 1] - codebook.design_u[1]
        af_cb = (_dirichlet(k * du * panel.d_element, panel.nx)
                 * _dirichlet(k * dv * panel.d_element, panel.ny))
    elif codebook.kind == "table":
        if codebook.phases is None or codebook.phases.shape != (panel.nx, panel.ny):
            raise ConfigurationError("codebook table shape mismatch")
        pos = panel.element_positions()
        af_cb = np.einsum("...p->...",
                          np.exp(1j * (k * np.tensordot(u, pos.T, axes=1)
                                       + codebook.phases.ravel())))
    else:
        raise ConfigurationError(f"unknown codebook kind {codebook.kind!r}")

    return ref * af_cb[..., None, None] * front[..., None, None]


def _outer_sin(a, b):
    """sin(a_i + b_j) from per-side vectors (angle addition)."""
    return np.outer(np.sin(a), np.cos(b)) + np.outer(np.cos(a), np.sin(b))


def _outer_cos(a, b):
    return np.outer(np.cos(a), np.cos(b)) - np.outer(np.sin(a), np.sin(b))


def _dirichlet_outer(a, b, n: int):
    """Dirichlet kernel sin(n x)/sin(x) on the grid x = a_i + b_j, with the
    transcendentals evaluated only on the per-side vectors. Near-singular
    entries (coherence points) are patched individually."""
    num = _outer_sin(n * a, n * b)
    den = _outer_sin(a, b)
    rows, cols = np.where(np.abs(den) < 1e-12)
    if rows.size:
        den[rows, cols] = 1.0
    num /= den
    if rows.size:
        x = a[rows] + b[cols]
        num[rows, cols] = n * np.cos(n * x) / np.cos(x)
    return num


def _sinc_outer(a, b):
    """sin(x)/x on the grid x = a_i + b_j."""
    num = _outer_sin(a, b)
    x = a[:, None] + b[None, :]
    rows, cols = np.where(np.abs(x) < 1e-9)
    if rows.size:
        x[rows, cols] = 1.0
    num /= x
    if rows.size:
        num[rows, cols] = 1.0
    return num


def _cascade_chain_multi(panels, codebook: RisCodebook, in_zen, in_az,
                         a_vec, out_zen, out_az, b_vec, f_hz: float) -> list:
    """Fused pattern/polarization contraction for the cascade:

    chain[i, j] = sum_{q, p} a_vec[i, q] F_panel[i, j, q, p] b_vec[j, p]

    computed without materializing the (I, J, 2, 2) pattern blocks. The
    incident-polarization weights fold into combined current vectors per
    incident ray; the outgoing weights fold into two projection vectors per
    outgoing ray; each half then reduces to two (I,3)x(3,J) products.

    ``panels`` must share geometry (grid, pitch, aperture) and may differ in
    reflection behavior; shared grids are computed once. Returns one chain
    per panel.
    """
    if codebook.kind not in ("uniform", "steering"):
        raise ConfigurationError("pair evaluation needs a separable codebook")
    ref_panel = panels[0]
    for p in panels[1:]:
        if (p.nx, p.ny, p.d_element, p.aperture_edge) != \
                (ref_panel.nx, ref_panel.ny, ref_panel.d_element,
                 ref_panel.aperture_edge):
            raise ConfigurationError("panels in one cascade must share geometry")
    in_zen = np.asarray(in_zen, dtype=np.float64).ravel()
    in_az = np.asarray(in_az, dtype=np.float64).ravel()
    out_zen = np.asarray(out_zen, dtype=np.float64).ravel()
    out_az = np.asarray(out_az, dtype=np.float64).ravel()

    lam = wavelength(f_hz)
    k = 2.0 * math.pi / lam
    edge = ref_panel.aperture_edge
    area = edge * edge

    r_in, th_in, ph_in = _basis(in_zen, in_az)
    r_out, th_out, ph_out = _basis(out_zen, out_az)
    k_i = -r_in
    k_r = k_i.copy()
    k_r[:, 2] = -k_r[:, 2]
    v_r = th_in.copy()
    v_r[:, 2] = -v_r[:, 2]
    h_r = -ph_in

    z_hat = np.array([0.0, 0.0, 1.0])

    def currents(e_vec, k_vec):
        h_vec = np.cross(k_vec, e_vec)
        j_s = np.cross(np.broadcast_to(z_hat, h_vec.shape), h_vec)
        m_s = -np.cross(np.broadcast_to(z_hat, e_vec.shape), e_vec)
        return j_s, m_s

    # Combined current vectors per incident ray, weighted by the Tx half.
    av, ah = a_vec[:, 0][:, None], a_vec[:, 1][:, None]
    j_v_r, m_v_r = currents(v_r, k_r)
    j_h_r, m_h_r = currents(h_r, k_r)

    # Projection vectors per outgoing ray, weighted by the Rx half.
    b0, b1 = b_vec[:, 0][:, None], b_vec[:, 1][:, None]
    t1 = b0 * th_out + b1 * ph_out
    t2 = b0 * ph_out - b1 * th_out

    # All big-grid trigonometry runs through per-side vectors; the (I, J)
    # arguments are separable sums, so angle addition avoids grid-sized
    # transcendental evaluations.
    ux_i, ux_o = r_in[:, 0], r_out[:, 0]
    uy_i, uy_o = r_in[:, 1], r_out[:, 1]
    taper = area * (_sinc_outer(0.5 * k * edge * ux_i, 0.5 * k * edge * ux_o)
                    * _sinc_outer(0.5 * k * edge * uy_i, 0.5 * k * edge * uy_o))
    scale = (-1j * k / lam) * taper   # r_eval factors cancel analytically

    hd = 0.5 * k * ref_panel.d_element
    af_cb = (_dirichlet_outer(hd * (ux_i - codebook.design_u[0]), hd * ux_o,
                              ref_panel.nx)
             * _dirichlet_outer(hd * (uy_i - codebook.design_u[1]), hd * uy_o,
                                ref_panel.ny))

    front = ((in_zen < GRAZING_LIMIT_RAD)[:, None]
             & (out_zen < GRAZING_LIMIT_RAD)[None, :])
    base_ref = scale * af_cb * front

    chains = []
    for panel in panels:
        gamma_v = panel.reflection(in_zen, "V")
        gamma_h = panel.reflection(in_zen, "H")
        gv = (av * gamma_v[:, None])
        gh = (ah * gamma_h[:, None])
        j_ref = gv * j_v_r + gh * j_h_r
        m_ref = gv * m_v_r + gh * m_h_r
        chains.append(base_ref * (j_ref @ t1.T + m_ref @ t2.T))
    return chains


def _cascade_chain(panel: RisPanel, codebook: RisCodebook, in_zen, in_az,
                   a_vec, out_zen, out_az, b_vec, f_hz: float) -> np.ndarray:
    return _cascade_chain_multi([panel], codebook, in_zen, in_az, a_vec,
                                out_zen, out_az, b_vec, f_hz)[0]


def overall_pattern_pairs(panel: RisPanel, codebook: RisCodebook,
                          in_zen, in_az, out_zen, out_az,
                          f_hz: float) -> np.ndarray:
    """Panel pattern on the outer product of incident directions (I,) and
    outgoing directions (J,); separable codebooks only. Returns (I, J, 2, 2),
    equal to ``overall_pattern`` on the broadcast grid."""
    if codebook.kind not in ("uniform", "steering"):
        raise ConfigurationError("pair evaluation needs a separable codebook")
    in_zen = np.asarray(in_zen, dtype=np.float64).ravel()
    in_az = np.asarray(in_az, dtype=np.float64).ravel()
    out_zen = np.asarray(out_zen, dtype=np.float64).ravel()
    out_az = np.asarray(out_az, dtype=np.float64).ravel()
    k = 2.0 * math.pi / wavelength(f_hz)

    ref = _element_blocks_pairs(panel, in_zen, in_az, out_zen, out_az, f_hz)
    u_in = unit_vector(in_zen, in_az)
    u_out = unit_vector(out_zen, out_az)
    ux = u_in[:, None, 0] + u_out[None, :, 0]
    uy = u_in[:, None, 1] + u_out[None, :, 1]
    af_cb = (_dirichlet(k * (ux - codebook.design_u[0]) * panel.d_element, panel.nx)
             * _dirichlet(k * (uy - codebook.design_u[1]) * panel.d_element, panel.ny))
    front = ((in_zen < GRAZING_LIMIT_RAD)[:, None]
             & (out_zen < GRAZING_LIMIT_RAD)[None, :])
    return ref * af_cb[..., None, None] * front[..., None, None]


# ---------------------------------------------------------------------------
# Cascaded CIR
# ---------------------------------------------------------------------------

def cascade_cir_multi(leg1: ClusterSet, leg2: ClusterSet, panels,
                      codebook: RisCodebook, tx: ArrayGeometry,
                      rx: ArrayGeometry, f_hz: float, times=None,
                      tx_pattern="isotropic", rx_pattern="isotropic") -> list:
    """Tx-RIS-Rx cascaded coefficients: double ray sum over the two legs with
    the panel pattern block between the per-leg polarization matrices; one
    tap per cluster pair at delay tau1 + tau2, Doppler from the RIS-Rx leg.

    Leg-1 arrival angles at the panel feed the incident direction and leg-2
    departure angles the outgoing direction, both rotated into the panel
    frame. Several panels sharing geometry (e.g. ideal vs non-ideal
    modulation) are evaluated against the same legs in one pass; one tensor
    per panel is returned.
    """
    lam = wavelength(f_hz)
    t = np.zeros(1) if times is None else np.asarray(times, dtype=np.float64)
    tx_pat = get_pattern(tx_pattern)
    rx_pat = get_pattern(rx_pattern)

    n1, m1 = leg1.ray_powers.shape
    n2, m2 = leg2.ray_powers.shape

    def pol_matrices(leg):
        ph = leg.phases
        inv = 1.0 / np.sqrt(leg.kappa)
        mat = np.empty(ph.shape[:2] + (2, 2), dtype=np.complex128)
        mat[..., 0, 0] = np.exp(1j * ph[..., 0])
        mat[..., 0, 1] = inv * np.exp(1j * ph[..., 1])
        mat[..., 1, 0] = inv * np.exp(1j * ph[..., 2])
        mat[..., 1, 1] = np.exp(1j * ph[..., 3])
        if leg.specular:
            mat[0, 0] = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
        return mat

    mat1 = pol_matrices(leg1).reshape(n1 * m1, 2, 2)
    mat2 = pol_matrices(leg2).reshape(n2 * m2, 2, 2)

    ftx_t, ftx_p = tx_pat(leg1.zod, leg1.aod)
    ftx = np.stack(np.broadcast_arrays(ftx_t, ftx_p), axis=-1).reshape(n1 * m1, 2)
    frx_t, frx_p = rx_pat(leg2.zoa, leg2.aoa)
    frx = np.stack(np.broadcast_arrays(frx_t, frx_p), axis=-1).reshape(n2 * m2, 2)
    a_vec = np.einsum("ipq,iq->ip", mat1, ftx)        # (n1*m1, 2)
    b_vec = np.einsum("jq,jqp->jp", frx, mat2)        # (n2*m2, 2)

    panel0 = panels[0]
    in_zen, in_az = panel0.to_local(leg1.zoa.ravel(), leg1.aoa.ravel())
    out_zen, out_az = panel0.to_local(leg2.zod.ravel(), leg2.aod.ravel())
    # chain[i, j] = sum_{q,p} a[i,q] F[i,j,q,p] b[j,p]; the pattern block is
    # indexed [incident, outgoing], so q pairs with the Tx half.
    if codebook.kind in ("uniform", "steering"):
        chains = _cascade_chain_multi(panels, codebook, in_zen, in_az, a_vec,
                                      out_zen, out_az, b_vec, f_hz)
    else:
        chains = []
        for panel in panels:
            f_ris = overall_pattern(panel, codebook,
                                    (in_zen[:, None], in_az[:, None]),
                                    (out_zen[None, :], out_az[None, :]), f_hz)
            chains.append(np.einsum("jp,ijqp,iq->ij", b_vec, f_ris, a_vec))

    amp = np.sqrt(np.outer(leg1.ray_powers.ravel(), leg2.ray_powers.ravel()))
    r_tx = unit_vector(leg1.zod, leg1.aod).reshape(n1 * m1, 3)
    r_rx = unit_vector(leg2.zoa, leg2.aoa).reshape(n2 * m2, 3)
    ph_tx = np.exp(2j * math.pi / lam * (r_tx @ tx.element_positions.T))
    ph_rx = np.exp(2j * math.pi / lam * (r_rx @ rx.element_positions.T))
    dop = np.exp(2j * math.pi * np.outer(leg2.doppler_hz.ravel(), t))
    ph_tx = ph_tx.reshape(n1, m1, -1)
    ph_rx = ph_rx.reshape(n2, m2, -1)
    dop = dop.reshape(n2, m2, -1)

    delays = (leg1.delays_s[:, None] + leg2.delays_s[None, :]).ravel()
    order = np.argsort(delays, kind="stable")

    out = []
    for panel, chain in zip(panels, chains):
        ray_term = (amp * chain).reshape(n1, m1, n2, m2)
        taps = np.einsum("abcd,abs,cdu,cdt->tusac", ray_term, ph_tx, ph_rx,
                         dop, optimize=True)
        nt, nu, ns = taps.shape[:3]
        taps = taps.reshape(nt, nu, ns, n1 * n2)
        out.append(CirTensor(coefficients=np.ascontiguousarray(taps[..., order]),
                             tap_delays_s=delays[order], sample_times_s=t,
                             meta={"f_hz": f_hz, "cascade": True,
                                   "ideal_panel": panel.ideal}))
    return out


def cascade_cir(leg1: ClusterSet, leg2: ClusterSet, panel: RisPanel,
                codebook: RisCodebook, tx: ArrayGeometry, rx: ArrayGeometry,
                f_hz: float, times=None, tx_pattern="isotropic",
                rx_pattern="isotropic") -> CirTensor:
    """Single-panel cascade; see ``cascade_cir_multi``."""
    return cascade_cir_multi(leg1, leg2, [panel], codebook, tx, rx, f_hz,
                             times=times, tx_pattern=tx_pattern,
                             rx_pattern=rx_pattern)[0]
