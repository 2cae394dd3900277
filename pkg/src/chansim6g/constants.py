"""Physical constants shared across the simulator.

The propagation speed uses the rounded 3e8 m/s convention common to
link-level channel simulators; published loss anchors (e.g. 61.38 dB at
1 m / 28 GHz) assume it.
"""

C_LIGHT = 3.0e8  # m/s

# Free-space wave impedance sqrt(mu0/eps0), ohms.
Z0_OHM = 376.730313668

# Spherical-Earth radius used for all satellite geometry, meters.
EARTH_RADIUS_M = 6371.0e3


def wavelength(freq_hz: float) -> float:
    if freq_hz <= 0:
        raise ValueError(f"frequency must be positive, got {freq_hz}")
    return C_LIGHT / freq_hz
