"""Unit conversions at the I/O boundary, plus fixed physical constants.

All rates and frequencies are angular (rad/s) inside the package.  Files
and reports use linear-frequency MHz for detunings and linewidths, and
degrees for phases, so the 2*pi factors live here and nowhere else.
"""

import math

HBAR = 1.054571817e-34  # J s
C_VACUUM = 299792458.0  # m / s

_TWO_PI_MHZ = 2.0 * math.pi * 1e6


def rad_per_s_from_mhz(f_mhz):
    """Angular rate (rad/s) from a linear frequency in MHz."""
    return _TWO_PI_MHZ * f_mhz


def mhz_from_rad_per_s(omega):
    """Linear frequency (MHz) from an angular rate in rad/s."""
    return omega / _TWO_PI_MHZ


def omega_from_wavelength_nm(wavelength_nm):
    """Angular frequency (rad/s) of light with the given vacuum wavelength."""
    if wavelength_nm <= 0:
        raise ValueError("wavelength_nm must be > 0")
    return 2.0 * math.pi * C_VACUUM / (wavelength_nm * 1e-9)
