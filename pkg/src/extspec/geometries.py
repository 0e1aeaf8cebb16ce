"""Analytic special cases of the photonic structure.

Two geometries admit closed forms that the general extinction model must
reproduce: a lossless continuous waveguide (t0 = 1, r0 = 0, phi_t = pi/2)
and a symmetric cavity in the weak-coupling regime, where the bare-cavity
transmission sets both the coupling and the phase.  These serve as exact
cross-checks of the black-box expressions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError
from .spectra import EmitterParams, _spectral_denominator, _require


@dataclass(frozen=True)
class CavityParams:
    """Symmetric weak-coupling cavity inserted in the guide.

    omega_c   : cavity resonance (rad/s)
    kappa     : cavity field decay rate into the two guides (rad/s)
    gamma_cav : emitter emission rate into the resonant cavity mode (rad/s)

    Validity of the weak-coupling treatment requires gamma_cav << kappa,
    enforced as kappa > weak_coupling_min_ratio * gamma_cav.
    """

    omega_c: float
    kappa: float
    gamma_cav: float
    weak_coupling_min_ratio: float = 10.0

    def __post_init__(self):
        _require(self.kappa > 0, "kappa must be > 0")
        _require(self.gamma_cav >= 0, "gamma_cav must be >= 0")
        _require(self.weak_coupling_min_ratio > 0, "weak_coupling_min_ratio must be > 0")
        _require(
            self.gamma_cav * self.weak_coupling_min_ratio < self.kappa,
            "weak coupling requires gamma_cav < kappa / weak_coupling_min_ratio",
        )


def waveguide_transmission(beta_g, alpha, emitter: EmitterParams, rabi, detuning):
    """Normalized transmission of a lossless continuous waveguide.

    T = 1 - alpha*beta_g * (2 - alpha*beta_g) * lw_ratio / (d**2 + 1 + S),
    which is the general model at phi_t = pi/2, t0_mag = 1 with
    beta_eff = beta_g = 2*beta_pump = 2*beta_probe.
    """
    _require(0.0 <= beta_g <= 1.0, "beta_g must lie in [0, 1]")
    _require(0.0 <= alpha <= 1.0, "alpha must lie in [0, 1]")
    ab = alpha * beta_g
    _, denom = _spectral_denominator(detuning, emitter, rabi)
    return 1.0 - ab * (2.0 - ab) * emitter.lw_ratio / denom


def waveguide_reflection(beta_g, alpha, emitter: EmitterParams, rabi, detuning):
    """Reflection of the lossless continuous waveguide: purely emitter backscatter.

    R = (alpha*beta_g)**2 * lw_ratio / (d**2 + 1 + S).
    """
    _require(0.0 <= beta_g <= 1.0, "beta_g must lie in [0, 1]")
    _require(0.0 <= alpha <= 1.0, "alpha must lie in [0, 1]")
    ab = alpha * beta_g
    _, denom = _spectral_denominator(detuning, emitter, rabi)
    return ab**2 * emitter.lw_ratio / denom


def cavity_t0(omega, cavity: CavityParams) -> complex:
    """Bare transmission amplitude of the symmetric cavity.

    t0(omega) = -1 / (1 - i (omega - omega_c) / kappa); unit magnitude on
    resonance, |t0|**2 = 1/2 one kappa away.
    """
    delta = (np.asarray(omega, dtype=float) - cavity.omega_c) / cavity.kappa
    return -1.0 / (1.0 - 1j * delta)


def cavity_coupling(cavity: CavityParams, emitter: EmitterParams, omega):
    """Effective (beta_cav, phi_t) the cavity presents at drive frequency omega.

    The emission rate into the cavity mode is filtered by the bare-cavity
    response, beta_cav * gamma1_zpl = |t0|**2 * gamma_cav, and the phase
    is phi_t = pi/2 + arg(-t0).  Both depend only on the detuning from
    the cavity, not on where the emitter sits in the mode.

    Lossy or asymmetric cavities are not modeled here; extend by
    replacing :func:`cavity_t0` with the appropriate bare response.
    """
    _require(emitter.gamma1_zpl > 0, "gamma1_zpl must be > 0 to define beta_cav")
    t0 = cavity_t0(omega, cavity)
    beta_cav = np.abs(t0) ** 2 * cavity.gamma_cav / emitter.gamma1_zpl
    if np.any(np.asarray(beta_cav) > 1.0 + 1e-12):
        raise ParameterDomainError(
            "beta_cav exceeds 1; gamma_cav must not exceed gamma1_zpl"
        )
    phi_t = 0.5 * np.pi + np.angle(-t0)
    return beta_cav, phi_t
