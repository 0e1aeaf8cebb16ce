"""Steady-state forward models for extinction spectroscopy.

A two-level emitter sits inside a passive linear photonic structure with
a pump port and a probe port.  The transmitted probe signal is the
interference of the directly transmitted pump field with the field the
emitter scatters coherently into the probe mode, plus the incoherently
scattered power.  Near resonance this produces a Fano lineshape whose
visibility ``V`` and asymmetry ``q`` encode the effective coupling
efficiency ``beta_eff`` and the propagation phase difference ``phi_t``.

Conventions
-----------
* All rates and frequencies are angular (rad/s).
* Detuning is ``delta = omega_laser - omega0``; positive detuning is blue.
* ``lw_ratio`` denotes gamma1_total / (2 * gamma2), which is 1 in the
  lifetime limit and smaller when extra dephasing is present.
* The saturation parameter is ``S = rabi**2 / (gamma1_total * gamma2)``.

All operations are pure functions and broadcast over ``detuning``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterDomainError
from .units import HBAR


def _require(condition, message):
    if not condition:
        raise ParameterDomainError(message)


@dataclass(frozen=True)
class EmitterParams:
    """Rates and resonance frequency of a two-level emitter.

    Attributes
    ----------
    gamma1_total : float
        Total decay rate of the upper-state population (rad/s).
    gamma2 : float
        Decay rate of the optical coherence by all mechanisms (rad/s).
        Density-matrix positivity requires gamma1_total <= 2 * gamma2;
        equality is the lifetime limit.
    gamma1_zpl : float
        Partial radiative decay rate at the drive frequency (rad/s),
        i.e. the coherent zero-phonon channel.
    omega0 : float
        Resonance frequency of the transition (rad/s).
    """

    gamma1_total: float
    gamma2: float
    gamma1_zpl: float
    omega0: float

    def __post_init__(self):
        _require(self.gamma1_total > 0, "gamma1_total must be > 0")
        _require(self.gamma2 > 0, "gamma2 must be > 0")
        _require(
            0.0 <= self.gamma1_zpl <= self.gamma1_total,
            "gamma1_zpl must lie in [0, gamma1_total]",
        )
        _require(
            self.gamma1_total <= 2.0 * self.gamma2,
            "gamma1_total must not exceed 2 * gamma2 (density-matrix positivity)",
        )
        _require(self.omega0 > 0, "omega0 must be > 0")

    @property
    def alpha(self) -> float:
        """Fraction of the total decay that is coherent: gamma1_zpl / gamma1_total."""
        return self.gamma1_zpl / self.gamma1_total

    @property
    def lw_ratio(self) -> float:
        """gamma1_total / (2 * gamma2); equals 1 in the lifetime limit."""
        return self.gamma1_total / (2.0 * self.gamma2)


@dataclass(frozen=True)
class CouplingParams:
    """Photonic-environment quantities seen by the emitter.

    ``beta_pump`` (``beta_probe``) is the probability that a photon
    leaving the emitter enters the pump (probe) guide mode.  ``t0_mag``
    and ``r0_mag`` are the field transmission/reflection amplitudes of
    the bare structure, and ``phi_t`` / ``phi_r`` the propagation phase
    differences between the direct and emitter-scattered paths.
    """

    beta_pump: float
    beta_probe: float
    t0_mag: float
    r0_mag: float = 0.0
    phi_t: float = 0.0
    phi_r: float = 0.0

    def __post_init__(self):
        _require(0.0 <= self.beta_pump <= 1.0, "beta_pump must lie in [0, 1]")
        _require(0.0 <= self.beta_probe <= 1.0, "beta_probe must lie in [0, 1]")
        _require(0.0 <= self.t0_mag <= 1.0, "t0_mag must lie in [0, 1]")
        _require(0.0 <= self.r0_mag <= 1.0, "r0_mag must lie in [0, 1]")
        _require(
            self.t0_mag**2 + self.r0_mag**2 <= 1.0 + 1e-12,
            "t0_mag**2 + r0_mag**2 must not exceed 1 (passive structure)",
        )
        _require(
            4.0 * self.beta_pump * self.beta_probe <= 1.0 + 1e-12,
            "derived beta_eff = sqrt(4 * beta_pump * beta_probe) must not exceed 1",
        )

    @property
    def beta_eff(self) -> float:
        """Effective coupling efficiency sqrt(4 * beta_pump * beta_probe)."""
        return float(np.sqrt(4.0 * self.beta_pump * self.beta_probe))


@dataclass(frozen=True)
class DriveConfig:
    """Continuous-wave drive at frequency ``omega``.

    Exactly one of power or Rabi rate is the independent input; the
    factory methods keep track of which one was given.
    """

    omega: float
    rabi: float
    power_in: float | None = None

    def __post_init__(self):
        _require(self.omega > 0, "omega must be > 0")
        _require(self.rabi >= 0, "rabi must be >= 0")
        if self.power_in is not None:
            _require(self.power_in >= 0, "power_in must be >= 0")

    @classmethod
    def from_rabi(cls, rabi, omega) -> "DriveConfig":
        return cls(omega=omega, rabi=float(rabi))

    @classmethod
    def from_power(cls, power_in, omega, beta_pump, gamma1_zpl) -> "DriveConfig":
        rabi = rabi_from_power(beta_pump, gamma1_zpl, power_in, omega)
        return cls(omega=omega, rabi=float(rabi), power_in=float(power_in))


@dataclass(frozen=True)
class BlochState:
    """Steady state of the driven two-level emitter.

    ``rho_ee`` is the excited-state population and ``rho_ge`` the optical
    coherence, stored as an explicit complex (real, imaginary) pair.
    """

    rho_ee: float | np.ndarray
    rho_ge: complex | np.ndarray

    def __post_init__(self):
        ee = np.asarray(self.rho_ee)
        _require(np.all(ee >= -1e-12), "rho_ee must be >= 0")
        _require(np.all(ee <= 0.5 + 1e-12), "rho_ee must be <= 1/2")


@dataclass
class Spectrum:
    """A sampled signal-versus-detuning trace with per-point uncertainty.

    detuning : strictly increasing array, rad/s
    value    : dimensionless signal, same length
    sigma    : per-point standard deviation, >= 0 (zeros mean unweighted)
    meta     : free-form provenance (pump power, labels, generation truth)
    """

    detuning: np.ndarray
    value: np.ndarray
    sigma: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.detuning, dtype=float))
        v = np.atleast_1d(np.asarray(self.value, dtype=float))
        if self.sigma is None:
            s = np.zeros_like(d)
        else:
            s = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        _require(d.ndim == 1, "detuning must be one-dimensional")
        _require(d.size == v.size == s.size, "detuning, value, sigma must have equal length")
        _require(np.all(np.diff(d) > 0), "detunings must be strictly increasing")
        _require(np.all(s >= 0), "sigma must be >= 0")
        self.detuning, self.value, self.sigma = d, v, s

    def __len__(self) -> int:
        return self.detuning.size


def saturation(rabi, emitter: EmitterParams) -> float:
    """Saturation parameter S = rabi**2 / (gamma1_total * gamma2)."""
    _require(rabi >= 0, "rabi must be >= 0")
    return rabi**2 / (emitter.gamma1_total * emitter.gamma2)


def rabi_from_power(beta_pump, gamma1_zpl, power_in, omega):
    """Rabi rate produced by power ``power_in`` (W) entering the pump guide.

    rabi**2 = 4 * beta_pump * gamma1_zpl * power_in / (hbar * omega),
    so the squared Rabi rate is strictly linear in the input power.
    """
    _require(omega > 0, "omega must be > 0")
    _require(beta_pump >= 0, "beta_pump must be >= 0")
    _require(gamma1_zpl >= 0, "gamma1_zpl must be >= 0")
    _require(power_in >= 0, "power_in must be >= 0")
    return np.sqrt(4.0 * beta_pump * gamma1_zpl * power_in / (HBAR * omega))


def bloch_steady_state(detuning, emitter: EmitterParams, rabi) -> BlochState:
    """Steady-state density-matrix elements of the driven emitter.

    With d = detuning / gamma2 and S the saturation parameter,

        rho_ee = (S / 2) / (d**2 + 1 + S)
        rho_ge = -(rabi / (2 gamma2)) * (d + i) / (d**2 + 1 + S)

    The population is Lorentzian in detuning with half width
    gamma2 * sqrt(1 + S), hence the power-broadened FWHM
    2 * gamma2 * sqrt(1 + S).
    """
    s = saturation(rabi, emitter)
    d = np.asarray(detuning, dtype=float) / emitter.gamma2
    denom = d * d + 1.0 + s
    rho_ee = 0.5 * s / denom
    rho_ge = -(rabi / (2.0 * emitter.gamma2)) * (d + 1j) / denom
    return BlochState(rho_ee=rho_ee, rho_ge=rho_ge)


def _spectral_denominator(detuning, emitter: EmitterParams, rabi):
    s = saturation(rabi, emitter)
    d = np.asarray(detuning, dtype=float) / emitter.gamma2
    return d, d * d + 1.0 + s


def transmission(emitter: EmitterParams, coupling: CouplingParams, rabi, detuning):
    """Transmitted power fraction P_out / P_in through the structure.

    Far from resonance this tends to |t0|**2; on resonance the
    interference of the directly transmitted and coherently scattered
    fields carves an asymmetric dip controlled by alpha * beta_eff,
    t0_mag and phi_t.
    """
    a_beta = emitter.alpha * coupling.beta_eff
    t0 = coupling.t0_mag
    d, denom = _spectral_denominator(detuning, emitter, rabi)
    bracket = 2.0 * a_beta * t0 * (np.sin(coupling.phi_t) + d * np.cos(coupling.phi_t)) - a_beta**2
    return t0**2 - bracket * emitter.lw_ratio / denom


def reflection(emitter: EmitterParams, coupling: CouplingParams, rabi, detuning):
    """Reflected power fraction P_refl / P_in (mirror of :func:`transmission`).

    The interference term scales with 4 * alpha * beta_pump * r0_mag and
    the scattered term with 4 * (alpha * beta_pump)**2: the reflected
    emitter field retraces the pump port, so the pump-side coupling
    enters twice.
    """
    a_bp = emitter.alpha * coupling.beta_pump
    r0 = coupling.r0_mag
    d, denom = _spectral_denominator(detuning, emitter, rabi)
    bracket = (
        4.0 * a_bp * r0 * (np.sin(coupling.phi_r) + d * np.cos(coupling.phi_r))
        - 4.0 * a_bp**2
    )
    return r0**2 - bracket * emitter.lw_ratio / denom


def normalized_transmission(emitter: EmitterParams, beta_scaled, phi_t, rabi, detuning):
    """Transmission normalized to its off-resonant wings.

    ``beta_scaled = alpha * beta_eff / t0_mag`` is the only coupling
    quantity that survives normalization; any overall setup attenuation
    cancels, which is what makes wing-normalized data fittable without
    knowing the losses of the apparatus.
    """
    _require(beta_scaled >= 0, "beta_scaled must be >= 0")
    d, denom = _spectral_denominator(detuning, emitter, rabi)
    bracket = beta_scaled * (
        2.0 * (np.sin(phi_t) + d * np.cos(phi_t)) - beta_scaled
    )
    return 1.0 - bracket * emitter.lw_ratio / denom


def fano(visibility, asymmetry, x):
    """Fano lineshape T(x) = (1 - (V + q**2)) / (1 + x**2) + (q + x)**2 / (1 + x**2).

    ``x`` is the detuning in units of the power-broadened half width.
    No clipping is applied: V + q**2 > 1 is mathematically valid here and
    any physical bounds are the business of the fitting layer.
    """
    x = np.asarray(x, dtype=float)
    one_plus = 1.0 + x * x
    return (1.0 - (visibility + asymmetry**2)) / one_plus + (asymmetry + x) ** 2 / one_plus


def fano_params(beta_scaled, phi_t, lw_ratio, saturation=0.0):
    """Map (beta_scaled, phi_t) to the Fano visibility and asymmetry.

        V = beta * (2 sin(phi_t) - beta) * lw_ratio / (1 + S)
        q = -beta * cos(phi_t) * lw_ratio / sqrt(1 + S)
    """
    _require(0.0 < lw_ratio <= 1.0, "lw_ratio must lie in (0, 1]")
    _require(saturation >= 0, "saturation must be >= 0")
    v = beta_scaled * (2.0 * np.sin(phi_t) - beta_scaled) * lw_ratio / (1.0 + saturation)
    q = -beta_scaled * np.cos(phi_t) * lw_ratio / np.sqrt(1.0 + saturation)
    return v, q


def transmission_with_leak(emitter: EmitterParams, beta_scaled, phi_t, rabi, detuning, leak_fraction):
    """Normalized transmission with imperfectly filtered off-resonant scatter.

    A fraction ``leak_fraction`` of the emitter's red-shifted scattered
    power reaches the detector on top of the resonant channel, which
    multiplies the incoherent term by (1 + leak_fraction).  With
    leak_fraction = 0 this reduces exactly to
    :func:`normalized_transmission`.
    """
    _require(beta_scaled >= 0, "beta_scaled must be >= 0")
    _require(leak_fraction >= 0, "leak_fraction must be >= 0")
    d, denom = _spectral_denominator(detuning, emitter, rabi)
    bracket = beta_scaled * (
        2.0 * (np.sin(phi_t) + d * np.cos(phi_t)) - beta_scaled * (1.0 + leak_fraction)
    )
    return 1.0 - bracket * emitter.lw_ratio / denom
