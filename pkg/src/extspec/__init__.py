"""Extinction spectroscopy of a single emitter in a passive photonic structure.

Forward spectral models, Lorentzian/Fano fitting across pump powers,
closed-form inversion of the zero-power Fano parameters to the coupling
efficiency and propagation phase, Monte Carlo uncertainty propagation,
coupling-map localization, and synthetic-experiment generation.
"""

from .errors import (
    ConvergenceError,
    FitError,
    FitRejectedError,
    InconsistentMeasurementError,
    InversionError,
    MapFormatError,
    NoSolutionError,
    ParameterDomainError,
    RankDeficiencyError,
    SchemaError,
    UnstableInversionError,
)
from .fitting import (
    FanoFit,
    FitResult,
    LorentzianFit,
    PowerEntry,
    PowerSeries,
    ZeroPowerResult,
    extrapolate_zero_power,
    fit_fano,
    fit_lorentzian,
    least_squares,
)
from .geometries import (
    CavityParams,
    cavity_coupling,
    cavity_t0,
    waveguide_reflection,
    waveguide_transmission,
)
from .inversion import (
    BranchSolution,
    CouplingResult,
    propagate_uncertainty,
    select_physical_branch,
    solve_beta_phi,
    verify_branch,
)
from .localization import (
    CouplingMap,
    beta_range_on_contour,
    dipole_angle,
    load_map,
    phase_contour,
)
from .spectra import (
    BlochState,
    CouplingParams,
    DriveConfig,
    EmitterParams,
    Spectrum,
    bloch_steady_state,
    fano,
    fano_params,
    normalized_transmission,
    rabi_from_power,
    reflection,
    saturation,
    transmission,
    transmission_with_leak,
)
from .synth import (
    LeakStudyRow,
    NoiseModel,
    PowerPair,
    ScenarioConfig,
    generate_fluorescence,
    generate_power_series,
    generate_spectrum,
    leak_robustness_study,
)
from .version import VERSION as __version__

__all__ = [
    "BlochState",
    "BranchSolution",
    "CavityParams",
    "ConvergenceError",
    "CouplingMap",
    "CouplingParams",
    "CouplingResult",
    "DriveConfig",
    "EmitterParams",
    "FanoFit",
    "FitError",
    "FitRejectedError",
    "FitResult",
    "InconsistentMeasurementError",
    "InversionError",
    "LeakStudyRow",
    "LorentzianFit",
    "MapFormatError",
    "NoSolutionError",
    "NoiseModel",
    "ParameterDomainError",
    "PowerEntry",
    "PowerPair",
    "PowerSeries",
    "RankDeficiencyError",
    "ScenarioConfig",
    "SchemaError",
    "Spectrum",
    "UnstableInversionError",
    "ZeroPowerResult",
    "beta_range_on_contour",
    "bloch_steady_state",
    "cavity_coupling",
    "cavity_t0",
    "dipole_angle",
    "extrapolate_zero_power",
    "fano",
    "fano_params",
    "fit_fano",
    "fit_lorentzian",
    "generate_fluorescence",
    "generate_power_series",
    "generate_spectrum",
    "leak_robustness_study",
    "least_squares",
    "load_map",
    "normalized_transmission",
    "phase_contour",
    "propagate_uncertainty",
    "rabi_from_power",
    "reflection",
    "saturation",
    "select_physical_branch",
    "solve_beta_phi",
    "transmission",
    "transmission_with_leak",
    "verify_branch",
    "waveguide_reflection",
    "waveguide_transmission",
]
