"""Closed-form inversion of the Fano parameters to coupling and phase.

The zero-power visibility and asymmetry determine the scaled coupling
``beta = alpha * beta_eff / t0_mag`` and the propagation phase ``phi_t``
up to a two-fold branch ambiguity.  With ``vt = v0 / lw_ratio`` and
``qt = q0 / lw_ratio``,

    beta_pm**2 = 2 - vt +/- 2 * sqrt(1 - qt**2 - vt)

and the phase follows from atan2 with the quadrant fixed by the signs of
the interference terms.  Physics selects the branch: a branch whose
implied beta_eff exceeds 1 cannot describe a passive coupler and is
rejected.  Gaussian input uncertainties are propagated by Monte Carlo
with per-draw branch selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InconsistentMeasurementError,
    ParameterDomainError,
    UnstableInversionError,
)
from .spectra import fano_params


@dataclass(frozen=True)
class BranchSolution:
    """One branch of the closed-form inversion.

    beta_scaled = alpha * beta_eff / t0_mag; phi_t in (-pi, pi].  A
    degenerate solution (v0 = q0 = 0) has beta_scaled = 0 and an
    undefined phase, stored as 0 and flagged.
    """

    beta_scaled: float
    phi_t: float
    branch: str  # "minus" | "plus"
    degenerate: bool = False

    def __post_init__(self):
        if self.beta_scaled < 0:
            raise ParameterDomainError("beta_scaled must be >= 0")
        if self.branch not in ("minus", "plus"):
            raise ParameterDomainError("branch must be 'minus' or 'plus'")


@dataclass
class CouplingResult:
    """Physically selected coupling efficiency and phase, with uncertainties."""

    beta_eff: float
    phi_t: float
    branch_used: str
    beta_eff_sigma: float = 0.0
    phi_t_sigma: float = 0.0
    rejected_branch_reason: str = ""
    ambiguous: bool = False
    alternate_beta_eff: float | None = None
    alternate_phi_t: float | None = None
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (-1e-12 <= self.beta_eff <= 1.0 + 1e-12):
            raise ParameterDomainError("beta_eff must lie in [0, 1]")
        if self.beta_eff_sigma < 0 or self.phi_t_sigma < 0:
            raise ParameterDomainError("sigmas must be >= 0")


def _branch_arrays(v0, q0, lw_ratio):
    """Vectorized two-branch solution.

    Returns (beta_minus, beta_plus, phi_minus, phi_plus, discriminant).
    Negative-discriminant entries yield NaN betas/phases; the caller
    decides whether that is an error or a failed Monte Carlo draw.  The
    minus root is evaluated through the product of the roots,
    u_minus * u_plus = vt**2 + 4 qt**2, which avoids the cancellation the
    direct formula suffers at small signals.
    """
    vt = np.asarray(v0, dtype=float) / lw_ratio
    qt = np.asarray(q0, dtype=float) / lw_ratio
    disc = 1.0 - qt * qt - vt
    w = np.sqrt(np.where(disc >= 0, disc, np.nan))
    u_plus = 2.0 - vt + 2.0 * w  # >= 1 wherever disc >= 0
    u_minus = (vt * vt + 4.0 * qt * qt) / u_plus
    beta_minus = np.sqrt(u_minus)
    beta_plus = np.sqrt(u_plus)
    # atan2(vt + u, -2 qt) carries the same quadrant as the published
    # two-argument form; the two differ by the positive factor
    # beta_(other branch)**2, which atan2 ignores.
    phi_minus = np.arctan2(vt + u_minus, -2.0 * qt)
    phi_plus = np.arctan2(vt + u_plus, -2.0 * qt)
    return beta_minus, beta_plus, phi_minus, phi_plus, disc


def solve_beta_phi(v0, q0, lw_ratio):
    """Both branch solutions for measured (v0, q0), small-S limit.

    Returns (minus, plus) as :class:`BranchSolution`.  The inputs are
    zero-power extrapolations; finite-saturation values would bias the
    inversion.  Raises :class:`InconsistentMeasurementError` when the
    discriminant 1 - qt**2 - vt is negative, i.e. when (v0, q0) cannot be
    produced by any (beta, phi_t).
    """
    if not 0.0 < lw_ratio <= 1.0:
        raise ParameterDomainError("lw_ratio must lie in (0, 1]")
    vt = v0 / lw_ratio
    qt = q0 / lw_ratio
    disc = 1.0 - qt * qt - vt
    scale = max(1.0, abs(vt) + qt * qt)
    if disc < -1e-12 * scale:
        raise InconsistentMeasurementError(
            f"discriminant 1 - qt**2 - vt = {disc:.3e} < 0: "
            "(v0, q0) lie outside the image of the forward model"
        )
    disc = max(disc, 0.0)
    w = np.sqrt(disc)
    u_plus = 2.0 - vt + 2.0 * w
    u_minus = (vt * vt + 4.0 * qt * qt) / u_plus
    pm = np.arctan2(vt + u_minus, -2.0 * qt)
    pp = np.arctan2(vt + u_plus, -2.0 * qt)
    degenerate = v0 == 0.0 and q0 == 0.0
    minus = BranchSolution(
        beta_scaled=float(np.sqrt(u_minus)),
        phi_t=0.0 if degenerate else float(pm),
        branch="minus",
        degenerate=degenerate,
    )
    plus = BranchSolution(beta_scaled=float(np.sqrt(u_plus)), phi_t=float(pp), branch="plus")
    return minus, plus


def verify_branch(solution: BranchSolution, lw_ratio):
    """Back-substitute a branch solution into the forward Fano map.

    Returns the (V, q) the solution would produce at zero saturation;
    this is the defining correctness oracle for :func:`solve_beta_phi`.
    """
    return fano_params(solution.beta_scaled, solution.phi_t, lw_ratio, saturation=0.0)


def select_physical_branch(branches, t0_mag, alpha) -> CouplingResult:
    """Reject branches implying beta_eff > 1 and return the survivor.

    ``branches`` is the (minus, plus) pair from :func:`solve_beta_phi`.
    If both branches survive the result is flagged ambiguous and carries
    the alternate solution; if neither does the measurement is
    inconsistent with a passive structure.
    """
    if not 0.0 < t0_mag <= 1.0:
        raise ParameterDomainError("t0_mag must lie in (0, 1]")
    if not 0.0 < alpha <= 1.0:
        raise ParameterDomainError("alpha must lie in (0, 1]")
    minus, plus = branches
    be = {b.branch: b.beta_scaled * t0_mag / alpha for b in (minus, plus)}
    physical = {name: val <= 1.0 + 1e-12 for name, val in be.items()}

    if not any(physical.values()):
        raise InconsistentMeasurementError(
            f"both branches are unphysical: beta_eff_minus={be['minus']:.3g}, "
            f"beta_eff_plus={be['plus']:.3g} both exceed 1"
        )
    if all(physical.values()):
        return CouplingResult(
            beta_eff=be["minus"],
            phi_t=minus.phi_t,
            branch_used="minus",
            ambiguous=True,
            alternate_beta_eff=be["plus"],
            alternate_phi_t=plus.phi_t,
            degenerate=minus.degenerate,
            rejected_branch_reason="",
        )
    selected = minus if physical["minus"] else plus
    rejected = plus if physical["minus"] else minus
    return CouplingResult(
        beta_eff=be[selected.branch],
        phi_t=selected.phi_t,
        branch_used=selected.branch,
        degenerate=selected.degenerate,
        rejected_branch_reason=(
            f"{rejected.branch} branch gives beta_eff = "
            f"{be[rejected.branch]:.3g} > 1 (unphysical)"
        ),
    )


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def propagate_uncertainty(
    v0,
    v0_sigma,
    q0,
    q0_sigma,
    lw_ratio,
    lw_ratio_sigma,
    t0_mag,
    t0_mag_sigma,
    alpha,
    alpha_sigma,
    n_samples=10_000,
    seed=0,
) -> CouplingResult:
    """Monte Carlo propagation of independent Gaussian input uncertainties.

    Draws are truncated to the physical domains (lw_ratio, t0_mag, alpha
    in (0, 1]) by rejection resampling.  Each draw is inverted and branch
    selected on its own; draws with a negative discriminant or with both
    branches unphysical count as failures.  The returned values are the
    point estimates, the sigmas are the standard deviations over the
    successful draws, and the diagnostics record the failure and
    branch-flip fractions.  The counter-based generator makes the result
    a pure function of the seed.
    """
    sigmas = (v0_sigma, q0_sigma, lw_ratio_sigma, t0_mag_sigma, alpha_sigma)
    if any(s < 0 for s in sigmas):
        raise ParameterDomainError("sigmas must be >= 0")
    if n_samples < 1000:
        raise ParameterDomainError("n_samples must be >= 1000")

    point = select_physical_branch(solve_beta_phi(v0, q0, lw_ratio), t0_mag, alpha)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(seed,))))

    def truncated(mean, sig, lo, hi):
        vals = mean + sig * rng.standard_normal(n_samples)
        if sig == 0:
            return vals
        for _ in range(100):
            bad = (vals <= lo) | (vals > hi)
            if not bad.any():
                break
            vals[bad] = mean + sig * rng.standard_normal(int(bad.sum()))
        return vals

    vs = v0 + v0_sigma * rng.standard_normal(n_samples)
    qs = q0 + q0_sigma * rng.standard_normal(n_samples)
    ls = truncated(lw_ratio, lw_ratio_sigma, 0.0, 1.0)
    ts = truncated(t0_mag, t0_mag_sigma, 0.0, 1.0)
    als = truncated(alpha, alpha_sigma, 0.0, 1.0)

    bm, bp, pm, pp, disc = _branch_arrays(vs, qs, ls)
    be_m = bm * ts / als
    be_p = bp * ts / als
    ok_disc = disc >= 0
    phys_m = ok_disc & (be_m <= 1.0 + 1e-12)
    phys_p = ok_disc & (be_p <= 1.0 + 1e-12)
    ok = phys_m | phys_p

    failed_fraction = 1.0 - float(ok.mean())
    if failed_fraction > 0.5:
        raise UnstableInversionError(
            f"{failed_fraction:.0%} of Monte Carlo draws failed to invert"
        )

    beta_sel = np.where(phys_m, be_m, be_p)[ok]
    phi_sel = np.where(phys_m, pm, pp)[ok]
    chosen_branch = np.where(phys_m, 0, 1)[ok]  # 0 = minus
    point_branch = 0 if point.branch_used == "minus" else 1
    flip_fraction = float((chosen_branch != point_branch).mean())

    beta_sigma = float(np.std(beta_sel))
    # unwrap the phase around the point estimate before taking moments
    phi_centered = _wrap_angle(phi_sel - point.phi_t)
    phi_sigma = float(np.std(phi_centered))

    return CouplingResult(
        beta_eff=point.beta_eff,
        phi_t=point.phi_t,
        branch_used=point.branch_used,
        beta_eff_sigma=beta_sigma,
        phi_t_sigma=phi_sigma,
        rejected_branch_reason=point.rejected_branch_reason,
        ambiguous=point.ambiguous,
        alternate_beta_eff=point.alternate_beta_eff,
        alternate_phi_t=point.alternate_phi_t,
        degenerate=point.degenerate,
        diagnostics={
            "n_samples": int(n_samples),
            "seed": int(seed),
            "failed_fraction": failed_fraction,
            "branch_flip_fraction": flip_fraction,
            "mc_mean_beta_eff": float(np.mean(beta_sel)),
            "mc_mean_phi_t": float(point.phi_t + np.mean(phi_centered)),
        },
    )
