"""Weighted nonlinear least squares and the two-step spectroscopy fits.

The engine is a damped Gauss-Newton iteration (Levenberg damping) with
central finite-difference Jacobians.  On top of it sit the two fits used
to reduce a measured resonance: a Lorentzian fit of the fluorescence
peak, which pins the power-broadened width, and a Fano fit of the
wing-normalized transmission with that width held fixed.  Repeating both
at several pump powers and extrapolating to zero power yields the
unbroadened linewidth and the zero-power visibility and asymmetry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    FitRejectedError,
    ParameterDomainError,
    RankDeficiencyError,
)
from .spectra import Spectrum, fano

MAX_ITERATIONS = 200
REL_TOL = 1e-10
_COST_FLOOR_PER_POINT = 1e-28  # squared machine noise; treat as an exact fit


def _fd_jacobian(fun, p, bounds):
    """Central finite-difference Jacobian, one-sided where the box interferes."""
    lo, hi = bounds
    r0 = None
    cols = []
    for i in range(p.size):
        h = max(1e-8, 1e-6 * abs(p[i]))
        up = min(p[i] + h, hi[i])
        dn = max(p[i] - h, lo[i])
        if up == dn:
            # parameter pinned by the box; zero column surfaces as rank deficiency
            if r0 is None:
                r0 = np.asarray(fun(p), dtype=float)
            cols.append(np.zeros_like(r0))
            continue
        p_up = p.copy()
        p_dn = p.copy()
        p_up[i] = up
        p_dn[i] = dn
        if up == p[i] or dn == p[i]:
            if r0 is None:
                r0 = np.asarray(fun(p), dtype=float)
        r_up = r0 if up == p[i] else np.asarray(fun(p_up), dtype=float)
        r_dn = r0 if dn == p[i] else np.asarray(fun(p_dn), dtype=float)
        cols.append((r_up - r_dn) / (up - dn))
    return np.column_stack(cols)


@dataclass
class FitResult:
    """Solution of a weighted least-squares problem.

    params        : minimizing parameter vector
    covariance    : inverse Gauss-Newton normal matrix at the solution
                    (variance-scaled post hoc when the data were unweighted)
    residual_norm : sqrt(sum of squared weighted residuals)
    n_iter        : accepted Gauss-Newton iterations
    """

    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    n_iter: int

    @property
    def cost(self) -> float:
        return self.residual_norm**2


def _normalize_bounds(bounds, n):
    if bounds is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if lo.size != n or hi.size != n:
        raise ParameterDomainError("bounds must match the parameter count")
    return lo, hi


def minimize_residuals(fun, x0, bounds=None, rel_tol=REL_TOL, max_iter=MAX_ITERATIONS):
    """Minimize sum(fun(p)**2) by damped Gauss-Newton steps.

    ``fun`` maps a parameter vector to a residual vector.  Convergence is
    declared when the relative step and the relative cost change both
    drop below ``rel_tol`` (or the cost reaches machine noise).  Raises
    :class:`ConvergenceError` at the iteration cap and
    :class:`RankDeficiencyError` when the damped normal matrix cannot be
    solved.

    Returns (params, cost, n_iter, normal_matrix) with the normal matrix
    evaluated undamped at the solution.
    """
    p = np.asarray(x0, dtype=float).copy()
    lo, hi = _normalize_bounds(bounds, p.size)
    if np.any(p < lo) or np.any(p > hi):
        raise ParameterDomainError("initial parameters must lie within bounds")

    r = np.asarray(fun(p), dtype=float)
    cost = float(r @ r)
    cost_floor = _COST_FLOOR_PER_POINT * r.size
    lam = 1e-3
    converged = False
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        if cost <= cost_floor:
            converged = True
            break
        jac = _fd_jacobian(fun, p, (lo, hi))
        grad = jac.T @ r
        normal = jac.T @ jac
        diag = np.diag(normal).copy()
        if not np.all(np.isfinite(normal)):
            raise RankDeficiencyError("non-finite entries in the normal matrix")
        if np.any(diag <= 0):
            raise RankDeficiencyError(
                "normal matrix is rank deficient: a parameter has no effect on the residuals"
            )

        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError as exc:
                raise RankDeficiencyError("singular damped normal matrix") from exc
            p_trial = np.clip(p + step, lo, hi)
            r_trial = np.asarray(fun(p_trial), dtype=float)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost * (1.0 + 1e-15):
                accepted = True
                break
            lam *= 10.0
            if lam > 1e14:
                break

        if not accepted:
            # cannot decrease: accept as a stationary point only if the
            # gradient has collapsed, otherwise report the failure
            if np.linalg.norm(grad) <= 1e-12 * max(1.0, cost):
                converged = True
                break
            raise ConvergenceError(
                f"no acceptable step found after damping escalation (iteration {n_iter})"
            )

        actual_step = p_trial - p
        rel_step = np.linalg.norm(actual_step) / (1.0 + np.linalg.norm(p_trial))
        rel_cost = abs(cost - cost_trial) / max(cost, 1e-300)
        p, r, cost = p_trial, r_trial, cost_trial
        lam = max(lam / 3.0, 1e-12)
        if (rel_step < rel_tol and rel_cost < rel_tol) or cost <= cost_floor:
            converged = True
            break

    if not converged:
        raise ConvergenceError(f"no convergence within {max_iter} iterations")

    jac = _fd_jacobian(fun, p, (lo, hi))
    return p, cost, n_iter, jac.T @ jac


def _invert_normal(normal):
    try:
        cond = np.linalg.cond(normal)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("normal matrix condition estimate failed") from exc
    if not np.isfinite(cond) or cond > 1e15:
        raise RankDeficiencyError(f"normal matrix is numerically singular (cond={cond:.2e})")
    return np.linalg.inv(normal)


def least_squares(model, data: Spectrum, init, bounds=None, rel_tol=REL_TOL, max_iter=MAX_ITERATIONS) -> FitResult:
    """Fit ``model(x, params) -> y`` to a spectrum by weighted least squares.

    Residuals are (model - value) / sigma.  If every sigma is zero the
    fit runs unweighted and the covariance is scaled post hoc by the
    residual variance; mixed zero / nonzero sigmas are rejected.
    """
    init = np.asarray(init, dtype=float)
    if len(data) < init.size + 1:
        raise ParameterDomainError(
            f"need at least {init.size + 1} points to fit {init.size} parameters"
        )
    x, y, sig = data.detuning, data.value, data.sigma
    unweighted = bool(np.all(sig == 0))
    if not unweighted and np.any(sig == 0):
        raise ParameterDomainError("sigma must be all zero or all positive")
    w = np.ones_like(y) if unweighted else 1.0 / sig

    def residuals(p):
        return (np.asarray(model(x, p), dtype=float) - y) * w

    p, cost, n_iter, normal = minimize_residuals(
        residuals, init, bounds=bounds, rel_tol=rel_tol, max_iter=max_iter
    )
    cov = _invert_normal(normal)
    dof = len(data) - init.size
    if unweighted and dof > 0:
        cov = cov * (cost / dof)
    return FitResult(params=p, covariance=cov, residual_norm=float(np.sqrt(cost)), n_iter=n_iter)


# ---------------------------------------------------------------------------
# Lorentzian fit of the fluorescence peak


@dataclass
class LorentzianFit:
    """Result of a Lorentzian peak fit.

    The model is value = offset + amplitude / (1 + (2 (x - center) / fwhm)**2);
    covariance rows/columns are ordered (center, fwhm, amplitude, offset).
    """

    center: float
    fwhm: float
    amplitude: float
    offset: float
    covariance: np.ndarray

    def __post_init__(self):
        if self.fwhm <= 0:
            raise ParameterDomainError("fwhm must be > 0")

    @property
    def center_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def fwhm_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[1, 1], 0.0)))


def lorentzian_model(x, p):
    center, fwhm, amplitude, offset = p
    u = 2.0 * (x - center) / fwhm
    return offset + amplitude / (1.0 + u * u)


def _half_max_width(x, y, peak_idx, offset):
    """Width estimate from the half-maximum crossings around the peak."""
    half = offset + 0.5 * (y[peak_idx] - offset)
    left = peak_idx
    while left > 0 and y[left] > half:
        left -= 1
    right = peak_idx
    while right < y.size - 1 and y[right] > half:
        right += 1
    if left == peak_idx or right == peak_idx:
        return (x[-1] - x[0]) / 4.0
    # linear interpolation onto the crossing on each side
    def cross(i, j):
        if y[j] == y[i]:
            return x[i]
        return x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i])

    return cross(right - 1, right) - cross(left + 1, left)


def fit_lorentzian(spectrum: Spectrum) -> LorentzianFit:
    """Fit a Lorentzian peak; rejects data without a discernible peak.

    The peak test requires max(value) - baseline > 3 * median(sigma),
    with the baseline estimated as the median value.  Initialization
    uses the peak position and the half-maximum crossings.
    """
    if len(spectrum) < 5:
        raise ParameterDomainError("need at least 5 points to fit a Lorentzian")
    x, y = spectrum.detuning, spectrum.value
    baseline = float(np.median(y))
    peak_idx = int(np.argmax(y))
    amp0 = y[peak_idx] - baseline
    threshold = 3.0 * float(np.median(spectrum.sigma))
    if not amp0 > threshold:
        raise FitRejectedError(
            "no discernible peak above the baseline",
            diagnostics={
                "peak_minus_baseline": float(amp0),
                "threshold": threshold,
                "baseline": baseline,
            },
        )
    fwhm0 = max(_half_max_width(x, y, peak_idx, baseline), 2.0 * np.min(np.diff(x)))
    init = np.array([x[peak_idx], fwhm0, amp0, baseline])
    span = x[-1] - x[0]
    bounds = (
        np.array([x[0] - span, 0.05 * np.min(np.diff(x)), -np.inf, -np.inf]),
        np.array([x[-1] + span, 100.0 * span, np.inf, np.inf]),
    )
    res = least_squares(lorentzian_model, spectrum, init, bounds=bounds)
    center, fwhm, amplitude, offset = res.params
    return LorentzianFit(
        center=float(center),
        fwhm=float(fwhm),
        amplitude=float(amplitude),
        offset=float(offset),
        covariance=res.covariance,
    )


# ---------------------------------------------------------------------------
# Fano fit of the normalized transmission


@dataclass
class FanoFit:
    """Result of a Fano fit with the linewidth held fixed.

    The model is value = normalization * T((x - center) / (width / 2))
    with T the Fano form; covariance rows/columns are ordered
    (visibility, asymmetry, center, normalization).
    """

    visibility: float
    asymmetry: float
    center: float
    width: float
    normalization: float
    covariance: np.ndarray
    width_held_fixed: bool = True
    runner_up_gap: float | None = None

    def __post_init__(self):
        if self.width <= 0:
            raise ParameterDomainError("width must be > 0")

    @property
    def visibility_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def asymmetry_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[1, 1], 0.0)))


def fano_model(width):
    """Fano model factory for a fixed full width."""
    half = 0.5 * width

    def model(x, p):
        v, q, center, norm = p
        return norm * fano(v, q, (x - center) / half)

    return model


def fit_fano(spectrum: Spectrum, width_fixed, center_init) -> FanoFit:
    """Fit the Fano lineshape with the width pinned from the fluorescence fit.

    Free parameters: visibility, asymmetry, center and an overall
    normalization; multi-start from deterministic perturbations of the
    initialization guards against the shallow secondary minima of the
    asymmetric lineshape, and the cost gap to the runner-up start is
    reported.
    """
    if width_fixed <= 0:
        raise ParameterDomainError("width_fixed must be > 0")
    if len(spectrum) < 5:
        raise ParameterDomainError("need at least 5 points to fit a Fano lineshape")
    x, y = spectrum.detuning, spectrum.value
    n_wing = max(2, len(spectrum) // 10)
    norm0 = float(np.median(np.concatenate([y[:n_wing], y[-n_wing:]])))
    if norm0 <= 0:
        norm0 = max(float(np.median(y)), 1e-30)
    v0 = 1.0 - float(np.min(y)) / norm0
    half = 0.5 * width_fixed
    span = x[-1] - x[0]
    starts = [
        np.array([v0, 0.0, center_init, norm0]),
        np.array([0.5 * v0, 0.01, center_init + 0.25 * half, norm0]),
        np.array([2.0 * v0, -0.01, center_init - 0.25 * half, norm0]),
        np.array([v0, 0.05, center_init, norm0]),
        np.array([v0, -0.05, center_init, norm0]),
    ]
    bounds = (
        np.array([-2.0, -2.0, x[0] - span, 1e-30]),
        np.array([1.0, 2.0, x[-1] + span, np.inf]),
    )
    model = fano_model(width_fixed)
    results = []
    errors = []
    for start in starts:
        try:
            results.append(least_squares(model, spectrum, np.clip(start, *bounds), bounds=bounds))
        except (ConvergenceError, RankDeficiencyError) as exc:
            errors.append(exc)
    if not results:
        raise errors[0]
    results.sort(key=lambda r: r.residual_norm)
    best = results[0]
    gap = results[1].residual_norm - best.residual_norm if len(results) > 1 else None
    v, q, center, norm = best.params
    return FanoFit(
        visibility=float(v),
        asymmetry=float(q),
        center=float(center),
        width=float(width_fixed),
        normalization=float(norm),
        covariance=best.covariance,
        width_held_fixed=True,
        runner_up_gap=gap,
    )


# ---------------------------------------------------------------------------
# Zero-power extrapolation of (FWHM, V, q)


@dataclass(frozen=True)
class PowerEntry:
    """Fit results for one pump power."""

    power: float
    lorentzian: LorentzianFit
    fano: FanoFit


@dataclass
class PowerSeries:
    """Fit results across pump powers, input to the zero-power extrapolation."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        for e in self.entries:
            if e.power <= 0:
                raise ParameterDomainError("pump powers must be > 0")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class ZeroPowerResult:
    """Zero-power limits of the power series.

    gamma2 (rad/s), v0 and q0 are the unbroadened coherence decay rate,
    visibility and asymmetry; p_sat is the saturation power in the units
    of the input powers.  ``mode`` records whether a single p_sat was
    shared across the three channels or each channel was extrapolated
    independently after a failed consistency test.
    """

    gamma2: float
    gamma2_sigma: float
    v0: float
    v0_sigma: float
    q0: float
    q0_sigma: float
    p_sat: float
    p_sat_sigma: float
    mode: str = "shared-psat"
    chi2_reduced: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma2 <= 0:
            raise ParameterDomainError("gamma2 must be > 0")


def _channel_sigmas(sigmas):
    """Effective weights for one channel; zero sigmas fall back to unweighted."""
    sigmas = np.asarray(sigmas, dtype=float)
    if np.all(sigmas == 0):
        return np.ones_like(sigmas)
    positive = sigmas[sigmas > 0]
    return np.where(sigmas > 0, sigmas, np.min(positive))


def extrapolate_zero_power(
    series: PowerSeries,
    shared_psat: bool = True,
    fallback_chi2: float = 10.0,
) -> ZeroPowerResult:
    """Joint zero-power extrapolation of linewidth, visibility and asymmetry.

    Models, with S = P / p_sat:

        fwhm(P) = 2 * gamma2 * sqrt(1 + S)
        V(P)    = v0 / (1 + S)
        q(P)    = q0 / sqrt(1 + S)

    By default the three channels share one p_sat.  If the shared fit is
    inconsistent with the data (reduced chi-squared above
    ``fallback_chi2``), each channel is extrapolated with its own p_sat
    and the result is flagged ``mode="independent-psat"``.
    """
    powers = np.array([e.power for e in series.entries], dtype=float)
    if np.unique(powers).size < 3:
        raise ParameterDomainError("need at least 3 distinct powers to extrapolate")
    fwhm = np.array([e.lorentzian.fwhm for e in series.entries])
    vis = np.array([e.fano.visibility for e in series.entries])
    asym = np.array([e.fano.asymmetry for e in series.entries])
    s_w = _channel_sigmas([e.lorentzian.fwhm_sigma for e in series.entries])
    s_v = _channel_sigmas([e.fano.visibility_sigma for e in series.entries])
    s_q = _channel_sigmas([e.fano.asymmetry_sigma for e in series.entries])

    psat0 = float(np.median(powers))
    order = np.argsort(powers)
    low = order[0]
    g2_0 = 0.5 * fwhm[low] / np.sqrt(1.0 + powers[low] / psat0)
    v0_0 = vis[low] * (1.0 + powers[low] / psat0)
    q0_0 = asym[low] * np.sqrt(1.0 + powers[low] / psat0)

    def joint_residuals(p):
        g2, v0, q0, psat = p
        s = powers / psat
        return np.concatenate(
            [
                (2.0 * g2 * np.sqrt(1.0 + s) - fwhm) / s_w,
                (v0 / (1.0 + s) - vis) / s_v,
                (q0 / np.sqrt(1.0 + s) - asym) / s_q,
            ]
        )

    init = np.array([g2_0, v0_0, q0_0, psat0])
    bounds = (
        np.array([1e-300, -np.inf, -np.inf, 1e-9 * psat0]),
        np.array([np.inf, np.inf, np.inf, np.inf]),
    )
    p, cost, _, normal = minimize_residuals(joint_residuals, init, bounds=bounds)
    dof = max(3 * powers.size - 4, 1)
    chi2_red = cost / dof
    cov = _invert_normal(normal)

    if shared_psat and chi2_red <= fallback_chi2:
        sig = np.sqrt(np.maximum(np.diag(cov), 0.0))
        return ZeroPowerResult(
            gamma2=float(p[0]),
            gamma2_sigma=float(sig[0]),
            v0=float(p[1]),
            v0_sigma=float(sig[1]),
            q0=float(p[2]),
            q0_sigma=float(sig[2]),
            p_sat=float(p[3]),
            p_sat_sigma=float(sig[3]),
            mode="shared-psat",
            chi2_reduced=float(chi2_red),
        )

    # independent per-channel extrapolations
    def channel_fit(values, sigmas, model, init2, amp_lo):
        def res(p2):
            return (model(p2) - values) / sigmas

        p2, _, _, normal2 = minimize_residuals(
            res,
            init2,
            bounds=(np.array([amp_lo, 1e-9 * psat0]), np.array([np.inf, np.inf])),
        )
        cov2 = _invert_normal(normal2)
        return p2, np.sqrt(np.maximum(np.diag(cov2), 0.0))

    pw, sw = channel_fit(
        fwhm, s_w, lambda p2: 2.0 * p2[0] * np.sqrt(1.0 + powers / p2[1]),
        np.array([g2_0, psat0]), 1e-300,
    )
    pv, sv = channel_fit(
        vis, s_v, lambda p2: p2[0] / (1.0 + powers / p2[1]),
        np.array([v0_0, psat0]), -np.inf,
    )
    pq, sq = channel_fit(
        asym, s_q, lambda p2: p2[0] / np.sqrt(1.0 + powers / p2[1]),
        np.array([q0_0, psat0]), -np.inf,
    )
    return ZeroPowerResult(
        gamma2=float(pw[0]),
        gamma2_sigma=float(sw[0]),
        v0=float(pv[0]),
        v0_sigma=float(sv[0]),
        q0=float(pq[0]),
        q0_sigma=float(sq[0]),
        p_sat=float(pw[1]),
        p_sat_sigma=float(sw[1]),
        mode="independent-psat",
        chi2_reduced=float(chi2_red),
        details={
            "p_sat_fwhm": float(pw[1]),
            "p_sat_visibility": float(pv[1]),
            "p_sat_asymmetry": float(pq[1]),
            "shared_fit_chi2_reduced": float(chi2_red),
        },
    )
