"""Command-line pipeline: simulate, fit, invert, locate, plotdata.

File formats
------------
Spectrum CSV : header ``detuning_mhz,signal,sigma``; linear-frequency MHz
    in files, rad/s in memory; ``#`` comment lines; an optional
    ``# meta: {json}`` line carries provenance.
Config / manifest / report : JSON documents with a ``format_version``
    field; reports serialize with sorted keys so identical analyses are
    byte-identical up to the timestamp field, which is excluded from the
    content hash.

Exit codes: 0 success, 2 usage or schema error, 3 fit failure,
4 inversion inconsistency, 5 I/O error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    FitError,
    InversionError,
    MapFormatError,
    NoSolutionError,
    ParameterDomainError,
    SchemaError,
)
from .fitting import (
    PowerEntry,
    PowerSeries,
    extrapolate_zero_power,
    fano_model,
    fit_fano,
    fit_lorentzian,
    lorentzian_model,
)
from .inversion import propagate_uncertainty, select_physical_branch, solve_beta_phi
from .localization import beta_range_on_contour, dipole_angle, load_map, phase_contour
from .spectra import CouplingParams, EmitterParams, Spectrum, fano_params
from .synth import (
    NoiseModel,
    PowerPair,
    ScenarioConfig,
    generate_fluorescence,
    generate_power_series,
    generate_spectrum,
)
from .units import mhz_from_rad_per_s, omega_from_wavelength_nm, rad_per_s_from_mhz
from .version import VERSION

TOOL_NAME = "extspec"
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Spectrum CSV I/O


def write_spectrum_csv(path, spectrum: Spectrum):
    lines = [f"# {TOOL_NAME} spectrum format_version={FORMAT_VERSION}"]
    if spectrum.meta:
        lines.append("# meta: " + json.dumps(spectrum.meta, sort_keys=True))
    lines.append("detuning_mhz,signal,sigma")
    for d, v, s in zip(spectrum.detuning, spectrum.value, spectrum.sigma):
        lines.append(f"{float(mhz_from_rad_per_s(d))!r},{float(v)!r},{float(s)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_spectrum_csv(path) -> Spectrum:
    meta = {}
    det, val, sig = [], [], []
    header_seen = False
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("meta:"):
                try:
                    meta = json.loads(body[len("meta:"):])
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path}:{lineno}: bad meta JSON") from exc
            continue
        if not header_seen:
            if [c.strip() for c in line.split(",")] != ["detuning_mhz", "signal", "sigma"]:
                raise SchemaError(f"{path}:{lineno}: header must be 'detuning_mhz,signal,sigma'")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise SchemaError(f"{path}:{lineno}: expected 3 columns")
        try:
            det.append(rad_per_s_from_mhz(float(parts[0])))
            val.append(float(parts[1]))
            sig.append(float(parts[2]))
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: non-numeric value") from exc
    if not det:
        raise SchemaError(f"{path}: no data rows")
    try:
        return Spectrum(detuning=np.array(det), value=np.array(val), sigma=np.array(sig), meta=meta)
    except ParameterDomainError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Analysis report


@dataclass
class AnalysisReport:
    """JSON-compatible analysis document with a content hash.

    The hash covers the canonical serialization with the timestamp
    removed, so reruns of a deterministic pipeline hash identically.
    """

    data: dict

    @classmethod
    def new(cls, seed=None) -> "AnalysisReport":
        return cls(
            data={
                "format_version": FORMAT_VERSION,
                "tool_name": TOOL_NAME,
                "tool_version": VERSION,
                "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
                "seed": seed,
                "warnings": [],
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path) -> "AnalysisReport":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
            raise SchemaError(f"{path}: missing or unsupported format_version")
        return cls(data=doc)

    def content_hash(self) -> str:
        stripped = {k: v for k, v in self.data.items() if k != "timestamp_utc"}
        return hashlib.sha256(
            json.dumps(stripped, indent=2, sort_keys=True).encode("utf-8")
        ).hexdigest()


# ---------------------------------------------------------------------------
# Config parsing


def _get(doc, key, kind, default=None, required=False):
    if key not in doc:
        if required:
            raise SchemaError(f"missing required field '{key}'")
        return default
    val = doc[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if kind in (dict, list, str) and isinstance(val, kind):
        return val
    raise SchemaError(f"field '{key}' must be of type {kind.__name__}")


def parse_scenario_config(doc) -> ScenarioConfig:
    """Validate a simulation config document and build a ScenarioConfig."""
    if not isinstance(doc, dict):
        raise SchemaError("config must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise SchemaError("missing or unsupported 'format_version'")

    em = _get(doc, "emitter", dict, required=True)
    lifetime_ns = _get(em, "lifetime_ns", float, required=True)
    gamma2_over_pi_mhz = _get(em, "gamma2_over_pi_mhz", float, required=True)
    alpha = _get(em, "alpha", float, required=True)
    wavelength_nm = _get(em, "wavelength_nm", float, default=785.0)
    if lifetime_ns <= 0:
        raise SchemaError("emitter.lifetime_ns must be > 0")
    if not 0.0 <= alpha <= 1.0:
        raise SchemaError("emitter.alpha must lie in [0, 1]")
    gamma1 = 1.0 / (lifetime_ns * 1e-9)
    gamma2 = np.pi * gamma2_over_pi_mhz * 1e6
    try:
        emitter = EmitterParams(
            gamma1_total=gamma1,
            gamma2=gamma2,
            gamma1_zpl=alpha * gamma1,
            omega0=omega_from_wavelength_nm(wavelength_nm),
        )
    except (ParameterDomainError, ValueError) as exc:
        raise SchemaError(f"emitter: {exc}") from exc

    cp = _get(doc, "coupling", dict, required=True)
    beta_eff = _get(cp, "beta_eff", float)
    if beta_eff is not None:
        if not 0.0 <= beta_eff <= 1.0:
            raise SchemaError("coupling.beta_eff must lie in [0, 1]")
        beta_pump = beta_probe = beta_eff / 2.0
    else:
        beta_pump = _get(cp, "beta_pump", float, required=True)
        beta_probe = _get(cp, "beta_probe", float, required=True)
    try:
        coupling = CouplingParams(
            beta_pump=beta_pump,
            beta_probe=beta_probe,
            t0_mag=_get(cp, "t0_mag", float, required=True),
            r0_mag=_get(cp, "r0_mag", float, default=0.0),
            phi_t=float(np.deg2rad(_get(cp, "phi_t_deg", float, default=90.0))),
            phi_r=float(np.deg2rad(_get(cp, "phi_r_deg", float, default=0.0))),
        )
    except ParameterDomainError as exc:
        raise SchemaError(f"coupling: {exc}") from exc

    grid_doc = _get(doc, "grid", dict, required=True)
    lo = _get(grid_doc, "min_mhz", float, required=True)
    hi = _get(grid_doc, "max_mhz", float, required=True)
    n = _get(grid_doc, "n_points", int, required=True)
    if not hi > lo:
        raise SchemaError("grid.max_mhz must exceed grid.min_mhz")
    if n < 5:
        raise SchemaError("grid.n_points must be >= 5")
    grid = rad_per_s_from_mhz(np.linspace(lo, hi, n))

    powers = _get(doc, "powers_au", list, required=True)
    if not powers or not all(
        isinstance(p, (int, float)) and not isinstance(p, bool) and p > 0 for p in powers
    ):
        raise SchemaError("powers_au must be a non-empty list of positive numbers")

    def parse_noise(key, default_seed):
        nd = _get(doc, key, dict)
        if nd is None:
            return None
        try:
            return NoiseModel(
                kind=_get(nd, "kind", str, default="gaussian-absolute"),
                magnitude=_get(nd, "magnitude", float, default=0.0),
                seed=_get(nd, "seed", int, default=default_seed),
            )
        except ParameterDomainError as exc:
            raise SchemaError(f"{key}: {exc}") from exc

    seed = _get(doc, "seed", int, default=0)
    noise = parse_noise("noise", seed) or NoiseModel(seed=seed)
    fluor_noise = parse_noise("fluorescence_noise", seed)

    leak = _get(doc, "leak_fraction", float, default=0.0)
    if leak < 0:
        raise SchemaError("leak_fraction must be >= 0")
    eta = _get(doc, "eta", float, default=1.0)
    if eta <= 0:
        raise SchemaError("eta must be > 0")
    p_sat = _get(doc, "p_sat_au", float)

    try:
        return ScenarioConfig(
            emitter=emitter,
            coupling=coupling,
            detuning=tuple(grid),
            powers=tuple(float(p) for p in powers),
            leak_fraction=leak,
            noise=noise,
            fluorescence_noise=fluor_noise,
            eta=eta,
            p_sat=p_sat,
            fluor_scale=_get(doc, "fluor_scale", float, default=1.0),
            fluor_background=_get(doc, "fluor_background", float, default=0.0),
        )
    except ParameterDomainError as exc:
        raise SchemaError(str(exc)) from exc


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    config_path = Path(args.config)
    doc = json.loads(config_path.read_text(encoding="utf-8"))
    config = parse_scenario_config(doc)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    if len(config.powers) >= 3:
        pairs = generate_power_series(config)
    else:
        # short configs still get per-power files, just no extrapolable series
        pairs = [
            PowerPair(
                power=float(p),
                fluorescence=generate_fluorescence(config, p),
                transmission=generate_spectrum(config, p),
            )
            for p in config.powers
        ]

    entries = []
    for idx, pair in enumerate(pairs):
        fl_name = f"power_{idx:02d}_fluorescence.csv"
        tr_name = f"power_{idx:02d}_transmission.csv"
        write_spectrum_csv(outdir / fl_name, pair.fluorescence)
        write_spectrum_csv(outdir / tr_name, pair.transmission)
        entries.append(
            {"power_au": pair.power, "fluorescence": fl_name, "transmission": tr_name}
        )

    s_low = min(config.powers) / config.p_sat if config.p_sat else None
    v0, q0 = fano_params(config.beta_scaled, config.coupling.phi_t, config.emitter.lw_ratio, 0.0)
    truth = {
        "format_version": FORMAT_VERSION,
        "beta_eff": config.coupling.beta_eff,
        "beta_scaled": config.beta_scaled,
        "phi_t_deg": float(np.rad2deg(config.coupling.phi_t)),
        "lw_ratio": config.emitter.lw_ratio,
        "gamma2_over_pi_mhz": config.emitter.gamma2 / np.pi / 1e6,
        "v0": float(v0),
        "q0": float(q0),
        "p_sat_au": config.p_sat,
        "eta": config.eta,
        "leak_fraction": config.leak_fraction,
        "lowest_saturation": s_low,
    }
    manifest = {
        "format_version": FORMAT_VERSION,
        "power_unit": "au" if config.p_sat is not None else "W",
        "config_sha256": _sha256(config_path),
        "seed": config.noise.seed,
        "entries": entries,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )
    (outdir / "truth.json").write_text(
        json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )
    print(f"wrote {2 * len(entries)} spectra + manifest.json + truth.json to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# fit


def _fit_one_power(power, fluor: Spectrum, trans: Spectrum):
    lor = fit_lorentzian(fluor)
    fano_fit = fit_fano(trans, width_fixed=lor.fwhm, center_init=lor.center)
    return PowerEntry(power=power, lorentzian=lor, fano=fano_fit)


def _per_power_row(entry: PowerEntry) -> dict:
    lor, fan = entry.lorentzian, entry.fano
    return {
        "power_au": entry.power,
        "status": "ok",
        "fwhm_mhz": mhz_from_rad_per_s(lor.fwhm),
        "fwhm_sigma_mhz": mhz_from_rad_per_s(lor.fwhm_sigma),
        "lorentz_center_mhz": mhz_from_rad_per_s(lor.center),
        "lorentz_amplitude": lor.amplitude,
        "lorentz_offset": lor.offset,
        "visibility": fan.visibility,
        "visibility_sigma": fan.visibility_sigma,
        "asymmetry": fan.asymmetry,
        "asymmetry_sigma": fan.asymmetry_sigma,
        "fano_center_mhz": mhz_from_rad_per_s(fan.center),
        "normalization": fan.normalization,
        "runner_up_gap": fan.runner_up_gap,
    }


def cmd_fit(args) -> int:
    manifest_path = Path(args.manifest)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if not isinstance(manifest, dict) or manifest.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"{manifest_path}: missing or unsupported format_version")
    entries = manifest.get("entries", [])
    if not entries:
        raise SchemaError(f"{manifest_path}: manifest has no entries")

    report = AnalysisReport.new(seed=manifest.get("seed"))
    base = manifest_path.parent
    spectra_hashes = {}
    series_entries = []
    rows = []
    warnings = report.data["warnings"]

    for entry in entries:
        power = entry.get("power_au")
        fl_rel, tr_rel = entry.get("fluorescence"), entry.get("transmission")
        if power is None or fl_rel is None or tr_rel is None:
            warnings.append(f"manifest entry {entry!r} incomplete; skipped")
            continue
        fl_path, tr_path = base / fl_rel, base / tr_rel
        missing = [str(p) for p in (fl_path, tr_path) if not p.exists()]
        if missing:
            warnings.append(f"power {power}: missing file(s) {missing}; skipped")
            continue
        try:
            fluor = read_spectrum_csv(fl_path)
            trans = read_spectrum_csv(tr_path)
            spectra_hashes[fl_rel] = _sha256(fl_path)
            spectra_hashes[tr_rel] = _sha256(tr_path)
            fit_entry = _fit_one_power(float(power), fluor, trans)
        except (FitError, ParameterDomainError, SchemaError) as exc:
            warnings.append(f"power {power}: {type(exc).__name__}: {exc}")
            rows.append({"power_au": power, "status": f"failed: {exc}"})
            continue
        series_entries.append(fit_entry)
        rows.append(_per_power_row(fit_entry))

    if not series_entries:
        raise FitError("no power point could be fitted")

    zero_power = None
    try:
        zp = extrapolate_zero_power(
            PowerSeries(entries=series_entries),
            shared_psat=not args.independent_psat,
        )
        zero_power = {
            "gamma2_over_pi_mhz": zp.gamma2 / np.pi / 1e6,
            "gamma2_over_pi_sigma_mhz": zp.gamma2_sigma / np.pi / 1e6,
            "v0": zp.v0,
            "v0_sigma": zp.v0_sigma,
            "q0": zp.q0,
            "q0_sigma": zp.q0_sigma,
            "p_sat_au": zp.p_sat,
            "p_sat_sigma_au": zp.p_sat_sigma,
            "mode": zp.mode,
            "chi2_reduced": zp.chi2_reduced,
            "details": zp.details,
        }
    except (FitError, ParameterDomainError) as exc:
        warnings.append(f"zero-power extrapolation unavailable: {exc}")

    report.data.update(
        {
            "inputs": {
                "manifest_path": str(manifest_path),
                "manifest_sha256": _sha256(manifest_path),
                "spectra_sha256": spectra_hashes,
            },
            "per_power": rows,
            "zero_power": zero_power,
        }
    )
    report.save(args.output)
    print(f"fit {len(series_entries)}/{len(entries)} powers; report -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# invert


def cmd_invert(args) -> int:
    if args.from_report:
        source = AnalysisReport.load(args.from_report)
        zp = source.data.get("zero_power")
        if not zp:
            raise SchemaError(f"{args.from_report}: report has no zero_power section")
        v0, q0 = zp["v0"], zp["q0"]
        v0_sigma = args.sigma_v0 if args.sigma_v0 is not None else zp.get("v0_sigma", 0.0)
        q0_sigma = args.sigma_q0 if args.sigma_q0 is not None else zp.get("q0_sigma", 0.0)
        report = source
    else:
        if args.v0 is None or args.q0 is None:
            raise SchemaError("either --from-report or both --v0 and --q0 are required")
        v0, q0 = args.v0, args.q0
        v0_sigma = args.sigma_v0 or 0.0
        q0_sigma = args.sigma_q0 or 0.0
        report = AnalysisReport.new(seed=args.seed)

    branches = solve_beta_phi(v0, q0, args.lw_ratio)
    result = propagate_uncertainty(
        v0,
        v0_sigma,
        q0,
        q0_sigma,
        args.lw_ratio,
        args.sigma_lw_ratio or 0.0,
        args.t0_mag,
        args.sigma_t0_mag or 0.0,
        args.alpha,
        args.sigma_alpha or 0.0,
        n_samples=args.n_samples,
        seed=args.seed,
    )

    branch_rows = []
    for sol in branches:
        be = sol.beta_scaled * args.t0_mag / args.alpha
        branch_rows.append(
            {
                "branch": sol.branch,
                "beta_scaled": sol.beta_scaled,
                "phi_t_deg": float(np.rad2deg(sol.phi_t)),
                "beta_eff": be,
                "physical": bool(be <= 1.0 + 1e-12),
                "degenerate": sol.degenerate,
            }
        )

    report.data["inversion"] = {
        "inputs": {
            "v0": v0,
            "v0_sigma": v0_sigma,
            "q0": q0,
            "q0_sigma": q0_sigma,
            "lw_ratio": args.lw_ratio,
            "lw_ratio_sigma": args.sigma_lw_ratio or 0.0,
            "t0_mag": args.t0_mag,
            "t0_mag_sigma": args.sigma_t0_mag or 0.0,
            "alpha": args.alpha,
            "alpha_sigma": args.sigma_alpha or 0.0,
        },
        "branches": branch_rows,
        "selected": {
            "branch_used": result.branch_used,
            "beta_eff": result.beta_eff,
            "beta_eff_sigma": result.beta_eff_sigma,
            "phi_t_deg": float(np.rad2deg(result.phi_t)),
            "phi_t_sigma_deg": float(np.rad2deg(result.phi_t_sigma)),
            "ambiguous": result.ambiguous,
            "degenerate": result.degenerate,
            "rejected_branch_reason": result.rejected_branch_reason,
            "alternate_beta_eff": result.alternate_beta_eff,
            "alternate_phi_t_deg": (
                None
                if result.alternate_phi_t is None
                else float(np.rad2deg(result.alternate_phi_t))
            ),
        },
        "monte_carlo": {
            k: result.diagnostics[k]
            for k in ("n_samples", "seed", "failed_fraction", "branch_flip_fraction")
        }
        | {
            "mc_mean_beta_eff": result.diagnostics["mc_mean_beta_eff"],
            "mc_mean_phi_t_deg": float(np.rad2deg(result.diagnostics["mc_mean_phi_t"])),
        },
    }
    report.save(args.output)
    sel = report.data["inversion"]["selected"]
    print(
        f"beta_eff = {sel['beta_eff']:.4f} +/- {sel['beta_eff_sigma']:.4f}, "
        f"phi_t = {sel['phi_t_deg']:.2f} +/- {sel['phi_t_sigma_deg']:.2f} deg "
        f"({sel['branch_used']} branch); report -> {args.output}"
    )
    return 0


# ---------------------------------------------------------------------------
# locate


def cmd_locate(args) -> int:
    report = AnalysisReport.load(args.report)
    inv = report.data.get("inversion")
    if not inv or "selected" not in inv:
        raise SchemaError(f"{args.report}: report has no inversion result")
    beta_measured = inv["selected"]["beta_eff"]
    phi_target_deg = inv["selected"]["phi_t_deg"]
    cmap = load_map(args.map)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    tol = float(np.deg2rad(args.phi_tolerance_deg))
    contours = phase_contour(cmap, float(np.deg2rad(phi_target_deg)), tol)

    loc = {
        "phi_target_deg": phi_target_deg,
        "phi_tolerance_deg": args.phi_tolerance_deg,
        "beta_eff_measured": beta_measured,
        "n_contour_branches": len(contours),
    }
    contour_lines = ["branch_id,y_nm,z_nm,beta_eff"]
    for bid, poly in enumerate(contours):
        for y, z in poly:
            contour_lines.append(f"{bid},{float(y)!r},{float(z)!r},{cmap.beta_at(y, z)!r}")
    (outdir / "contour.csv").write_text(
        "\n".join(contour_lines) + "\n", encoding="utf-8", newline="\n"
    )

    if not contours:
        loc["message"] = "map never reaches the target phase; no position constraint"
    else:
        beta_lo, beta_hi = beta_range_on_contour(cmap, contours)
        loc["beta_map_range"] = [beta_lo, beta_hi]
        if beta_measured > beta_hi:
            loc["no_solution"] = True
            loc["message"] = (
                f"measured beta_eff={beta_measured:.3g} exceeds the map maximum "
                f"{beta_hi:.3g} on the contour; no dipole orientation can explain it"
            )
        else:
            theta_hi = float(np.rad2deg(dipole_angle(beta_measured, beta_hi)))
            theta_lo = (
                float(np.rad2deg(dipole_angle(beta_measured, beta_lo)))
                if beta_measured <= beta_lo
                else 0.0
            )
            loc["theta_deg_range"] = [theta_lo, theta_hi]
            loc["message"] = (
                f"dipole angle in [{theta_lo:.0f} deg, {theta_hi:.0f} deg] "
                f"for map couplings in [{beta_lo:.3g}, {beta_hi:.3g}]"
            )

    report.data["localization"] = loc
    out_report = outdir / "report_localized.json"
    report.save(out_report)
    print(loc["message"] + f"; contour -> {outdir / 'contour.csv'}")
    return 0


# ---------------------------------------------------------------------------
# plotdata


def _write_csv(path, header, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(f"{float(x)!r}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def cmd_plotdata(args) -> int:
    report = AnalysisReport.load(args.report)
    rows = [r for r in report.data.get("per_power") or [] if r.get("status") == "ok"]
    if not rows:
        raise SchemaError(f"{args.report}: report has no fitted powers to plot")
    manifest_path = Path(report.data["inputs"]["manifest_path"])
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    by_power = {e["power_au"]: e for e in manifest.get("entries", [])}
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    base = manifest_path.parent

    n_files = 0
    for idx, row in enumerate(rows):
        entry = by_power.get(row["power_au"])
        if entry is None:
            continue
        fluor = read_spectrum_csv(base / entry["fluorescence"])
        trans = read_spectrum_csv(base / entry["transmission"])
        lor_params = np.array(
            [
                rad_per_s_from_mhz(row["lorentz_center_mhz"]),
                rad_per_s_from_mhz(row["fwhm_mhz"]),
                row["lorentz_amplitude"],
                row["lorentz_offset"],
            ]
        )
        fan_params = np.array(
            [
                row["visibility"],
                row["asymmetry"],
                rad_per_s_from_mhz(row["fano_center_mhz"]),
                row["normalization"],
            ]
        )
        fano_fn = fano_model(rad_per_s_from_mhz(row["fwhm_mhz"]))
        _write_csv(
            outdir / f"overlay_power_{idx:02d}_fluorescence.csv",
            "detuning_mhz,signal,sigma,fit",
            zip(
                mhz_from_rad_per_s(fluor.detuning),
                fluor.value,
                fluor.sigma,
                lorentzian_model(fluor.detuning, lor_params),
            ),
        )
        _write_csv(
            outdir / f"overlay_power_{idx:02d}_transmission.csv",
            "detuning_mhz,signal,sigma,fit",
            zip(
                mhz_from_rad_per_s(trans.detuning),
                trans.value,
                trans.sigma,
                fano_fn(trans.detuning, fan_params),
            ),
        )
        n_files += 2

    zp = report.data.get("zero_power")
    if zp:
        _write_csv(
            outdir / "power_dependence.csv",
            "power_au,fwhm_mhz,fwhm_sigma_mhz,visibility,visibility_sigma,asymmetry,asymmetry_sigma",
            (
                (
                    r["power_au"],
                    r["fwhm_mhz"],
                    r["fwhm_sigma_mhz"],
                    r["visibility"],
                    r["visibility_sigma"],
                    r["asymmetry"],
                    r["asymmetry_sigma"],
                )
                for r in rows
            ),
        )
        powers = np.array([r["power_au"] for r in rows])
        p_grid = np.linspace(powers.min(), powers.max(), 100)
        s = p_grid / zp["p_sat_au"]
        gamma2 = np.pi * zp["gamma2_over_pi_mhz"] * 1e6
        _write_csv(
            outdir / "extrapolation_curves.csv",
            "power_au,fwhm_mhz,visibility,asymmetry",
            zip(
                p_grid,
                mhz_from_rad_per_s(2.0 * gamma2 * np.sqrt(1.0 + s)),
                zp["v0"] / (1.0 + s),
                zp["q0"] / np.sqrt(1.0 + s),
            ),
        )
        n_files += 2
    print(f"wrote {n_files} plot-data files to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description=(
            "Extinction-spectroscopy analysis: simulate synthetic experiments, fit "
            "Lorentzian/Fano lineshapes across pump powers, invert the zero-power "
            "Fano parameters to coupling efficiency and propagation phase, and "
            "constrain the emitter position against a coupling map."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic spectra from a config")
    p.add_argument("config", help="scenario config JSON")
    p.add_argument("-o", "--outdir", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a manifest of fluorescence/transmission pairs")
    p.add_argument("manifest", help="manifest JSON pairing spectra per power")
    p.add_argument("-o", "--output", required=True, help="report JSON to write")
    p.add_argument(
        "--independent-psat",
        action="store_true",
        help="extrapolate each channel with its own saturation power",
    )
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("invert", help="invert (v0, q0) to coupling efficiency and phase")
    p.add_argument("--v0", type=float, help="zero-power visibility")
    p.add_argument("--q0", type=float, help="zero-power asymmetry")
    p.add_argument("--from-report", help="read v0/q0 (and sigmas) from a fit report")
    p.add_argument("--lw-ratio", type=float, required=True, help="gamma1 / (2 gamma2)")
    p.add_argument("--t0-mag", type=float, required=True, help="bare transmission amplitude")
    p.add_argument("--alpha", type=float, required=True, help="coherent branching fraction")
    p.add_argument("--sigma-v0", type=float, default=None)
    p.add_argument("--sigma-q0", type=float, default=None)
    p.add_argument("--sigma-lw-ratio", type=float, default=0.0)
    p.add_argument("--sigma-t0-mag", type=float, default=0.0)
    p.add_argument("--sigma-alpha", type=float, default=0.0)
    p.add_argument("--n-samples", type=int, default=10_000, help="Monte Carlo draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="report JSON to write")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("locate", help="constrain emitter position against a coupling map")
    p.add_argument("report", help="report JSON containing an inversion result")
    p.add_argument("map", help="coupling map CSV (y_nm,z_nm,beta_eff,phi_t_deg)")
    p.add_argument("-o", "--outdir", required=True)
    p.add_argument("--phi-tolerance-deg", type=float, default=1.0)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("plotdata", help="emit plot-ready CSV bundles from a report")
    p.add_argument("report", help="fit report JSON")
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=cmd_plotdata)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, MapFormatError, ParameterDomainError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return 3
    except InversionError as exc:
        print(f"inversion error: {exc}", file=sys.stderr)
        return 4
    except NoSolutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 5


def entrypoint():
    sys.exit(main())
