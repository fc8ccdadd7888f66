"""Command-line interface: reproducible parameter sweeps and fits.

Every run is driven by a JSON config (shipped preset or user file, with
``--set section.key=value`` overrides applied before validation).  Output
files embed the SHA-256 of the effective config and the package version, so
a result file always identifies the exact inputs that produced it.

Exit codes: 0 success, 1 configuration or input validation error,
2 numerical failure (diverged fit, singular system, failed sweep).
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .cavity import cdmr_sweep
from .config import (
    ConfigError,
    RunConfig,
    SCENARIO_NV,
    apply_overrides,
    build_field_map,
    build_sample_region,
    coupling_axes,
    coupling_for_level,
    dbm_to_watts,
    group_builder,
    laser_relaxation,
    list_presets,
    load_preset_raw,
    validate_config,
)
from .constants import DEFAULT_CONSTANTS, NV_AXES, NV_AXIS_LABELS, TWO_PI
from .coupling import effective_coupling, save_field_map
from .fitting import (
    OdmrDataset,
    fit_cavity_lineshape,
    fit_lorentzian_fwhm,
    fit_orientation,
    load_odmr_csv,
    load_trace_csv,
)
from .nonlinear import (
    BistabilityOnset,
    DuffingParams,
    bistability_onset,
    cooperativity,
    sensitivity,
    weak_expansion,
)
from .cavity import SpinEnsembleGroup
from .spins import (
    defect_frame_components,
    nv_exact_transitions,
    nv_transition_frequencies,
    p1_transition_frequencies,
)

_DEFAULT_PRESET = "nv_default"


def _load_run_config(args) -> RunConfig:
    if args.config:
        with open(args.config) as handle:
            try:
                raw = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"{args.config}: invalid JSON: {exc}"]) from exc
    else:
        raw = load_preset_raw(args.preset or _DEFAULT_PRESET)
    if args.set:
        raw = apply_overrides(raw, args.set)
    if args.output_dir:
        raw["output_dir"] = args.output_dir
    return validate_config(raw)


def _ensure_output_dir(config: RunConfig):
    os.makedirs(config.output_dir, exist_ok=True)
    return config.output_dir


def _stamp_comments(config: RunConfig, extra=()):
    return [f"config_sha256={config.sha256}", f"version={__version__}", *extra]


def _write_json(path, config: RunConfig, payload):
    doc = {"config_sha256": config.sha256, "version": __version__, **payload}
    text = json.dumps(doc, indent=2, sort_keys=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text + "\n")
    print(text)
    return doc


def write_table_csv(path, comments, column_names, rows):
    """Plain CSV with '#' comment lines; floats written with repr for exact round trips."""
    with open(path, "w", encoding="utf-8") as handle:
        for comment in comments:
            handle.write(f"# {comment}\n")
        handle.write(",".join(column_names) + "\n")
        for row in rows:
            handle.write(",".join(repr(float(v)) for v in row) + "\n")


def write_matrix_csv(path, comments, b_mags, omega_p, matrix):
    """Reflectivity matrix with the probe axis (Hz) as the header row and |B| as the first column."""
    with open(path, "w", encoding="utf-8") as handle:
        for comment in comments:
            handle.write(f"# {comment}\n")
        handle.write("b_t\\f_hz," + ",".join(repr(float(w / TWO_PI)) for w in omega_p) + "\n")
        for i in range(len(b_mags)):
            handle.write(
                repr(float(b_mags[i])) + "," + ",".join(repr(float(v)) for v in matrix[i]) + "\n"
            )


def read_matrix_csv(path):
    """Re-parse a matrix written by :func:`write_matrix_csv`.

    Returns (b_mags, f_hz, matrix); values are exactly the written floats.
    """
    f_hz = None
    b_vals = []
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if f_hz is None:
                cells = text.split(",")
                if not cells[0].startswith("b_t"):
                    raise ValueError(f"{path}: missing matrix header row")
                f_hz = np.array([float(c) for c in cells[1:]])
                continue
            cells = text.split(",")
            b_vals.append(float(cells[0]))
            rows.append([float(c) for c in cells[1:]])
    if f_hz is None or not rows:
        raise ValueError(f"{path}: no matrix data found")
    return np.array(b_vals), f_hz, np.array(rows)


def _level_intensity(config: RunConfig, name):
    if name is None:
        return "off", 0.0
    if name not in config.laser.levels:
        raise ConfigError(
            [f"laser level {name!r} not in config; available: {', '.join(config.laser.level_names())}"]
        )
    return name, config.laser.levels[name]


def _share_count(config: RunConfig):
    # Population share of a single group, matching group_builder: an NV
    # class keeps its full quarter share on either branch (same ground-state
    # spins respond on both transitions), while P1 spins split further over
    # the three nuclear manifolds.
    return 4 if config.scenario == SCENARIO_NV else 12


def _cmd_nv_freqs(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    b_hat = config.field_orientation().unit_vector()
    b_mags = config.field_sweep.values()
    names = ["b_t"]
    for label in NV_AXIS_LABELS:
        names += [f"f_minus_{label}_hz", f"f_plus_{label}_hz"]
    if args.exact:
        for label in NV_AXIS_LABELS:
            names += [f"f_minus_exact_{label}_hz", f"f_plus_exact_{label}_hz"]
    rows = []
    for b_mag in b_mags:
        table = nv_transition_frequencies(b_mag * b_hat)
        row = [b_mag]
        for i in range(len(NV_AXIS_LABELS)):
            row += [table.omega_minus[i] / TWO_PI, table.omega_plus[i] / TWO_PI]
        if args.exact:
            for i in range(len(NV_AXIS_LABELS)):
                frame = defect_frame_components(b_mag * b_hat, NV_AXES[i])
                exact = nv_exact_transitions(frame)
                row += [exact[0] / TWO_PI, exact[1] / TWO_PI]
        rows.append(row)
    path = os.path.join(out_dir, "nv_freqs.csv")
    write_table_csv(path, _stamp_comments(config), names, rows)
    print(f"wrote {path} ({len(rows)} field steps)")
    return 0


def _cmd_p1_freqs(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    b_hat = config.field_orientation().unit_vector()
    b_mags = config.field_sweep.values()
    names = ["b_t"]
    for label in NV_AXIS_LABELS:
        names += [f"f_low_{label}_hz", f"f_center_{label}_hz", f"f_high_{label}_hz"]
    rows = []
    for b_mag in b_mags:
        row = [b_mag]
        for axis in NV_AXES:
            lines = p1_transition_frequencies(b_mag * b_hat, axis)
            row += [lines[0] / TWO_PI, lines[1] / TWO_PI, lines[2] / TWO_PI]
        rows.append(row)
    path = os.path.join(out_dir, "p1_freqs.csv")
    write_table_csv(path, _stamp_comments(config), names, rows)
    print(f"wrote {path} ({len(rows)} field steps)")
    return 0


def _cmd_odmr_lines(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    b_hat = config.field_orientation().unit_vector()
    b_mags = config.field_sweep.values()
    names = ["b_t"]
    for label in NV_AXIS_LABELS:
        names += [f"f_minus_{label}_hz", f"f_plus_{label}_hz"]
    rows = []
    for b_mag in b_mags:
        table = nv_transition_frequencies(b_mag * b_hat)
        row = [b_mag]
        for i in range(len(NV_AXIS_LABELS)):
            row += [table.omega_minus[i] / TWO_PI, table.omega_plus[i] / TWO_PI]
        rows.append(row)
    path = os.path.join(out_dir, "odmr_lines.csv")
    write_table_csv(path, _stamp_comments(config), names, rows)
    print(f"wrote {path} ({len(rows)} field steps)")
    return 0


def _cmd_cdmr(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    b_hat = config.field_orientation().unit_vector()
    b_mags = config.field_sweep.values()
    omega_p = config.frequency_sweep.values()
    panels = []
    for power_dbm in config.powers_dbm:
        power_w = dbm_to_watts(power_dbm)
        for level in config.laser.level_names():
            intensity = config.laser.levels[level]
            group_fn = group_builder(config, intensity)
            result = cdmr_sweep(
                config.cavity, group_fn, omega_p, b_mags, b_hat, power_w,
                threads=args.threads,
            )
            tag = f"P{power_dbm:g}dBm_{level}"
            extra = [
                f"scenario={config.scenario} power_dbm={power_dbm:g} "
                f"laser_level={level} intensity_w_per_m2={intensity!r}"
            ]
            rc_path = os.path.join(out_dir, f"cdmr_rc_{tag}.csv")
            write_matrix_csv(rc_path, _stamp_comments(config, extra), b_mags, omega_p, result.r_c)
            eff_path = os.path.join(out_dir, f"cdmr_omega_eff_{tag}.csv")
            write_table_csv(
                eff_path, _stamp_comments(config, extra),
                ["b_t", "omega_eff_hz", "omega_eff_over_omega_c"],
                [
                    [b_mags[i], result.omega_eff[i] / TWO_PI,
                     result.omega_eff[i] / config.cavity.omega_c]
                    for i in range(b_mags.size)
                ],
            )
            panels.append({
                "power_dbm": power_dbm,
                "laser_level": level,
                "intensity_w_per_m2": intensity,
                "rc_csv": rc_path,
                "omega_eff_csv": eff_path,
                "min_rc": float(np.min(result.r_c)),
            })
            print(f"panel {tag}: min R_c = {np.min(result.r_c):.6f} -> {rc_path}")
    manifest = os.path.join(out_dir, "cdmr_manifest.json")
    _write_json(manifest, config, {"panels": panels})
    return 0


def _cmd_coupling(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    level, intensity = _level_intensity(config, args.laser_level)
    g_s_config, state = coupling_for_level(config, intensity)
    field_map = build_field_map(config)
    region = build_sample_region(config, state.p_zs)
    axes = coupling_axes(config)
    result = effective_coupling(
        field_map, region, axes, config.cavity.omega_c, state.t1, config.ensemble.t2,
    )
    payload = {
        "laser_level": level,
        "intensity_w_per_m2": intensity,
        "g_s_rad_per_s": result.g_s,
        "g_s_hz": result.g_s / TWO_PI,
        "g_s_config_hz": g_s_config / TWO_PI,
        "n_eff": result.n_eff,
        "e_cc": result.e_cc,
        "region_volume_m3": result.region_volume,
        "t1_s": state.t1,
        "p_zs": state.p_zs,
        "map_points": list(field_map.shape),
    }
    _write_json(os.path.join(out_dir, "coupling.json"), config, payload)
    return 0


def _cmd_sensitivity(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    ens = config.ensemble
    s_n = sensitivity(
        ens.p_zs_thermal, config.cavity.gamma_c, ens.g_s_off,
        ens.t1_thermal_off, ens.t2,
    )
    payload = {
        "s_n_per_sqrt_hz": s_n,
        "p_zs_thermal": ens.p_zs_thermal,
        "gamma_c_rad_per_s": config.cavity.gamma_c,
        "g_s_rad_per_s": ens.g_s_off,
        "t1_s": ens.t1_thermal_off,
        "t2_s": ens.t2,
    }
    if args.n_eff is not None:
        payload["n_eff"] = args.n_eff
        payload["cooperativity"] = cooperativity(
            args.n_eff, ens.g_s_off, config.cavity.gamma_c, 1.0 / ens.t2,
        )
    _write_json(os.path.join(out_dir, "sensitivity.json"), config, payload)
    return 0


def _expansion_group(config: RunConfig, delta_hz, level_name):
    level, intensity = _level_intensity(config, level_name)
    g_s, state = coupling_for_level(config, intensity)
    ens = config.ensemble
    n_total = ens.density * ens.sample_volume * abs(state.p_zs)
    share = n_total / _share_count(config)
    delta = TWO_PI * delta_hz
    group = SpinEnsembleGroup(
        omega_s=config.cavity.omega_c - delta, delta=delta, g_s=g_s,
        n_eff=share, t1=state.t1, t2=ens.t2, label=f"expand@{level}",
    )
    return level, intensity, group


def _cmd_expand(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    level, intensity, group = _expansion_group(config, args.delta_hz, args.laser_level)
    expansion = weak_expansion(group)
    payload = {
        "laser_level": level,
        "intensity_w_per_m2": intensity,
        "delta_hz": args.delta_hz,
        "n_eff": group.n_eff,
        "e_cc": group.e_cc,
        "zeta2": expansion.zeta2,
        "omega_cs_rad_per_s": expansion.omega_cs,
        "gamma_cs_rad_per_s": expansion.gamma_cs,
        "k_cs_rad_per_s_per_photon": expansion.k_cs,
        "g_cs_rad_per_s_per_photon": expansion.g_cs,
        "omega_cs_hz": expansion.omega_cs / TWO_PI,
        "gamma_cs_hz": expansion.gamma_cs / TWO_PI,
    }
    _write_json(os.path.join(out_dir, "expand.json"), config, payload)
    return 0


def _cmd_bistability(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    level, intensity, group = _expansion_group(config, args.delta_hz, args.laser_level)
    expansion = weak_expansion(group)
    cavity = config.cavity
    params = DuffingParams(
        omega_0=cavity.omega_c + expansion.omega_cs,
        gamma_t=cavity.gamma_c + cavity.gamma_f + expansion.gamma_cs,
        kerr=cavity.kerr + expansion.k_cs,
        cubic_damping=cavity.cubic_damping + expansion.g_cs,
        drive=0.0,
    )
    onset = bistability_onset(params)
    payload = {
        "laser_level": level,
        "intensity_w_per_m2": intensity,
        "delta_hz": args.delta_hz,
        "e_cc": group.e_cc,
        "kerr_rad_per_s_per_photon": params.kerr,
        "cubic_damping_rad_per_s_per_photon": params.cubic_damping,
        "gamma_t_rad_per_s": params.gamma_t,
        "bistable": onset is not None,
    }
    if isinstance(onset, BistabilityOnset):
        power_w = onset.drive * DEFAULT_CONSTANTS.hbar * cavity.omega_c / (4.0 * cavity.gamma_f)
        payload.update({
            "e_co": onset.photon_number,
            "e_co_over_e_cc": onset.photon_number / group.e_cc,
            "omega_p_at_onset_rad_per_s": onset.omega_p,
            "f_p_at_onset_hz": onset.omega_p / TWO_PI,
            "drive_photons_rad2_per_s2": onset.drive,
            "power_at_onset_w": power_w,
            "power_at_onset_dbm": 10.0 * math.log10(power_w / 1e-3),
        })
    _write_json(os.path.join(out_dir, "bistability.json"), config, payload)
    return 0


def _angles_sigma(result):
    if result.covariance is None:
        return None
    return [math.sqrt(max(float(result.covariance[i, i]), 0.0)) for i in range(3)]


def _cmd_fit_orientation(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    dataset = load_odmr_csv(args.data)
    initial = config.field_angles if args.initial is None else tuple(args.initial)
    result = fit_orientation(dataset, initial)
    payload = {
        "initial_angles_rad": list(initial),
        "theta_x_rad": result.parameters["theta_x"],
        "theta_y_rad": result.parameters["theta_y"],
        "theta_z_rad": result.parameters["theta_z"],
        "sigma_rad": _angles_sigma(result),
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "converged": result.converged,
        "message": result.message,
        "records": len(dataset.records),
    }
    if args.monte_carlo:
        rng = np.random.default_rng(args.seed)
        truth = np.array([result.parameters[k] for k in ("theta_x", "theta_y", "theta_z")])
        draws = []
        for _ in range(args.monte_carlo):
            noisy = []
            for b_mag, lines in dataset.records:
                jitter = rng.normal(0.0, args.noise_frac, size=len(lines))
                noisy.append((b_mag, tuple(f * (1.0 + e) for f, e in zip(lines, jitter))))
            trial = fit_orientation(OdmrDataset(records=tuple(noisy)), initial)
            draws.append([trial.parameters[k] for k in ("theta_x", "theta_y", "theta_z")])
        draws = np.asarray(draws)
        payload["monte_carlo"] = {
            "trials": args.monte_carlo,
            "noise_frac": args.noise_frac,
            "seed": args.seed,
            "mean_rad": [float(v) for v in draws.mean(axis=0)],
            "std_rad": [float(v) for v in draws.std(axis=0)],
            "max_abs_error_rad": [float(v) for v in np.max(np.abs(draws - truth), axis=0)],
        }
    _write_json(os.path.join(out_dir, "fit_orientation.json"), config, payload)
    return 0 if result.converged else 2


def _cmd_fit_cavity(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    omega, r_c = load_trace_csv(args.data)
    if args.initial is not None:
        f0, gc0, gf0 = args.initial
        initial = (TWO_PI * f0, TWO_PI * gc0, TWO_PI * gf0)
    else:
        initial = (config.cavity.omega_c, config.cavity.gamma_c, config.cavity.gamma_f)
    result = fit_cavity_lineshape(omega, r_c, initial, overcoupled=not args.undercoupled)
    payload = {
        "omega_c_rad_per_s": result.parameters["omega_c"],
        "gamma_c_rad_per_s": result.parameters["gamma_c"],
        "gamma_f_rad_per_s": result.parameters["gamma_f"],
        "f_c_hz": result.parameters["omega_c"] / TWO_PI,
        "gamma_c_hz": result.parameters["gamma_c"] / TWO_PI,
        "gamma_f_hz": result.parameters["gamma_f"] / TWO_PI,
        "overcoupled": not args.undercoupled,
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "converged": result.converged,
        "message": result.message,
    }
    _write_json(os.path.join(out_dir, "fit_cavity.json"), config, payload)
    return 0 if result.converged else 2


def _cmd_fit_fwhm(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    omega, signal = load_trace_csv(args.data)
    result = fit_lorentzian_fwhm(omega, signal)
    payload = {
        "center_rad_per_s": result.parameters["center"],
        "center_hz": result.parameters["center"] / TWO_PI,
        "fwhm_rad_per_s": result.parameters["fwhm"],
        "fwhm_hz": result.parameters["fwhm"] / TWO_PI,
        "depth": result.parameters["depth"],
        "offset": result.parameters["offset"],
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "converged": result.converged,
        "message": result.message,
    }
    _write_json(os.path.join(out_dir, "fit_fwhm.json"), config, payload)
    return 0 if result.converged else 2


def _cmd_fieldmap_gen_loop(args):
    config = _load_run_config(args)
    out_dir = _ensure_output_dir(config)
    if config.field_map.source != "loop":
        raise ConfigError(["config.field_map.source: gen-loop needs source='loop'"])
    field_map = build_field_map(config)
    path = os.path.join(out_dir, args.output)
    save_field_map(field_map, path, extra_comments=_stamp_comments(config))
    print(f"wrote {path} (grid {field_map.shape[0]}x{field_map.shape[1]}x{field_map.shape[2]})")
    return 0


def _add_config_options(parser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--config", help="path to a JSON config file")
    group.add_argument(
        "--preset",
        help=f"shipped preset name (default {_DEFAULT_PRESET}); available: {', '.join(list_presets())}",
    )
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY.PATH=VALUE",
        help="override a config entry (JSON-parsed value); may repeat",
    )
    parser.add_argument("--output-dir", help="override the config output directory")


def _angles_triple(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated values")
    return parts


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cdmr",
        description="Cavity-detected magnetic resonance: sweeps, nonlinear analysis and fits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nv-freqs", help="NV transition table over the configured field sweep")
    _add_config_options(p)
    p.add_argument("--exact", action="store_true", help="add exact-diagonalization columns")
    p.set_defaults(func=_cmd_nv_freqs)

    p = sub.add_parser("p1-freqs", help="P1 hyperfine line table over the configured field sweep")
    _add_config_options(p)
    p.set_defaults(func=_cmd_p1_freqs)

    p = sub.add_parser("odmr-lines", help="NV branch curves for overlaying on measured spectra")
    _add_config_options(p)
    p.set_defaults(func=_cmd_odmr_lines)

    p = sub.add_parser("cdmr", help="reflectivity maps over (field, probe) per power and laser level")
    _add_config_options(p)
    p.add_argument("--threads", type=int, help="row parallelism (default: CDMR_THREADS or 1)")
    p.set_defaults(func=_cmd_cdmr)

    p = sub.add_parser("coupling", help="ensemble coupling rate from the configured field map")
    _add_config_options(p)
    p.add_argument("--laser-level", help="laser level name for the polarization (default: laser off)")
    p.set_defaults(func=_cmd_coupling)

    p = sub.add_parser("sensitivity", help="shot-noise-limited spin-number sensitivity")
    _add_config_options(p)
    p.add_argument("--n-eff", type=float, help="also report the cooperativity for this N_eff")
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("expand", help="weak-drive expansion coefficients of the spin shift")
    _add_config_options(p)
    p.add_argument("--delta-hz", type=float, required=True,
                   help="cavity-minus-spin detuning, Hz (non-zero)")
    p.add_argument("--laser-level", help="laser level name (default: laser off)")
    p.set_defaults(func=_cmd_expand)

    p = sub.add_parser("bistability", help="onset of bistability for the expanded nonlinearity")
    _add_config_options(p)
    p.add_argument("--delta-hz", type=float, required=True,
                   help="cavity-minus-spin detuning, Hz (non-zero)")
    p.add_argument("--laser-level", help="laser level name (default: laser off)")
    p.set_defaults(func=_cmd_bistability)

    p = sub.add_parser("fit-orientation", help="fit field angles to observed resonance lines")
    _add_config_options(p)
    p.add_argument("--data", required=True, help="CSV rows: B_T,freq_Hz[,freq_Hz...]")
    p.add_argument("--initial", type=_angles_triple, metavar="TX,TY,TZ",
                   help="initial angles in rad (default: config field_sweep angles)")
    p.add_argument("--monte-carlo", type=int, default=0, metavar="N",
                   help="refit N noisy replicas to calibrate the covariance")
    p.add_argument("--noise-frac", type=float, default=0.05,
                   help="relative frequency noise for --monte-carlo (default 0.05)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for --monte-carlo")
    p.set_defaults(func=_cmd_fit_orientation)

    p = sub.add_parser("fit-cavity", help="fit (omega_c, gamma_c, gamma_f) to a reflectivity trace")
    _add_config_options(p)
    p.add_argument("--data", required=True, help="CSV rows: freq_Hz,Rc")
    p.add_argument("--initial", type=_angles_triple, metavar="F_HZ,GC_HZ,GF_HZ",
                   help="initial guess in Hz (default: config cavity values)")
    p.add_argument("--undercoupled", action="store_true",
                   help="order the fitted pair as gamma_f <= gamma_c")
    p.set_defaults(func=_cmd_fit_cavity)

    p = sub.add_parser("fit-fwhm", help="Lorentzian dip fit returning the FWHM")
    _add_config_options(p)
    p.add_argument("--data", required=True, help="CSV rows: freq_Hz,signal")
    p.set_defaults(func=_cmd_fit_fwhm)

    p = sub.add_parser("fieldmap", help="field-map utilities")
    fieldmap_sub = p.add_subparsers(dest="fieldmap_command", required=True)
    gen = fieldmap_sub.add_parser("gen-loop", help="generate the loop-surrogate field map CSV")
    _add_config_options(gen)
    gen.add_argument("--output", default="loop_fieldmap.csv", help="output file name")
    gen.set_defaults(func=_cmd_fieldmap_gen_loop)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
