"""Command-line entry point: ``qdkerr <command> --config run.yaml --out result``.

Exit codes: 0 ok, 2 config/parse/domain error, 3 I/O error, 4 fit did not converge.
"""
from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone

import numpy as np

from . import io
from .config import ConfigError, ModelConfig, load_config
from .ensemble import envelope_fwhm, phase_scan, rs_lineshape
from .errors import NonConvergenceError, QdKerrError
from .estimation import (
    GammaRatioTable,
    LifetimeDataset,
    PhaseDataset,
    fit_coupling,
    fit_lifetime_scale,
    lifetime_model,
)
from .qed import HBAR_UEV_NS, UEV_PER_MEV, beta_factor, lifetime_from_linewidth, purcell_rate

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NONCONVERGED = 0, 2, 3, 4


class UsageError(ValueError):
    pass


def _load(args) -> ModelConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.jitter.seed = args.seed
    return cfg


def _gamma_table(path):
    det, ratio = io.read_gamma_table(path)
    return GammaRatioTable(det, ratio)


def cmd_simulate_phase(args, cfg: ModelConfig, started):
    det = cfg.scan_detunings()
    scan = phase_scan(cfg.reference_ueV + det, cfg.model(), use_mc=cfg.use_mc)
    header = ["detuning_ueV", "phi_deg", "phi_r_deg", "saturated"]
    columns = [det, np.degrees(scan.phi), np.degrees(scan.phi_r), scan.saturated]
    if args.counts:
        header += ["h", "v", "d", "a"]
        c = scan.counts
        columns += [c.h, c.v, c.d, c.a]
    io.write_csv(args.out, header, columns)
    peak = float(np.nanmax(np.abs(scan.phi))) if np.any(scan.defined) else float("nan")
    extra = {
        "sigma_ueV": cfg.sigma_ueV(),
        "averaging": cfg.jitter.method,
        "max_abs_phi_deg": float(np.degrees(peak)) if np.isfinite(peak) else None,
        "max_abs_phi_r_deg": float(np.degrees(peak / 2)) if np.isfinite(peak) else None,
        "undefined_points": int(np.count_nonzero(~scan.defined)),
    }
    io.write_manifest(args.out, cfg, started, extra)
    print(f"max |phi| = {np.degrees(peak):.3f} deg (Kerr rotation {np.degrees(peak / 2):.3f} deg) -> {args.out}")
    return EXIT_OK


def cmd_lineshape(args, cfg: ModelConfig, started):
    det = cfg.scan_detunings()
    _, intensity = rs_lineshape(cfg.reference_ueV + det, cfg.model(), use_mc=cfg.use_mc)
    io.write_csv(args.out, ["detuning_ueV", "intensity"], [det, intensity])
    width = envelope_fwhm(det, intensity)
    # null when there is no feature or it runs off the scan
    reported = width if np.isfinite(width) else None
    io.write_manifest(args.out, cfg, started, {"sigma_ueV": cfg.sigma_ueV(), "envelope_fwhm_ueV": reported})
    print(f"envelope FWHM = {width:.4f} ueV -> {args.out}")
    return EXIT_OK


def _fit_report_text(summary) -> str:
    p, u, d = summary["params"], summary["uncertainties"], summary["derived"]
    lines = [
        f"Gamma     = {p['Gamma_ueV']:.4f} +/- {u['Gamma_ueV']:.4f} ueV",
        f"gamma     = {d['gamma_ueV']:.4f} ueV  (total {d['total_linewidth_ueV']:.4f} ueV)",
        f"g         = {d['g_ueV']:.3f} ueV",
        f"beta      = {summary['beta']:.4f} +/- {summary['beta_uncertainty']:.4f}",
    ]
    if "delta_z_ueV" in p:
        lines.append(f"delta_z   = {p['delta_z_ueV']:.4f} +/- {u['delta_z_ueV']:.4f} ueV")
    lines += [
        f"rms resid = {np.degrees(summary['residual_rms']):.4f} deg",
        f"converged = {summary['converged']}  (iterations {summary['iterations']}, "
        f"at bound {summary['at_bound']})",
    ]
    return "\n".join(lines)


def cmd_fit(args, cfg: ModelConfig, started):
    if args.data is None:
        raise UsageError("fit needs --data")
    det, phi, weight = io.read_phase_csv(args.data)
    data = PhaseDataset(cfg.reference_ueV + det, phi, weight)
    status = EXIT_OK
    try:
        result = fit_coupling(
            data, cfg.model(), cfg.total_linewidth_ueV(),
            free_delta_z=cfg.fit.free_delta_z,
            parameterization=cfg.fit.parameterization,
            initial_Gamma=cfg.fit.initial_Gamma_ueV,
            max_iter=cfg.fit.max_iter,
        )
    except NonConvergenceError as exc:
        if exc.result is None:
            raise
        result = exc.result
        status = EXIT_NONCONVERGED
        print(f"fit did not converge: {exc}", file=sys.stderr)
    summary = result.summary()
    summary["metadata"]["relative_to"] = cfg.scan.relative_to
    summary["metadata"]["points"] = len(data)
    io.write_json(args.out, summary)
    io.write_manifest(args.out, cfg, started, {"data": str(args.data)})
    print(_fit_report_text(summary))
    return status


def cmd_beta_sweep(args, cfg: ModelConfig, started):
    cav = cfg.cavity_spec()
    dip = cfg.dipole_spec()
    det_meV = np.linspace(cfg.sweep.start_meV, cfg.sweep.stop_meV, cfg.sweep.points)
    omega = cav.omega_c + det_meV * UEV_PER_MEV
    Gamma = purcell_rate(omega, cav, dip.g)
    extra = {}
    if args.gamma_table:
        if cfg.t1_hom_ns is None:
            raise ConfigError([("lifetime.t1_hom_ns", "needed to scale --gamma-table")])
        table = _gamma_table(args.gamma_table)
        gamma_hom = HBAR_UEV_NS / cfg.t1_hom_ns
        gamma = table(det_meV * UEV_PER_MEV) * gamma_hom
        extra["gamma_source"] = {"table": str(args.gamma_table), "gamma_hom_ueV": gamma_hom}
    else:
        gamma = np.full_like(omega, dip.gamma)
        extra["gamma_source"] = "constant dipole.gamma"
    beta = beta_factor(Gamma, gamma, dip.gamma_star)
    io.write_csv(args.out, ["detuning_meV", "Gamma_ueV", "gamma_ueV", "beta"], [det_meV, Gamma, gamma, beta])
    io.write_manifest(args.out, cfg, started, extra)
    print(f"beta from {beta.min():.4f} to {beta.max():.4f} -> {args.out}")
    return EXIT_OK


def cmd_lifetime(args, cfg: ModelConfig, started):
    if args.data is None or args.gamma_table is None:
        raise UsageError("lifetime needs --data and --gamma-table")
    cav = cfg.cavity_spec()
    dip = cfg.dipole_spec()
    det, inv_t1 = io.read_lifetime_csv(args.data)
    table = _gamma_table(args.gamma_table)
    data = LifetimeDataset(cav.omega_c + det, inv_t1)
    status = EXIT_OK
    try:
        result = fit_lifetime_scale(data, cav, dip.g, table)
    except NonConvergenceError as exc:
        if exc.result is None:
            raise
        result, status = exc.result, EXIT_NONCONVERGED
    t1_hom = result.params["t1_hom_ns"]
    model = lifetime_model(data.omega, cav, dip.g, table, t1_hom)
    summary = result.summary()
    summary["points"] = [
        {"detuning_meV": float(d / UEV_PER_MEV), "inverse_t1_per_ns": float(y),
         "model_inverse_t1_per_ns": float(m), "model_t1_ns": float(1 / m),
         "model_linewidth_ueV": float(m * HBAR_UEV_NS)}
        for d, y, m in zip(det, inv_t1, model)
    ]
    io.write_json(args.out, summary)
    io.write_manifest(args.out, cfg, started, {"data": str(args.data), "gamma_table": str(args.gamma_table)})
    print(f"T1_hom = {t1_hom:.4f} +/- {result.uncertainties['t1_hom_ns']:.4f} ns "
          f"(gamma_hom = {HBAR_UEV_NS / t1_hom:.4f} ueV; "
          f"hbar/T1_hom check {lifetime_from_linewidth(HBAR_UEV_NS / t1_hom):.4f} ns)")
    return status


COMMANDS = {
    "simulate-phase": cmd_simulate_phase,
    "lineshape": cmd_lineshape,
    "fit": cmd_fit,
    "beta-sweep": cmd_beta_sweep,
    "lifetime": cmd_lifetime,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdkerr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", required=True, help="output file (a .manifest.json is written beside it)")
        p.add_argument("--seed", type=int, default=None, help="override jitter.seed")
        if name in ("fit", "lifetime"):
            p.add_argument("--data", help="input data CSV")
        if name == "simulate-phase":
            p.add_argument("--counts", action="store_true", help="add h,v,d,a columns")
        if name in ("beta-sweep", "lifetime"):
            p.add_argument("--gamma-table", help="CSV detuning_meV,gamma_ratio")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg, started)
    except (ConfigError, io.ParseError, QdKerrError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
